"""Ablation and weight-perturbation harnesses over synthetic worlds.

Two experiment designs live here:

* run_ablation: FULL condition plus one condition per dimension with
  that dimension's mask bit zeroed. Fidelity drops under ablation
  identify the weights (estimate_weights_by_ablation).

* run_weight_perturbation: encode a carrier under a budget using
  perturbed weights, score it under the true weights (WAS). Because a
  perturbation only matters through the chosen mask, any perturbation
  preserving the top-B weight set gives an identical mask and therefore
  a WAS delta of exactly zero (the plateau); inverting the ranking
  displaces high-weight private dimensions and craters WAS (the cliff).

Every record's draw index is a pure function of its plan position, so
results are identical at any parallelism level.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    BadBudget,
    BadConfig,
    BadPerturbation,
    Inconsistent,
    MissingCondition,
    ZeroSignal,
)
from .metrics import score_output, synthesize_ga, weighted_sum
from .model import EncodingMask, normalize_weights
from .rng import PERTURB_STREAM, derive, unit_float
from .spec_io import OutputRecord
from .worlds import (
    SyntheticWorld,
    WorldTask,
    build_world,
    full_mask,
    mask_without,
    simulate_output,
    to_intent_spec,
)

FULL_CONDITION = "FULL"
ABLATION_PREFIX = "ABL_"

# Replicate defaults: sampling needs repetition, argmax is deterministic.
SAMPLE_REPLICATES = 50
ARGMAX_REPLICATES = 1


def default_replicates(mode: str) -> int:
    return ARGMAX_REPLICATES if mode == "argmax" else SAMPLE_REPLICATES


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AblationPlan:
    task_ids: tuple[str, ...]
    mode: str = "argmax"
    replicates: int = ARGMAX_REPLICATES

    def __post_init__(self):
        if self.mode not in ("argmax", "sample"):
            raise BadConfig(f"mode must be 'argmax' or 'sample', got {self.mode!r}")
        if self.replicates < 1:
            raise BadConfig(f"replicates must be >= 1, got {self.replicates}")


def plan_for_world(world: SyntheticWorld, mode: str = "argmax",
                   replicates: int | None = None) -> AblationPlan:
    if replicates is None:
        replicates = default_replicates(mode)
    return AblationPlan(task_ids=tuple(t.task_id for t in world.tasks),
                        mode=mode, replicates=replicates)


def _conditions(task: WorldTask) -> list[tuple[str, EncodingMask]]:
    conds = [(FULL_CONDITION, full_mask(task))]
    for dim in task.dims:
        conds.append((ABLATION_PREFIX + dim.id, mask_without(task, {dim.id})))
    return conds


def _score_simulated(world: SyntheticWorld, task: WorldTask, condition: str,
                     mask: EncodingMask, mode: str, draw: int) -> OutputRecord:
    out = simulate_output(world, task.task_id, mask, mode, draw)
    scores = score_output(to_intent_spec(task), out.realized_values)
    s = weighted_sum(task.weights, scores.r)
    f = weighted_sum(task.weights, scores.f)
    return OutputRecord(
        task_id=task.task_id,
        condition=condition,
        model_tag=world.tag,
        mask=mask,
        realized_values=out.realized_values,
        ga=synthesize_ga(s),
        s_icmw=s,
        f_icmw=f,
    )


def run_ablation(world: SyntheticWorld, plan: AblationPlan,
                 jobs: int = 1) -> Iterator[OutputRecord]:
    """Emit one record per (task, condition, replicate), in plan order.

    The draw index is condition_index * replicates + replicate, fixed by
    plan position alone; with jobs > 1 the records are computed in a
    thread pool but still yielded in plan order, so output bytes do not
    depend on the parallelism level.
    """
    work = []
    for task_id in plan.task_ids:
        task = world.task(task_id)
        for cond_ix, (condition, mask) in enumerate(_conditions(task)):
            for rep in range(plan.replicates):
                draw = cond_ix * plan.replicates + rep
                work.append((task, condition, mask, draw))
    if jobs <= 1:
        for task, condition, mask, draw in work:
            yield _score_simulated(world, task, condition, mask, plan.mode, draw)
        return

    def job(args):
        task, condition, mask, draw = args
        return _score_simulated(world, task, condition, mask, plan.mode, draw)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(job, work)


def estimate_weights_by_ablation(records: Iterable[OutputRecord]) -> dict[str, float]:
    """Infer dimension weights from fidelity drops under ablation.

    drop_i = mean f_icmw(FULL) - mean f_icmw(ABL_i), floored at zero,
    then normalized. All-zero drops mean the world is all-public and the
    weights are unidentifiable by this method.
    """
    by_condition: dict[str, list[float]] = {}
    dims: tuple[str, ...] | None = None
    task_id: str | None = None
    for rec in records:
        if task_id is None:
            task_id = rec.task_id
            dims = rec.mask.dims
        elif rec.task_id != task_id:
            raise Inconsistent(
                f"records mix tasks {task_id!r} and {rec.task_id!r}")
        by_condition.setdefault(rec.condition, []).append(rec.f_icmw)
    if dims is None:
        raise MissingCondition(FULL_CONDITION)
    if FULL_CONDITION not in by_condition:
        raise MissingCondition(FULL_CONDITION)
    full_mean = float(np.mean(by_condition[FULL_CONDITION]))
    drops = []
    for dim_id in dims:
        cond = ABLATION_PREFIX + dim_id
        if cond not in by_condition:
            raise MissingCondition(cond)
        drop = full_mean - float(np.mean(by_condition[cond]))
        drops.append(max(0.0, drop))
    if all(d == 0.0 for d in drops):
        raise ZeroSignal(
            f"no fidelity drop under any ablation of task {task_id!r}; "
            "weights unidentifiable (all-public world?)")
    inferred = normalize_weights(drops)
    return dict(zip(dims, inferred))


# ---------------------------------------------------------------------------
# budgeted encoding
# ---------------------------------------------------------------------------

def default_budget(n_dims: int) -> int:
    """ceil(n/2): guarantees both encoded and absent dimensions exist."""
    return math.ceil(n_dims / 2)


def encode_with_budget(dim_ids: Sequence[str], assumed_weights: Sequence[float],
                       budget: int) -> EncodingMask:
    """Mask the top-`budget` dimensions by assumed weight.

    Ties break toward earlier flatten order (stable sort on the negated
    weights).
    """
    n = len(dim_ids)
    if len(assumed_weights) != n:
        raise BadBudget(f"{n} ids vs {len(assumed_weights)} weights")
    if not isinstance(budget, int) or isinstance(budget, bool) or not 0 <= budget <= n:
        raise BadBudget(f"budget must be an integer in [0, {n}], got {budget!r}")
    order = np.argsort(-np.asarray(assumed_weights, dtype=np.float64),
                       kind="stable")
    chosen = set(int(i) for i in order[:budget])
    return EncodingMask(tuple(dim_ids),
                        tuple(1 if i in chosen else 0 for i in range(n)))


# ---------------------------------------------------------------------------
# weight perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSpec:
    kind: str  # identity | jitter | adjacent_swap | full_inversion
    epsilon: float = 0.0
    count: int = 0

    def __post_init__(self):
        if self.kind == "jitter":
            if not 0.0 < self.epsilon < 1.0:
                raise BadPerturbation(
                    f"jitter epsilon must be in (0, 1), got {self.epsilon}")
        elif self.kind == "adjacent_swap":
            if self.count < 1:
                raise BadPerturbation(
                    f"adjacent_swap count must be >= 1, got {self.count}")
        elif self.kind not in ("identity", "full_inversion"):
            raise BadPerturbation(f"unknown perturbation kind {self.kind!r}")

    @property
    def name(self) -> str:
        if self.kind == "jitter":
            return f"jitter({format(self.epsilon, 'g')})"
        if self.kind == "adjacent_swap":
            return f"adjacent_swap({self.count})"
        return self.kind


def default_perturbations(epsilon: float = 0.05) -> list[PerturbationSpec]:
    """The severity ladder: none, moderate noise, rank nudge, inversion."""
    return [
        PerturbationSpec("identity"),
        PerturbationSpec("jitter", epsilon=epsilon),
        PerturbationSpec("adjacent_swap", count=1),
        PerturbationSpec("full_inversion"),
    ]


def perturb_weights(weights: Sequence[float], spec: PerturbationSpec,
                    seed: int = 0) -> list[float]:
    """Apply one perturbation; the result is a valid weight vector.

    jitter multiplies each weight by a factor uniform in [1-eps, 1+eps]
    and renormalizes (eps <= 0.2 keeps well-separated rankings intact).
    adjacent_swap(c) swaps the first c disjoint adjacent pairs of the
    descending ranking: values at ranks (0,1), (2,3), ... trade places.
    full_inversion hands the largest value to the lowest-ranked
    dimension and so on, preserving the multiset of values.
    """
    w = [float(x) for x in weights]
    n = len(w)
    if n == 0:
        raise BadPerturbation("empty weight vector")
    if spec.kind == "identity":
        return w
    if spec.kind == "jitter":
        eps = spec.epsilon
        factors = [1.0 - eps + 2.0 * eps * unit_float(derive(seed, PERTURB_STREAM, i))
                   for i in range(n)]
        return normalize_weights([wi * fi for wi, fi in zip(w, factors)])
    order = np.argsort(-np.asarray(w), kind="stable")
    out = list(w)
    if spec.kind == "adjacent_swap":
        if spec.count > n // 2:
            raise BadPerturbation(
                f"adjacent_swap({spec.count}) needs {2 * spec.count} dims, have {n}")
        for j in range(spec.count):
            a, b = int(order[2 * j]), int(order[2 * j + 1])
            out[a], out[b] = w[b], w[a]
        return out
    # full_inversion
    for rank, ix in enumerate(order):
        out[int(ix)] = w[int(order[n - 1 - rank])]
    return out


# ---------------------------------------------------------------------------
# the perturbation experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellSummary:
    task_id: str
    model_tag: str
    perturbation: str
    was: float
    delta_vs_baseline: float
    mask_changed: bool


@dataclass(frozen=True)
class PerturbationReport:
    cells: tuple[CellSummary, ...]
    plateau_rate: float | None
    cliff_rate: float | None
    mean_inversion_drop: float | None


def _was_for_mask(world: SyntheticWorld, task: WorldTask, mask: EncodingMask,
                  mode: str, replicates: int) -> float:
    """Mean f_icmw under TRUE weights; draws depend on replicate only,
    never on which perturbation produced the mask."""
    total = 0.0
    for rep in range(replicates):
        out = simulate_output(world, task.task_id, mask, mode, draw=rep)
        scores = score_output(to_intent_spec(task), out.realized_values)
        total += weighted_sum(task.weights, scores.f)
    return total / replicates


def run_weight_perturbation(world: SyntheticWorld,
                            budget: int | None = None,
                            perturbations: Sequence[PerturbationSpec] | None = None,
                            mode: str = "argmax",
                            replicates: int | None = None,
                            jobs: int = 1) -> PerturbationReport:
    """WAS per (task, perturbation) plus plateau and cliff rates.

    Baseline is the identity perturbation (always evaluated, listed or
    not). plateau_rate is the share of non-identity, mask-preserving
    cells whose WAS delta is exactly zero; cliff_rate is the share of
    tasks where full inversion lands strictly below baseline.
    """
    if mode not in ("argmax", "sample"):
        raise BadConfig(f"mode must be 'argmax' or 'sample', got {mode!r}")
    if replicates is None:
        replicates = default_replicates(mode)
    if perturbations is None:
        perturbations = default_perturbations()
    specs = list(perturbations)
    if not any(p.kind == "identity" for p in specs):
        specs.insert(0, PerturbationSpec("identity"))

    def run_task(task: WorldTask) -> list[CellSummary]:
        n = len(task.dims)
        b = default_budget(n) if budget is None else budget
        w_true = list(task.weights)
        base_mask = encode_with_budget(task.dim_ids, w_true, b)
        baseline = _was_for_mask(world, task, base_mask, mode, replicates)
        rows = []
        for p_ix, p in enumerate(specs):
            w_p = perturb_weights(
                w_true, p, seed=derive(world.seed, PERTURB_STREAM,
                                       task.index, p_ix))
            mask_p = encode_with_budget(task.dim_ids, w_p, b)
            # Always recomputed, even for identical masks: the exact-zero
            # plateau is a consequence of mask-independent draws, not of
            # result caching.
            was = _was_for_mask(world, task, mask_p, mode, replicates)
            rows.append(CellSummary(
                task_id=task.task_id,
                model_tag=world.tag,
                perturbation=p.name,
                was=was,
                delta_vs_baseline=was - baseline,
                mask_changed=mask_p.bits != base_mask.bits,
            ))
        return rows

    tasks = list(world.tasks)
    if jobs <= 1:
        per_task = [run_task(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_task = list(pool.map(run_task, tasks))
    cells = tuple(c for rows in per_task for c in rows)

    preserving = [c for c in cells
                  if c.perturbation != "identity" and not c.mask_changed]
    plateau_rate = (sum(1 for c in preserving if c.delta_vs_baseline == 0.0)
                    / len(preserving)) if preserving else None
    inversions = [c for c in cells if c.perturbation == "full_inversion"]
    cliff_rate = (sum(1 for c in inversions if c.delta_vs_baseline < 0.0)
                  / len(inversions)) if inversions else None
    mean_drop = (float(np.mean([-c.delta_vs_baseline for c in inversions]))
                 if inversions else None)
    return PerturbationReport(cells=cells, plateau_rate=plateau_rate,
                              cliff_rate=cliff_rate,
                              mean_inversion_drop=mean_drop)


def cell_to_obj(c: CellSummary) -> dict:
    return {
        "task_id": c.task_id,
        "model_tag": c.model_tag,
        "perturbation": c.perturbation,
        "was": c.was,
        "delta_vs_baseline": c.delta_vs_baseline,
        "mask_changed": c.mask_changed,
    }


def report_to_obj(rep: PerturbationReport) -> dict:
    return {
        "cells": [cell_to_obj(c) for c in rep.cells],
        "plateau_rate": rep.plateau_rate,
        "cliff_rate": rep.cliff_rate,
        "mean_inversion_drop": rep.mean_inversion_drop,
    }


# ---------------------------------------------------------------------------
# experiment configs (JSON side)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    world: SyntheticWorld
    budget: int | None = None
    perturbations: tuple[PerturbationSpec, ...] = field(
        default_factory=lambda: tuple(default_perturbations()))
    replicates: int | None = None
    mode: str = "argmax"


def _parse_perturbation(item, where: str) -> PerturbationSpec:
    if isinstance(item, str):
        kind = item
        params: dict = {}
    elif isinstance(item, dict):
        kind = item.get("kind")
        params = item
    else:
        raise BadConfig(f"{where}: expected string or object")
    if not isinstance(kind, str):
        raise BadConfig(f"{where}: perturbation needs a string kind")
    try:
        if kind == "jitter":
            return PerturbationSpec("jitter",
                                    epsilon=float(params.get("epsilon", 0.05)))
        if kind == "adjacent_swap":
            return PerturbationSpec("adjacent_swap",
                                    count=int(params.get("count", 1)))
        return PerturbationSpec(kind)
    except BadPerturbation as e:
        raise BadConfig(f"{where}: {e}") from None


def parse_experiment_config(data: bytes | str, *, base_dir=None,
                            seed: int | None = None) -> ExperimentConfig:
    """Parse {world_config | world_path, budget, perturbations,
    replicates, mode, seed}; relative world_path resolves against
    base_dir."""
    from pathlib import Path

    from .spec_io import loads_strict
    from .worlds import load_world

    doc = loads_strict(data)
    if not isinstance(doc, dict):
        raise BadConfig("experiment config must be a JSON object")
    known = {"world_config", "world_path", "budget", "perturbations",
             "replicates", "mode", "seed"}
    unknown = set(doc) - known
    if unknown:
        raise BadConfig(f"unknown config fields {sorted(unknown)!r}")
    if seed is None:
        seed = doc.get("seed")
    if ("world_config" in doc) == ("world_path" in doc):
        raise BadConfig("config needs exactly one of world_config, world_path")
    if "world_config" in doc:
        world = build_world(doc["world_config"], seed)
    else:
        path = Path(doc["world_path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        world = load_world(path, seed)
    budget = doc.get("budget")
    if budget is not None and (isinstance(budget, bool) or not isinstance(budget, int)):
        raise BadConfig(f"budget must be an integer, got {budget!r}")
    mode = doc.get("mode", "argmax")
    if mode not in ("argmax", "sample"):
        raise BadConfig(f"mode must be 'argmax' or 'sample', got {mode!r}")
    replicates = doc.get("replicates")
    if replicates is not None:
        if isinstance(replicates, bool) or not isinstance(replicates, int) or replicates < 1:
            raise BadConfig(f"replicates must be a positive integer, got {replicates!r}")
    if "perturbations" in doc:
        raw = doc["perturbations"]
        if not isinstance(raw, list) or not raw:
            raise BadConfig("perturbations must be a non-empty array")
        perturbations = tuple(_parse_perturbation(p, f"perturbations[{i}]")
                              for i, p in enumerate(raw))
    else:
        perturbations = tuple(default_perturbations())
    return ExperimentConfig(world=world, budget=budget,
                            perturbations=perturbations,
                            replicates=replicates, mode=mode)
