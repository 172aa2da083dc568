import math
import random

import pytest

from ist.errors import (
    BadBudget,
    BadConfig,
    BadPerturbation,
    Inconsistent,
    MissingCondition,
    ZeroSignal,
)
from ist.experiments import (
    AblationPlan,
    PerturbationSpec,
    default_budget,
    default_perturbations,
    default_replicates,
    encode_with_budget,
    estimate_weights_by_ablation,
    parse_experiment_config,
    perturb_weights,
    plan_for_world,
    run_ablation,
    run_weight_perturbation,
)
from ist.worlds import build_world, expected_f_icmw, mask_without


def world_from(dims, seed=1, task_id="t"):
    return build_world({"tasks": [{"task_id": task_id, "dims": dims}]},
                       seed=seed)


def private_dims(weights, k=1000):
    return [{"id": f"d{i}", "weight": w, "K": k, "lambda": 0.0}
            for i, w in enumerate(weights)]


def public_dims(weights, k=10):
    return [{"id": f"d{i}", "weight": w, "K": k, "lambda": 1.0}
            for i, w in enumerate(weights)]


# -- budgeted encoding -------------------------------------------------------

def test_encode_with_budget_examples():
    ids = ("a", "b", "c")
    w = [0.5, 0.3, 0.2]
    assert encode_with_budget(ids, w, 2).bits == (1, 1, 0)
    assert encode_with_budget(ids, w, 3).bits == (1, 1, 1)
    assert encode_with_budget(ids, w, 0).bits == (0, 0, 0)


def test_encode_with_budget_ties_prefer_declaration_order():
    mask = encode_with_budget(("a", "b", "c"), [0.4, 0.3, 0.3], 2)
    assert mask.bits == (1, 1, 0)


def test_encode_with_budget_errors():
    with pytest.raises(BadBudget):
        encode_with_budget(("a",), [1.0], 2)
    with pytest.raises(BadBudget):
        encode_with_budget(("a",), [1.0], -1)
    with pytest.raises(BadBudget):
        encode_with_budget(("a", "b"), [1.0], 1)


def test_default_budget():
    assert default_budget(1) == 1
    assert default_budget(6) == 3
    assert default_budget(7) == 4


# -- perturbations -----------------------------------------------------------

def test_perturb_identity():
    assert perturb_weights([0.5, 0.3, 0.2], PerturbationSpec("identity")) \
        == [0.5, 0.3, 0.2]


def test_perturb_full_inversion():
    got = perturb_weights([0.5, 0.3, 0.2], PerturbationSpec("full_inversion"))
    assert got == [0.2, 0.3, 0.5]
    # multiset of values is preserved even with the vector unsorted
    got2 = perturb_weights([0.3, 0.5, 0.2],
                           PerturbationSpec("full_inversion"))
    assert sorted(got2) == [0.2, 0.3, 0.5]
    assert got2 == [0.3, 0.2, 0.5]


def test_perturb_adjacent_swap():
    got = perturb_weights([0.5, 0.3, 0.2],
                          PerturbationSpec("adjacent_swap", count=1))
    assert got == [0.3, 0.5, 0.2]


def test_jitter_preserves_separated_ranking():
    w = [0.5, 0.3, 0.2]
    spec = PerturbationSpec("jitter", epsilon=0.05)
    for seed in range(1000):
        got = perturb_weights(w, spec, seed=seed)
        assert sorted(range(3), key=lambda i: -got[i]) == [0, 1, 2]
        assert abs(math.fsum(got) - 1.0) < 1e-9
        assert all(x > 0 for x in got)


def test_jitter_actually_moves_weights():
    got = perturb_weights([0.5, 0.3, 0.2],
                          PerturbationSpec("jitter", epsilon=0.05), seed=1)
    assert got != [0.5, 0.3, 0.2]


def test_perturbations_always_yield_valid_weights():
    rng = random.Random(31)
    specs = default_perturbations() + [
        PerturbationSpec("adjacent_swap", count=3),
        PerturbationSpec("jitter", epsilon=0.19),
    ]
    for trial in range(50):
        n = rng.randint(2, 9)
        raw = [rng.uniform(0.01, 1.0) for _ in range(n)]
        total = math.fsum(raw)
        w = [x / total for x in raw]
        for spec in specs:
            if spec.kind == "adjacent_swap" and spec.count > n // 2:
                with pytest.raises(BadPerturbation):
                    perturb_weights(w, spec, seed=trial)
                continue
            got = perturb_weights(w, spec, seed=trial)
            assert abs(math.fsum(got) - 1.0) < 1e-9
            assert all(x >= 0 for x in got)
            if spec.kind in ("adjacent_swap", "full_inversion"):
                assert sorted(got) == sorted(w)


def test_bad_perturbations():
    with pytest.raises(BadPerturbation):
        PerturbationSpec("nope")
    with pytest.raises(BadPerturbation):
        PerturbationSpec("jitter", epsilon=0.0)
    with pytest.raises(BadPerturbation):
        PerturbationSpec("jitter", epsilon=1.0)
    with pytest.raises(BadPerturbation):
        PerturbationSpec("adjacent_swap", count=0)


def test_perturbation_names():
    assert PerturbationSpec("jitter", epsilon=0.05).name == "jitter(0.05)"
    assert PerturbationSpec("adjacent_swap", count=2).name == "adjacent_swap(2)"
    assert PerturbationSpec("identity").name == "identity"


# -- ablation ----------------------------------------------------------------

def test_run_ablation_record_count_and_conditions():
    world = world_from(private_dims([0.5, 0.3, 0.2]), seed=2)
    plan = plan_for_world(world, mode="sample", replicates=4)
    records = list(run_ablation(world, plan))
    assert len(records) == (1 + 3) * 4
    conditions = {r.condition for r in records}
    assert conditions == {"FULL", "ABL_d0", "ABL_d1", "ABL_d2"}
    for r in records:
        assert r.s_icmw == 1.0 and r.ga == 5
        if r.condition == "FULL":
            assert r.f_icmw == 1.0


def test_ablating_public_dimension_costs_nothing():
    world = world_from(public_dims([0.6, 0.4]), seed=3)
    records = list(run_ablation(world, plan_for_world(world, mode="argmax")))
    assert all(r.f_icmw == 1.0 for r in records)


def test_ablating_private_dimension_drops_by_weight():
    # user values off the argmax for every dim at this seed
    world = world_from(private_dims([0.5, 0.3, 0.2], k=1000), seed=1)
    task = world.tasks[0]
    assert all(d.user_index != 0 for d in task.dims)
    records = {r.condition: r for r in
               run_ablation(world, plan_for_world(world, mode="argmax"))}
    for i, w in enumerate([0.5, 0.3, 0.2]):
        got = records[f"ABL_d{i}"].f_icmw
        oracle = expected_f_icmw(world, "t",
                                 mask_without(task, {f"d{i}"}), mode="argmax")
        assert got == 1.0 - w
        assert abs(oracle - (1.0 - w * (1 - 1 / 1000))) < 1e-12


def test_run_ablation_parallel_matches_serial():
    world = world_from(private_dims([0.4, 0.35, 0.25], k=12), seed=5)
    plan = plan_for_world(world, mode="sample", replicates=6)
    serial = list(run_ablation(world, plan, jobs=1))
    parallel = list(run_ablation(world, plan, jobs=4))
    assert serial == parallel


def test_plan_validation():
    world = world_from(private_dims([1.0]), seed=1)
    with pytest.raises(BadConfig):
        plan_for_world(world, mode="nope")
    with pytest.raises(BadConfig):
        AblationPlan(task_ids=("t",), mode="sample", replicates=0)
    assert default_replicates("sample") == 50
    assert default_replicates("argmax") == 1


# -- weight recovery ---------------------------------------------------------

def test_estimate_weights_analytic():
    world = world_from(private_dims([0.5, 0.3, 0.2], k=1000), seed=1)
    records = list(run_ablation(world, plan_for_world(world, mode="argmax")))
    got = estimate_weights_by_ablation(records)
    l1 = sum(abs(got[f"d{i}"] - w) for i, w in enumerate([0.5, 0.3, 0.2]))
    assert l1 <= 1e-9


def test_estimate_weights_sampling():
    world = world_from(private_dims([0.5, 0.3, 0.2], k=50), seed=2)
    plan = plan_for_world(world, mode="sample", replicates=600)
    got = estimate_weights_by_ablation(run_ablation(world, plan))
    l1 = sum(abs(got[f"d{i}"] - w) for i, w in enumerate([0.5, 0.3, 0.2]))
    assert l1 <= 0.08


def test_estimate_weights_mixed_world_oracle():
    dims = [{"id": "a", "weight": 0.6, "K": 4, "lambda": 0.5},
            {"id": "b", "weight": 0.4, "K": 8, "lambda": 0.0}]
    world = world_from(dims, seed=3)
    records = list(run_ablation(world, plan_for_world(world, mode="sample",
                                                      replicates=4000)))
    got = estimate_weights_by_ablation(records)
    # drops converge to w_i * (1 - prior_i(user)) normalized
    raw = [0.6 * (1 - (0.5 + 0.5 / 4)), 0.4 * (1 - 1 / 8)]
    want = [x / math.fsum(raw) for x in raw]
    l1 = abs(got["a"] - want[0]) + abs(got["b"] - want[1])
    assert l1 <= 0.05


def test_estimate_weights_zero_signal():
    world = world_from(public_dims([0.5, 0.5]), seed=1)
    records = list(run_ablation(world, plan_for_world(world, mode="argmax")))
    with pytest.raises(ZeroSignal):
        estimate_weights_by_ablation(records)


def test_estimate_weights_missing_condition():
    world = world_from(private_dims([0.5, 0.5], k=30), seed=1)
    records = [r for r in run_ablation(world, plan_for_world(world, "argmax"))
               if r.condition != "ABL_d1"]
    with pytest.raises(MissingCondition):
        estimate_weights_by_ablation(records)
    with pytest.raises(MissingCondition):
        estimate_weights_by_ablation([])


def test_estimate_weights_rejects_mixed_tasks():
    w1 = world_from(private_dims([0.5, 0.5], k=30), seed=1, task_id="t1")
    w2 = world_from(private_dims([0.5, 0.5], k=30), seed=1, task_id="t2")
    records = list(run_ablation(w1, plan_for_world(w1, "argmax"))) \
        + list(run_ablation(w2, plan_for_world(w2, "argmax")))
    with pytest.raises(Inconsistent):
        estimate_weights_by_ablation(records)


# -- perturbation harness ----------------------------------------------------

def test_perturbation_grid_plateau_and_cliff(grid_config):
    world = build_world(grid_config)
    report = run_weight_perturbation(world)
    assert report.plateau_rate == 1.0
    assert report.cliff_rate == 1.0
    assert report.mean_inversion_drop >= 0.1
    for cell in report.cells:
        if cell.perturbation == "identity":
            assert cell.delta_vs_baseline == 0.0
        if not cell.mask_changed:
            assert cell.delta_vs_baseline == 0.0
        if cell.perturbation == "full_inversion":
            assert cell.mask_changed
            assert cell.delta_vs_baseline < 0.0
        assert 0.0 <= cell.was <= 1.0


def test_perturbation_parallel_matches_serial(grid_config):
    world = build_world(grid_config)
    a = run_weight_perturbation(world, jobs=1)
    b = run_weight_perturbation(world, jobs=3)
    assert a == b


def test_full_budget_is_degenerate():
    world = world_from(private_dims([0.5, 0.3, 0.2], k=20), seed=4)
    report = run_weight_perturbation(world, budget=3)
    assert all(cell.was == 1.0 for cell in report.cells)
    assert report.cliff_rate == 0.0


def test_perturbation_sample_mode_runs():
    world = world_from(private_dims([0.5, 0.3, 0.2], k=20), seed=4)
    report = run_weight_perturbation(world, mode="sample", replicates=10)
    assert report.cells
    with pytest.raises(BadConfig):
        run_weight_perturbation(world, mode="nope")


# -- experiment config -------------------------------------------------------

def test_parse_experiment_config_minimal():
    cfg = parse_experiment_config(
        b'{"world_config": {"tasks": [{"task_id": "t", "dims": '
        b'[{"id": "a", "weight": 1.0, "K": 4, "lambda": 0.0}]}]}, "seed": 9}')
    assert cfg.world.seed == 9
    assert cfg.world.tasks[0].task_id == "t"
    assert cfg.mode == "argmax" and cfg.budget is None


def test_parse_experiment_config_perturbation_forms():
    base = (b'{"seed": 3, "world_config": {"tasks": [{"task_id": "t", "dims": '
            b'[{"id": "a", "weight": 1.0, "K": 4, "lambda": 0.0}]}]}, ')
    cfg = parse_experiment_config(
        base + b'"perturbations": ["identity", '
        b'{"kind": "jitter", "epsilon": 0.1}, '
        b'{"kind": "adjacent_swap", "count": 2}]}')
    names = [p.name for p in cfg.perturbations]
    assert names == ["identity", "jitter(0.1)", "adjacent_swap(2)"]


def test_parse_experiment_config_rejects_bad_shapes():
    with pytest.raises(BadConfig):
        parse_experiment_config(b'{"seed": 1}')  # no world at all
    with pytest.raises(BadConfig):
        parse_experiment_config(
            b'{"world_config": {"tasks": []}, "world_path": "x.json"}')
    with pytest.raises(BadConfig):
        parse_experiment_config(
            b'{"world_config": {"tasks": []}, "mystery": true}')
