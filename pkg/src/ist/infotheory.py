"""Brute-force information theory over small discrete joints.

Everything here works by dense enumeration: joints are full probability
tables (capped at 10^6 cells), entropies are exact sums, decoders are
explicit row-stochastic maps from evidence cells to output
distributions, and the data processing inequality is checked by
literally computing both mutual informations. No estimation anywhere.

Units are bits (log base 2) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DomainMismatch,
    InvalidDistribution,
    RangeError,
    UnknownVariable,
    WorldTooLarge,
)
from .rng import DECODER_STREAM, derive, uniform_index
from .worlds import SyntheticWorld, WorldDim

CELL_CAP = 10 ** 6
_SUM_TOL = 1e-9
_MI_NEG_TOL = 1e-12
DPI_TOL = 1e-9
THETA_PUB_DEFAULT = 0.9
# Public additionally requires clearing chance by this margin, so a world
# where the best decoder is no better than blind guessing can never be
# labeled public no matter how low theta_pub is set.
CHANCE_FLOOR = 0.1


@dataclass(frozen=True)
class DiscreteJoint:
    """Dense joint distribution over named finite variables."""

    variables: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        tab = np.ascontiguousarray(np.asarray(self.table, dtype=np.float64))
        if tab.ndim != len(self.variables):
            raise InvalidDistribution(
                f"table has {tab.ndim} axes for {len(self.variables)} variables")
        if len(set(self.variables)) != len(self.variables):
            raise InvalidDistribution(f"duplicate variable names {self.variables!r}")
        if tab.size > CELL_CAP:
            raise WorldTooLarge(tab.size, CELL_CAP)
        if tab.size == 0:
            raise InvalidDistribution("empty table")
        if np.any(tab < 0):
            raise InvalidDistribution(f"negative entry {float(tab.min())}")
        total = float(tab.sum())
        if abs(total - 1.0) > _SUM_TOL:
            raise InvalidDistribution(f"table sums to {total!r}, expected 1")
        tab.flags.writeable = False
        object.__setattr__(self, "table", tab)

    def axis(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise UnknownVariable(name) from None

    def size(self, name: str) -> int:
        return self.table.shape[self.axis(name)]

    def marginal(self, *names: str) -> "DiscreteJoint":
        """Marginal over the named variables, axes in the order given."""
        if len(set(names)) != len(names) or not names:
            raise DomainMismatch(f"bad marginal request {names!r}")
        keep = [self.axis(n) for n in names]
        drop = tuple(i for i in range(self.table.ndim) if i not in keep)
        marg = self.table.sum(axis=drop) if drop else self.table
        # sum() put kept axes in original order; permute to requested order
        order = np.argsort(keep, kind="stable")
        inverse = np.empty_like(order)
        inverse[order] = np.arange(len(keep))
        return DiscreteJoint(tuple(names), np.transpose(marg, inverse))


def entropy(dist) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    if isinstance(dist, DiscreteJoint):
        p = dist.table
    else:
        p = np.asarray(dist, dtype=np.float64)
        if p.size == 0:
            raise InvalidDistribution("empty distribution")
        if np.any(p < 0):
            raise InvalidDistribution(f"negative entry {float(p.min())}")
        if abs(float(p.sum()) - 1.0) > _SUM_TOL:
            raise InvalidDistribution(f"sums to {float(p.sum())!r}, expected 1")
    h = _kernels.entropy_bits(p)
    return 0.0 if h < 0.0 else h


def _as_group(x) -> tuple[str, ...]:
    if isinstance(x, str):
        return (x,)
    return tuple(x)


def mutual_information(joint: DiscreteJoint, x, y) -> float:
    """I(x; y) = H(x) + H(y) - H(x, y) over variable groups, in bits.

    Tiny negative results (cancellation noise, within -1e-12) clamp to
    zero; anything more negative is treated as a bug and raised.
    """
    gx, gy = _as_group(x), _as_group(y)
    if set(gx) & set(gy):
        raise DomainMismatch(f"groups overlap: {gx!r} vs {gy!r}")
    hx = entropy(joint.marginal(*gx))
    hy = entropy(joint.marginal(*gy))
    hxy = entropy(joint.marginal(*gx, *gy))
    mi = hx + hy - hxy
    if mi < 0.0:
        if mi < -_MI_NEG_TOL:
            raise RangeError(f"mutual information {mi} below -1e-12")
        return 0.0
    return mi


# ---------------------------------------------------------------------------
# decoders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Decoder:
    """Row-stochastic map from evidence cells to an output distribution.

    rows has shape evidence_sizes + (output_size,); deterministic
    decoders are the special case of point-mass rows.
    """

    evidence_vars: tuple[str, ...]
    output_var: str
    rows: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float64))
        if rows.ndim != len(self.evidence_vars) + 1:
            raise InvalidDistribution(
                f"rows rank {rows.ndim} for {len(self.evidence_vars)} evidence vars")
        if np.any(rows < 0):
            raise InvalidDistribution("negative decoder entry")
        sums = rows.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > _SUM_TOL):
            raise InvalidDistribution("decoder row does not sum to 1")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def evidence_sizes(self) -> tuple[int, ...]:
        return self.rows.shape[:-1]

    @property
    def output_size(self) -> int:
        return self.rows.shape[-1]


def constant_decoder(evidence_vars, evidence_sizes, output_size: int,
                     index: int = 0, output_var: str = "g") -> Decoder:
    rows = np.zeros(tuple(evidence_sizes) + (output_size,))
    rows[..., index] = 1.0
    return Decoder(tuple(evidence_vars), output_var, rows)


def identity_decoder(var: str, size: int, output_var: str = "g") -> Decoder:
    return Decoder((var,), output_var, np.eye(size))


def random_deterministic_decoder(evidence_vars, evidence_sizes,
                                 output_size: int, seed: int,
                                 output_var: str = "g") -> Decoder:
    """Each evidence cell maps to one output token, chosen by keyed hash."""
    shape = tuple(evidence_sizes)
    rows = np.zeros(shape + (output_size,))
    flat = rows.reshape(-1, output_size)
    for cell in range(flat.shape[0]):
        flat[cell, uniform_index(derive(seed, DECODER_STREAM, cell), output_size)] = 1.0
    return Decoder(tuple(evidence_vars), output_var, rows)


def bayes_decoder(joint: DiscreteJoint, v: str, evidence_vars,
                  output_var: str = "g") -> Decoder:
    """MAP decoder: each evidence cell points at argmax_v p(v | evidence).

    Ties break toward the lowest token index; evidence cells of
    probability zero also map to token 0.
    """
    ev = _as_group(evidence_vars)
    marg = joint.marginal(v, *ev)
    v_size = marg.table.shape[0]
    flat = marg.table.reshape(v_size, -1)
    picks = np.argmax(flat, axis=0)
    rows = np.zeros((flat.shape[1], v_size))
    rows[np.arange(flat.shape[1]), picks] = 1.0
    shape = tuple(joint.size(n) for n in ev) + (v_size,)
    return Decoder(tuple(ev), output_var, rows.reshape(shape))


def apply_decoder(joint: DiscreteJoint, decoder: Decoder) -> DiscreteJoint:
    """Extend the joint with the decoder's output variable.

    The new variable depends on the rest only through the evidence,
    because its conditional is literally the decoder row: the Markov
    chain v -> evidence -> g holds by construction.
    """
    for name, size in zip(decoder.evidence_vars, decoder.evidence_sizes):
        if joint.size(name) != size:
            raise DomainMismatch(
                f"evidence {name!r}: joint size {joint.size(name)}, "
                f"decoder expects {size}")
    if decoder.output_var in joint.variables:
        raise DomainMismatch(f"variable {decoder.output_var!r} already present")
    letters = "abcdefghijklmnopqrstuvwxyz"
    if joint.table.ndim + 1 > len(letters):
        raise DomainMismatch("too many variables to extend")
    j_sub = letters[:joint.table.ndim]
    out_letter = letters[joint.table.ndim]
    r_sub = "".join(j_sub[joint.axis(n)] for n in decoder.evidence_vars) + out_letter
    new_table = np.einsum(f"{j_sub},{r_sub}->{j_sub}{out_letter}",
                          joint.table, decoder.rows)
    return DiscreteJoint(joint.variables + (decoder.output_var,), new_table)


# ---------------------------------------------------------------------------
# DPI and decoding accuracy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DpiReport:
    i_v_evidence: float
    i_v_g: float
    holds: bool
    slack: float


def verify_dpi(joint: DiscreteJoint, decoder: Decoder) -> DpiReport:
    """Check I(v; g) <= I(v; evidence) with v = all non-evidence variables."""
    v_group = tuple(n for n in joint.variables if n not in decoder.evidence_vars)
    if not v_group:
        raise DomainMismatch("decoder evidence covers every variable")
    i_v_e = mutual_information(joint, v_group, decoder.evidence_vars)
    extended = apply_decoder(joint, decoder)
    i_v_g = mutual_information(extended, v_group, decoder.output_var)
    return DpiReport(i_v_evidence=i_v_e, i_v_g=i_v_g,
                     holds=i_v_g <= i_v_e + DPI_TOL, slack=i_v_e - i_v_g)


def bayes_accuracy(joint: DiscreteJoint, v, evidence) -> float:
    """Best achievable decoder accuracy: sum over evidence of max_v p."""
    gv, ge = _as_group(v), _as_group(evidence)
    if set(gv) & set(ge):
        raise DomainMismatch(f"groups overlap: {gv!r} vs {ge!r}")
    marg = joint.marginal(*gv, *ge)
    nv = int(np.prod(marg.table.shape[:len(gv)], dtype=np.int64))
    flat = marg.table.reshape(nv, -1)
    return float(flat.max(axis=0).sum())


def decoder_accuracy(joint: DiscreteJoint, decoder: Decoder, v: str) -> float:
    """P(decoder output == v) when the decoder runs on the evidence."""
    marg = joint.marginal(v, *decoder.evidence_vars)
    v_size = marg.table.shape[0]
    if decoder.output_size != v_size:
        raise DomainMismatch(
            f"decoder output alphabet {decoder.output_size} != |{v}| = {v_size}")
    p2d = marg.table.reshape(v_size, -1)
    rows2d = decoder.rows.reshape(-1, v_size)
    return float(np.einsum("ve,ev->", p2d, rows2d))


def chance_level(joint: DiscreteJoint, v) -> float:
    """Accuracy of the best evidence-free guess: max_v p(v)."""
    gv = _as_group(v)
    return float(joint.marginal(*gv).table.max())


# ---------------------------------------------------------------------------
# world channels and privacy classification
# ---------------------------------------------------------------------------

def _regeneration_channel(dim: WorldDim, mode: str) -> np.ndarray:
    """p(v, y) by enumeration over user-value redraws.

    The user value v is uniform over K; the model emits y from the
    mixture prior built around v, either sampled (rows are the prior
    itself) or by argmax (point mass, ties to lowest index).
    """
    k = dim.k
    if k * k > CELL_CAP:
        raise WorldTooLarge(k * k, CELL_CAP)
    base = (1.0 - dim.lam) / k
    table = np.zeros((k, k))
    for u in range(k):
        prior = np.full(k, base)
        prior[u] += dim.lam
        if mode == "sample":
            table[u, :] = prior / k
        else:
            table[u, int(np.argmax(prior))] = 1.0 / k
    return table


def dimension_channel_joint(world: SyntheticWorld, task_id: str, dim_id: str,
                            mode: str = "sample") -> DiscreteJoint:
    """Joint of (v, y) for one carrier-absent dimension."""
    if mode not in ("argmax", "sample"):
        raise DomainMismatch(f"mode must be 'argmax' or 'sample', got {mode!r}")
    task = world.task(task_id)
    for dim in task.dims:
        if dim.id == dim_id:
            return DiscreteJoint(("v", "y"), _regeneration_channel(dim, mode))
    raise UnknownVariable(dim_id)


@dataclass(frozen=True)
class PrivacyVerdict:
    dimension: str
    mi_bits: float
    bayes_accuracy: float
    chance: float
    label: str  # public | private


def classify_privacy(world: SyntheticWorld, task_id: str, dim_id: str,
                     theta_pub: float = THETA_PUB_DEFAULT) -> PrivacyVerdict:
    """Operational public/private call for one dimension.

    Public means the sampled-output channel decodes the user value with
    Bayes accuracy at least theta_pub, and materially above chance
    (chance + 0.1); everything else is private. Relative to this world's
    prior, never an intrinsic property of the dimension.
    """
    if not 0.0 < theta_pub <= 1.0:
        raise RangeError(f"theta_pub = {theta_pub}, outside (0, 1]")
    joint = dimension_channel_joint(world, task_id, dim_id, mode="sample")
    acc = bayes_accuracy(joint, "v", "y")
    chance = chance_level(joint, "v")
    mi = mutual_information(joint, "v", "y")
    public = acc >= theta_pub and acc >= chance + CHANCE_FLOOR
    return PrivacyVerdict(dimension=dim_id, mi_bits=mi, bayes_accuracy=acc,
                          chance=chance, label="public" if public else "private")


def tiil_check(world: SyntheticWorld, theta_pub: float = THETA_PUB_DEFAULT,
               seed: int = 0) -> dict:
    """Run the irreversibility battery over every dimension of a world.

    For each dimension (carrier-absent throughout): classify privacy,
    then check the three decoder families against the DPI bound. For
    chance-level channels (Bayes accuracy == chance), additionally
    record that no decoder beats generic substitution.
    """
    dims_report = []
    all_hold = True
    for task in world.tasks:
        for dim in task.dims:
            joint = dimension_channel_joint(world, task.task_id, dim.id)
            verdict = classify_privacy(world, task.task_id, dim.id, theta_pub)
            decoders = [
                constant_decoder(("y",), (dim.k,), dim.k),
                random_deterministic_decoder(("y",), (dim.k,), dim.k,
                                             seed=derive(seed, task.index)),
                bayes_decoder(joint, "v", ("y",)),
            ]
            chance_level_dim = verdict.bayes_accuracy <= verdict.chance + DPI_TOL
            decoder_rows = []
            for name, dec in zip(("constant", "random_deterministic", "bayes"),
                                 decoders):
                rep = verify_dpi(joint, dec)
                extended = apply_decoder(joint, dec)
                acc = decoder_accuracy(joint, dec, "v")
                i_v_g = mutual_information(extended, "v", dec.output_var)
                beats_chance = acc > verdict.chance + DPI_TOL
                ok = rep.holds and not (chance_level_dim and
                                        (beats_chance or i_v_g > DPI_TOL))
                all_hold = all_hold and ok
                decoder_rows.append({
                    "decoder": name,
                    "dpi_holds": rep.holds,
                    "slack": rep.slack,
                    "accuracy": acc,
                    "i_v_g": i_v_g,
                    "ok": ok,
                })
            dims_report.append({
                "task_id": task.task_id,
                "dimension": dim.id,
                "lambda": dim.lam,
                "label": verdict.label,
                "mi_bits": verdict.mi_bits,
                "bayes_accuracy": verdict.bayes_accuracy,
                "chance": verdict.chance,
                "chance_level": chance_level_dim,
                "decoders": decoder_rows,
            })
    return {"theta_pub": theta_pub, "all_hold": all_hold, "dims": dims_report}
