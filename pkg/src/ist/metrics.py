"""Core metric suite: encoding loss, weighted structure/fidelity, drift.

All aggregates share one reduction (an exactly-accumulated weighted sum
over the flattened dimension order) so that identities between them
hold in floating point, not just in exact arithmetic:

* s_icmw = sum_i w_i * r_i           (structural coverage)
* f_icmw = sum_i w_i * f_i           (semantic fidelity)
* l_enc  = 1 - sum_i w_i * m_i       (encoding loss)
* d_drift = 1 - f_icmw               (the exact same float)
* ga = 1 + round(4 * s_icmw), half away from zero, clamped to [1, 5]

Split zone: ga == 5 while f_icmw < 0.8 (strict). The threshold is
configurable but 0.8 is the calibrated default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import LengthMismatch, MissingScores, RangeError, UnknownDimension
from .model import EncodingMask, FlatDimension, IntentSpec, ValueRef, flatten

SPLIT_ZONE_THRESHOLD = 0.8

# Tolerated float overshoot when clamping weighted sums back into [0, 1].
_CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class DimensionScores:
    """Per-dimension structure (r) and fidelity (f), both in [0, 1]."""

    dims: tuple[str, ...]
    r: tuple[float, ...]
    f: tuple[float, ...]

    def __post_init__(self):
        if len(self.r) != len(self.dims):
            raise LengthMismatch(len(self.dims), len(self.r), "r scores")
        if len(self.f) != len(self.dims):
            raise LengthMismatch(len(self.dims), len(self.f), "f scores")
        for name, vec in (("r", self.r), ("f", self.f)):
            for i, v in enumerate(vec):
                if not 0.0 <= v <= 1.0:
                    raise RangeError(
                        f"{name}[{i}] ({self.dims[i]}) = {v}, outside [0, 1]")


@dataclass(frozen=True)
class MetricBundle:
    """Everything the audit layer needs about one scored output.

    l_enc is None when no carrier was available to compute a mask from.
    """

    s_icmw: float
    f_icmw: float
    d_drift: float
    ga: int
    split_zone: bool
    l_enc: float | None = None


def _clamp_unit(x: float) -> float:
    if x < 0.0:
        if x < -_CLAMP_TOL:
            raise RangeError(f"weighted sum {x} below 0 beyond tolerance")
        return 0.0
    if x > 1.0:
        if x > 1.0 + _CLAMP_TOL:
            raise RangeError(f"weighted sum {x} above 1 beyond tolerance")
        return 1.0
    return x


def weighted_sum(weights, values) -> float:
    """The one reduction all metrics use: sum of w_i * v_i, clamped to [0, 1].

    fsum makes the accumulation exact (single rounding at the end), so
    the reduction is monotone per term: v <= v' pointwise implies
    weighted_sum(w, v) <= weighted_sum(w, v'), in actual floats.
    Weights that sum to exactly 1.0 give exactly 1.0 on all-ones
    values.
    """
    w = np.asarray(weights, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if w.shape != v.shape:
        raise LengthMismatch(w.shape[0], v.shape[0], "weighted values")
    return _clamp_unit(math.fsum(w * v))


def encoding_loss(weights, mask: EncodingMask) -> float:
    """Weight mass the carrier dropped: 1 - sum of encoded weights."""
    return _clamp_unit(1.0 - weighted_sum(weights, mask.bits))


def aggregate(weights, scores: DimensionScores) -> tuple[float, float]:
    """(s_icmw, f_icmw) under the shared weighting."""
    return (weighted_sum(weights, scores.r), weighted_sum(weights, scores.f))


def synthesize_ga(s_icmw: float) -> int:
    """Map structural coverage onto the 1..5 ordinal scale.

    Rounding is half away from zero (0.5 -> 1, 1.5 -> 2, ...), not
    banker's rounding, so grade boundaries sit exactly on eighths.
    """
    if not 0.0 <= s_icmw <= 1.0:
        raise RangeError(f"s_icmw = {s_icmw}, outside [0, 1]")
    grade = 1 + int(np.floor(4.0 * s_icmw + 0.5))
    return max(1, min(5, grade))


def detect_split_zone(ga: int, f_icmw: float,
                      threshold: float = SPLIT_ZONE_THRESHOLD) -> bool:
    """Structurally perfect but semantically degraded: ga 5, f below cut."""
    return ga == 5 and f_icmw < threshold


def exact_match(expected: ValueRef, realized: ValueRef) -> float:
    """Default fidelity matcher: 1.0 on exact (kind, value) equality."""
    return 1.0 if (expected.kind == realized.kind
                   and expected.value == realized.value) else 0.0


Matcher = Callable[[FlatDimension, ValueRef], float]


def score_output(spec: IntentSpec,
                 realized_values: Mapping[str, ValueRef],
                 matcher: Matcher | None = None) -> DimensionScores:
    """Score realized values against the spec's flattened dimensions.

    r_i is presence: 1 when the output realizes dimension i at all.
    f_i is the matcher's verdict on the realized value (0 when absent);
    the default matcher demands exact equality with the intended value.
    Keys not present in the spec are an error, not silently ignored.
    """
    flat = flatten(spec)
    known = {d.id for d in flat}
    for key in realized_values:
        if key.lower() not in known:
            raise UnknownDimension(key)
    lowered = {k.lower(): v for k, v in realized_values.items()}
    r, f = [], []
    for dim in flat:
        got = lowered.get(dim.id)
        if got is None:
            r.append(0.0)
            f.append(0.0)
            continue
        r.append(1.0)
        if matcher is not None:
            fv = float(matcher(dim, got))
            if not 0.0 <= fv <= 1.0:
                raise RangeError(
                    f"matcher returned {fv} for {dim.id}, outside [0, 1]")
        elif dim.intended_value is None:
            raise MissingScores(
                f"dimension {dim.id!r} has no intended value; "
                "supply a matcher to score it")
        else:
            fv = exact_match(dim.intended_value, got)
        f.append(fv)
    return DimensionScores(tuple(d.id for d in flat), tuple(r), tuple(f))


def build_bundle(weights, scores: DimensionScores,
                 mask: EncodingMask | None = None,
                 split_threshold: float = SPLIT_ZONE_THRESHOLD) -> MetricBundle:
    """Assemble the full bundle; d_drift is literally 1 - f_icmw."""
    s, fi = aggregate(weights, scores)
    ga = synthesize_ga(s)
    return MetricBundle(
        s_icmw=s,
        f_icmw=fi,
        d_drift=1.0 - fi,
        ga=ga,
        split_zone=detect_split_zone(ga, fi, split_threshold),
        l_enc=None if mask is None else encoding_loss(weights, mask),
    )


def bundle_for_output(spec: IntentSpec,
                      realized_values: Mapping[str, ValueRef],
                      mask: EncodingMask | None = None,
                      matcher: Matcher | None = None,
                      split_threshold: float = SPLIT_ZONE_THRESHOLD,
                      ) -> tuple[DimensionScores, MetricBundle]:
    """Score then aggregate in one call; returns both layers."""
    flat = flatten(spec)
    weights = [d.weight for d in flat]
    scores = score_output(spec, realized_values, matcher)
    return scores, build_bundle(weights, scores, mask, split_threshold)
