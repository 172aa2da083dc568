"""Per-interaction audit records and report rendering.

An audit record answers, for one (spec, carrier, output) triple: which
dimensions were explicitly encoded, which were absent, which absent ones
are believed private (and therefore unrecoverable in principle), which
slots the output structurally filled, which survived with fidelity, and
what the drift score is.

Privacy labels resolve in priority order: explicit hints in the spec,
then oracle verdicts when a prior world is supplied, else "unlabeled".
An unlabeled record has an empty private_at_risk list; absence of
knowledge is reported as absence of knowledge, never guessed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Iterator, Mapping

from .errors import Inconsistent, SchemaError
from .metrics import (
    DimensionScores,
    Matcher,
    SPLIT_ZONE_THRESHOLD,
    build_bundle,
    score_output,
)
from .model import Carrier, IntentSpec, ValueRef, flatten
from .spec_io import (
    _check_keys,
    _get_number,
    _get_str,
    _reject_constant,
    _require_obj,
    compute_mask,
    dumps_canonical,
)

PRIVACY_SOURCES = ("hint", "oracle", "unlabeled")


@dataclass(frozen=True)
class AuditThresholds:
    r_threshold: float = 0.5
    f_threshold: float = 0.5
    split_threshold: float = SPLIT_ZONE_THRESHOLD


@dataclass(frozen=True)
class AuditRecord:
    task_id: str
    timestamp: str  # RFC 3339, UTC
    encoded_dims: tuple[str, ...]
    absent_dims: tuple[str, ...]
    private_at_risk: tuple[str, ...]
    structurally_recovered: tuple[str, ...]
    fidelity_preserved: tuple[str, ...]
    l_enc: float
    s_icmw: float
    f_icmw: float
    d_drift: float
    ga: int
    split_zone: bool
    privacy_source: str  # hint | oracle | unlabeled


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def resolve_privacy_labels(spec: IntentSpec, world=None,
                           theta_pub: float | None = None,
                           ) -> tuple[dict[str, str | None], str]:
    """(labels, source) for the spec's flattened dimensions.

    Hints win when any dimension carries one; dimensions without a hint
    (or hinted "unknown") stay None and never count as at risk. With no
    hints and a world given, every dimension gets an oracle verdict.
    """
    flat = flatten(spec)
    hinted = {d.id: d.privacy_hint for d in flat
              if d.privacy_hint in ("public", "private")}
    if hinted:
        return {d.id: hinted.get(d.id) for d in flat}, "hint"
    if world is not None:
        from .infotheory import THETA_PUB_DEFAULT, classify_privacy
        theta = THETA_PUB_DEFAULT if theta_pub is None else theta_pub
        labels = {d.id: classify_privacy(world, spec.task_id, d.id, theta).label
                  for d in flat}
        return labels, "oracle"
    return {d.id: None for d in flat}, "unlabeled"


def build_audit_record(spec: IntentSpec,
                       carrier: Carrier,
                       realized_values: Mapping[str, ValueRef],
                       privacy_labels: Mapping[str, str | None] | None = None,
                       privacy_source: str = "unlabeled",
                       thresholds: AuditThresholds = AuditThresholds(),
                       timestamp: str | None = None,
                       clock: Callable[[], str] = now_rfc3339,
                       matcher: Matcher | None = None) -> AuditRecord:
    """Assemble one audit record; deterministic given an explicit timestamp."""
    if carrier.task_id != spec.task_id:
        raise Inconsistent(
            f"carrier is for task {carrier.task_id!r}, spec for {spec.task_id!r}")
    if privacy_source not in PRIVACY_SOURCES:
        raise Inconsistent(f"bad privacy_source {privacy_source!r}")
    if privacy_labels is None:
        privacy_labels, privacy_source = resolve_privacy_labels(spec)
    flat = flatten(spec)
    known = {d.id for d in flat}
    for dim_id in privacy_labels:
        if dim_id not in known:
            raise Inconsistent(f"privacy label for unknown dimension {dim_id!r}")
    mask = compute_mask(spec, carrier)
    scores = score_output(spec, realized_values, matcher)
    bundle = build_bundle([d.weight for d in flat], scores, mask,
                          thresholds.split_threshold)
    encoded = tuple(d for d, b in zip(mask.dims, mask.bits) if b == 1)
    absent = tuple(d for d, b in zip(mask.dims, mask.bits) if b == 0)
    at_risk = tuple(d for d in absent if privacy_labels.get(d) == "private")
    recovered = tuple(d for d, r in zip(scores.dims, scores.r)
                      if r >= thresholds.r_threshold)
    preserved = tuple(d for d, f in zip(scores.dims, scores.f)
                      if f >= thresholds.f_threshold)
    return AuditRecord(
        task_id=spec.task_id,
        timestamp=timestamp if timestamp is not None else clock(),
        encoded_dims=encoded,
        absent_dims=absent,
        private_at_risk=at_risk,
        structurally_recovered=recovered,
        fidelity_preserved=preserved,
        l_enc=bundle.l_enc,
        s_icmw=bundle.s_icmw,
        f_icmw=bundle.f_icmw,
        d_drift=bundle.d_drift,
        ga=bundle.ga,
        split_zone=bundle.split_zone,
        privacy_source=privacy_source,
    )


# ---------------------------------------------------------------------------
# JSONL serde
# ---------------------------------------------------------------------------

def audit_record_to_obj(rec: AuditRecord) -> dict:
    return {
        "task_id": rec.task_id,
        "timestamp": rec.timestamp,
        "encoded_dims": list(rec.encoded_dims),
        "absent_dims": list(rec.absent_dims),
        "private_at_risk": list(rec.private_at_risk),
        "structurally_recovered": list(rec.structurally_recovered),
        "fidelity_preserved": list(rec.fidelity_preserved),
        "l_enc": float(rec.l_enc),
        "s_icmw": float(rec.s_icmw),
        "f_icmw": float(rec.f_icmw),
        "d_drift": float(rec.d_drift),
        "ga": int(rec.ga),
        "split_zone": bool(rec.split_zone),
        "privacy_source": rec.privacy_source,
    }


def _get_str_list(obj: dict, key: str, path: str) -> tuple[str, ...]:
    v = obj[key]
    if not isinstance(v, list) or any(not isinstance(x, str) for x in v):
        raise SchemaError(f"{path}.{key}", "expected array of strings")
    return tuple(v)


def audit_record_from_obj(doc, *, path: str = "$") -> AuditRecord:
    obj = _require_obj(doc, path)
    _check_keys(obj, path,
                {"task_id", "timestamp", "encoded_dims", "absent_dims",
                 "private_at_risk", "structurally_recovered",
                 "fidelity_preserved", "l_enc", "s_icmw", "f_icmw",
                 "d_drift", "ga", "split_zone", "privacy_source"},
                set(), False)
    ga = obj["ga"]
    if isinstance(ga, bool) or not isinstance(ga, int) or not 1 <= ga <= 5:
        raise SchemaError(f"{path}.ga", f"expected integer in 1..5, got {ga!r}")
    split = obj["split_zone"]
    if not isinstance(split, bool):
        raise SchemaError(f"{path}.split_zone", "expected boolean")
    source = _get_str(obj, "privacy_source", path)
    if source not in PRIVACY_SOURCES:
        raise SchemaError(f"{path}.privacy_source", f"bad value {source!r}")
    nums = {}
    for key in ("l_enc", "s_icmw", "f_icmw", "d_drift"):
        v = _get_number(obj, key, path)
        if not 0.0 <= v <= 1.0:
            raise SchemaError(f"{path}.{key}", f"must be in [0, 1], got {v}")
        nums[key] = v
    rec = AuditRecord(
        task_id=_get_str(obj, "task_id", path),
        timestamp=_get_str(obj, "timestamp", path),
        encoded_dims=_get_str_list(obj, "encoded_dims", path),
        absent_dims=_get_str_list(obj, "absent_dims", path),
        private_at_risk=_get_str_list(obj, "private_at_risk", path),
        structurally_recovered=_get_str_list(obj, "structurally_recovered", path),
        fidelity_preserved=_get_str_list(obj, "fidelity_preserved", path),
        ga=ga,
        split_zone=split,
        privacy_source=source,
        **nums,
    )
    if set(rec.encoded_dims) & set(rec.absent_dims):
        raise SchemaError(path, "encoded_dims and absent_dims overlap")
    if not set(rec.private_at_risk) <= set(rec.absent_dims):
        raise SchemaError(path, "private_at_risk not a subset of absent_dims")
    # exact on records we emit; one-ulp slack for hand-written files
    if abs(rec.d_drift - (1.0 - rec.f_icmw)) > 1e-12:
        raise SchemaError(
            path, f"d_drift {rec.d_drift!r} is not 1 - f_icmw ({rec.f_icmw!r})")
    return rec


def write_audit_records(path, records: Iterable[AuditRecord]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps_canonical(audit_record_to_obj(rec)))
            fh.write("\n")
            n += 1
    return n


def read_audit_records(path) -> Iterator[AuditRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line, parse_constant=_reject_constant)
            except json.JSONDecodeError as e:
                raise SchemaError("$", f"invalid JSON: {e.msg}", line=lineno) from None
            except SchemaError as e:
                raise SchemaError(e.path, e.reason, line=lineno) from None
            try:
                yield audit_record_from_obj(doc)
            except SchemaError as e:
                raise SchemaError(e.path, e.reason, line=lineno) from None


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Aggregate:
    n_records: int
    split_zone_count: int
    split_zone_rate: float | None
    mean_drift: float | None
    at_risk_counts: tuple[tuple[str, int], ...] = field(default_factory=tuple)


def aggregate_records(records: list[AuditRecord]) -> Aggregate:
    n = len(records)
    if n == 0:
        return Aggregate(0, 0, None, None, ())
    flagged = sum(1 for r in records if r.split_zone)
    drift = sum(r.d_drift for r in records) / n
    counts: dict[str, int] = {}
    for r in records:
        for d in r.private_at_risk:
            counts[d] = counts.get(d, 0) + 1
    return Aggregate(
        n_records=n,
        split_zone_count=flagged,
        split_zone_rate=flagged / n,
        mean_drift=drift,
        at_risk_counts=tuple(sorted(counts.items())),
    )


def _fmt_rate(x: float | None) -> str:
    return "n/a" if x is None else format(x, ".4f")


def render_report(records: Iterable[AuditRecord], fmt: str = "text") -> str:
    """Render an audit batch; identical inputs give identical bytes."""
    recs = list(records)
    agg = aggregate_records(recs)
    if fmt == "json":
        return dumps_canonical({
            "records": [audit_record_to_obj(r) for r in recs],
            "aggregate": {
                "n_records": agg.n_records,
                "split_zone_count": agg.split_zone_count,
                "split_zone_rate": agg.split_zone_rate,
                "mean_drift": agg.mean_drift,
                "at_risk_counts": {d: c for d, c in agg.at_risk_counts},
            },
        }) + "\n"
    if fmt == "markdown":
        return _render_markdown(recs, agg)
    if fmt == "text":
        return _render_text(recs, agg)
    raise ValueError(f"unknown report format {fmt!r}")


def _record_lines(i: int, r: AuditRecord) -> list[str]:
    flag = "  [SPLIT ZONE]" if r.split_zone else ""
    return [
        f"record {i}: task {r.task_id} at {r.timestamp}{flag}",
        f"  encoded:   {', '.join(r.encoded_dims) or '(none)'}",
        f"  absent:    {', '.join(r.absent_dims) or '(none)'}",
        f"  at risk:   {', '.join(r.private_at_risk) or '(none)'}"
        f"  (privacy via {r.privacy_source})",
        f"  recovered: {', '.join(r.structurally_recovered) or '(none)'}",
        f"  preserved: {', '.join(r.fidelity_preserved) or '(none)'}",
        f"  l_enc={r.l_enc:.4f} s_icmw={r.s_icmw:.4f} f_icmw={r.f_icmw:.4f}"
        f" d_drift={r.d_drift:.4f} ga={r.ga}",
    ]


def _render_text(recs: list[AuditRecord], agg: Aggregate) -> str:
    lines = ["intent audit report", "===================="]
    for i, r in enumerate(recs, start=1):
        lines.append("")
        lines.extend(_record_lines(i, r))
    lines.extend([
        "",
        f"records:         {agg.n_records}",
        f"split-zone rate: {_fmt_rate(agg.split_zone_rate)}"
        + (f" ({agg.split_zone_count}/{agg.n_records})" if agg.n_records else ""),
        f"mean drift:      {_fmt_rate(agg.mean_drift)}",
    ])
    if agg.at_risk_counts:
        lines.append("at-risk dimensions:")
        for d, c in agg.at_risk_counts:
            lines.append(f"  {d}: {c}/{agg.n_records}")
    else:
        lines.append("at-risk dimensions: n/a")
    return "\n".join(lines) + "\n"


def _render_markdown(recs: list[AuditRecord], agg: Aggregate) -> str:
    lines = ["# Intent audit report", ""]
    if recs:
        lines.append("| # | task | ga | s_icmw | f_icmw | d_drift | l_enc "
                     "| split zone | at risk |")
        lines.append("|---|------|----|--------|--------|---------|-------"
                     "|------------|---------|")
        for i, r in enumerate(recs, start=1):
            risk = ", ".join(r.private_at_risk) or "-"
            lines.append(
                f"| {i} | {r.task_id} | {r.ga} | {r.s_icmw:.4f} "
                f"| {r.f_icmw:.4f} | {r.d_drift:.4f} | {r.l_enc:.4f} "
                f"| {'yes' if r.split_zone else 'no'} | {risk} |")
        lines.append("")
    lines.append(f"- records: {agg.n_records}")
    lines.append(f"- split-zone rate: {_fmt_rate(agg.split_zone_rate)}")
    lines.append(f"- mean drift: {_fmt_rate(agg.mean_drift)}")
    if agg.at_risk_counts:
        risk = ", ".join(f"{d} ({c}/{agg.n_records})"
                         for d, c in agg.at_risk_counts)
        lines.append(f"- at-risk dimensions: {risk}")
    else:
        lines.append("- at-risk dimensions: n/a")
    return "\n".join(lines) + "\n"
