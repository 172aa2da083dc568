"""Parsing and canonical serialization for specs, carriers, and records.

File formats (all UTF-8, NaN/Infinity forbidden):

* intent spec, format_version "1"::

    {"format_version": "1", "task_id": ..., "task_type": ...,
     "dimensions": [{"id", "weight", "intended_value": {"kind", "value"},
                     "privacy_hint"?, "children"?: [...]}]}

* carrier::

    {"task_id": ..., "text"?: ..., "encoded_dimensions": [id, ...]}

* output records: JSONL, one object per line, fields exactly
  task_id, condition, model_tag, mask, realized_values, ga, s_icmw,
  f_icmw, text.

Serialization is canonical: fixed key order, floats rendered with 17
significant digits, optional fields omitted when absent. Equal values
always produce byte-identical output.

Parsing is strict by default; ``lenient=True`` downgrades unknown fields
to warnings on the ``ist.spec_io`` logger.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .errors import (
    SchemaError,
    SpecSyntaxError,
    UnknownDimension,
    ValidationError,
)
from .model import (
    Carrier,
    Dimension,
    EncodingMask,
    IntentSpec,
    TOP_WEIGHT_TOL,
    ValueRef,
    flatten,
    validate_spec,
)

log = logging.getLogger("ist.spec_io")

FORMAT_VERSION = "1"

# Renormalize top-level weights only when they are off by more than this;
# below it they are already a float-level fixpoint and must not be touched,
# or serialize/parse round trips would drift by an ulp.
_RENORM_SKIP = 1e-9


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("NaN/Infinity are forbidden in numeric fields")
    # 17 significant digits pin down a double exactly, so parse(emit(x))
    # is the identity even when the rendering is longer than repr's.
    return format(x, ".17g")


def dumps_canonical(value) -> str:
    """Serialize to canonical JSON: dict insertion order, 17-digit floats."""
    parts: list[str] = []
    _emit(value, parts)
    return "".join(parts)


def _emit(value, parts: list[str]) -> None:
    if value is None:
        parts.append("null")
    elif value is True:
        parts.append("true")
    elif value is False:
        parts.append("false")
    elif isinstance(value, int):
        parts.append(str(value))
    elif isinstance(value, float):
        parts.append(_fmt_float(value))
    elif isinstance(value, str):
        parts.append(json.dumps(value, ensure_ascii=False))
    elif isinstance(value, dict):
        parts.append("{")
        for i, (k, v) in enumerate(value.items()):
            if i:
                parts.append(",")
            parts.append(json.dumps(str(k), ensure_ascii=False))
            parts.append(":")
            _emit(v, parts)
        parts.append("}")
    elif isinstance(value, (list, tuple)):
        parts.append("[")
        for i, v in enumerate(value):
            if i:
                parts.append(",")
            _emit(v, parts)
        parts.append("]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def _reject_constant(name: str):
    raise SchemaError("$", f"forbidden JSON constant {name}")


def loads_strict(data: bytes | str):
    """json.loads that rejects NaN/Infinity and reports line/column."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        return json.loads(data, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise SpecSyntaxError(e.msg, e.lineno, e.colno) from None


# ---------------------------------------------------------------------------
# schema helpers
# ---------------------------------------------------------------------------

def _require_obj(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(path, f"expected object, got {type(value).__name__}")
    return value


def _check_keys(obj: dict, path: str, required: set, optional: set,
                lenient: bool) -> None:
    for key in required:
        if key not in obj:
            raise SchemaError(path, f"missing required field {key!r}")
    for key in obj:
        if key not in required and key not in optional:
            if lenient:
                log.warning("%s: ignoring unknown field %r", path, key)
            else:
                raise SchemaError(path, f"unknown field {key!r}")


def _get_str(obj: dict, key: str, path: str) -> str:
    v = obj[key]
    if not isinstance(v, str):
        raise SchemaError(f"{path}.{key}", "expected string")
    return v


def _get_number(obj: dict, key: str, path: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}.{key}", "expected number")
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise SchemaError(f"{path}.{key}", "NaN/Infinity forbidden")
    return v


# ---------------------------------------------------------------------------
# intent specs
# ---------------------------------------------------------------------------

def _parse_value_ref(value, path: str, lenient: bool) -> ValueRef:
    obj = _require_obj(value, path)
    _check_keys(obj, path, {"kind", "value"}, set(), lenient)
    kind = _get_str(obj, "kind", path)
    if kind not in ("token", "text"):
        raise SchemaError(f"{path}.kind", f"expected 'token' or 'text', got {kind!r}")
    return ValueRef(kind, _get_str(obj, "value", path))


def _parse_dimension(value, path: str, lenient: bool) -> Dimension:
    obj = _require_obj(value, path)
    _check_keys(obj, path, {"id", "weight"},
                {"intended_value", "privacy_hint", "children"}, lenient)
    dim_id = _get_str(obj, "id", path)
    weight = _get_number(obj, "weight", path)
    if weight < 0:
        raise SchemaError(f"{path}.weight", f"must be >= 0, got {weight}")
    intended = None
    if obj.get("intended_value") is not None:
        intended = _parse_value_ref(obj["intended_value"],
                                    f"{path}.intended_value", lenient)
    hint = None
    if obj.get("privacy_hint") is not None:
        hint = _get_str(obj, "privacy_hint", path)
        if hint not in ("public", "private", "unknown"):
            raise SchemaError(f"{path}.privacy_hint", f"bad value {hint!r}")
    children = ()
    if obj.get("children"):
        raw = obj["children"]
        if not isinstance(raw, list):
            raise SchemaError(f"{path}.children", "expected array")
        children = tuple(
            _parse_dimension(c, f"{path}.children[{i}]", lenient)
            for i, c in enumerate(raw))
    return Dimension(dim_id, weight, intended, hint, children)


def parse_intent_spec(data: bytes | str, *, lenient: bool = False) -> IntentSpec:
    """Parse and validate an intent spec document.

    Top-level weights off 1 by at most 1e-6 are renormalized silently;
    larger deviations are validation errors.
    """
    doc = loads_strict(data)
    return spec_from_obj(doc, lenient=lenient)


def spec_from_obj(doc, *, path: str = "$", lenient: bool = False) -> IntentSpec:
    obj = _require_obj(doc, path)
    _check_keys(obj, path, {"format_version", "task_id", "task_type", "dimensions"},
                set(), lenient)
    version = _get_str(obj, "format_version", path)
    if version != FORMAT_VERSION:
        raise SchemaError(f"{path}.format_version",
                          f"unsupported version {version!r}")
    raw_dims = obj["dimensions"]
    if not isinstance(raw_dims, list):
        raise SchemaError(f"{path}.dimensions", "expected array")
    dims = [
        _parse_dimension(d, f"{path}.dimensions[{i}]", lenient)
        for i, d in enumerate(raw_dims)
    ]
    dims = _renormalize_top(dims)
    spec = IntentSpec(
        task_id=_get_str(obj, "task_id", path),
        task_type=_get_str(obj, "task_type", path),
        dimensions=tuple(dims),
    )
    report = validate_spec(spec)
    if report:
        raise ValidationError(report)
    return spec


def _renormalize_top(dims: list[Dimension]) -> list[Dimension]:
    total = math.fsum(d.weight for d in dims)
    if not dims or total <= 0:
        return dims  # validate_spec reports the real problem
    if abs(total - 1.0) <= _RENORM_SKIP or abs(total - 1.0) > TOP_WEIGHT_TOL:
        return dims
    from dataclasses import replace
    return [replace(d, weight=d.weight / total) for d in dims]


def _value_ref_obj(v: ValueRef) -> dict:
    return {"kind": v.kind, "value": v.value}


def _dimension_obj(dim: Dimension) -> dict:
    out: dict = {"id": dim.id, "weight": float(dim.weight)}
    if dim.intended_value is not None:
        out["intended_value"] = _value_ref_obj(dim.intended_value)
    if dim.privacy_hint is not None:
        out["privacy_hint"] = dim.privacy_hint
    if dim.children:
        out["children"] = [_dimension_obj(c) for c in dim.children]
    return out


def spec_to_obj(spec: IntentSpec) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "task_id": spec.task_id,
        "task_type": spec.task_type,
        "dimensions": [_dimension_obj(d) for d in spec.dimensions],
    }


def serialize_intent_spec(spec: IntentSpec) -> bytes:
    """Canonical bytes; parse(serialize(spec)) reproduces spec exactly."""
    report = validate_spec(spec)
    if report:
        raise ValidationError(report)
    return (dumps_canonical(spec_to_obj(spec)) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# carriers
# ---------------------------------------------------------------------------

def parse_carrier(data: bytes | str, *, lenient: bool = False) -> Carrier:
    doc = loads_strict(data)
    return carrier_from_obj(doc, lenient=lenient)


def carrier_from_obj(doc, *, path: str = "$", lenient: bool = False) -> Carrier:
    obj = _require_obj(doc, path)
    _check_keys(obj, path, {"task_id", "encoded_dimensions"}, {"text"}, lenient)
    raw = obj["encoded_dimensions"]
    if not isinstance(raw, list):
        raise SchemaError(f"{path}.encoded_dimensions", "expected array")
    ids = []
    for i, item in enumerate(raw):
        if not isinstance(item, str):
            raise SchemaError(f"{path}.encoded_dimensions[{i}]", "expected string")
        ids.append(item)
    text = None
    if obj.get("text") is not None:
        text = _get_str(obj, "text", path)
    return Carrier(task_id=_get_str(obj, "task_id", path),
                   encoded_dimensions=frozenset(ids), text=text)


def carrier_to_obj(carrier: Carrier) -> dict:
    out: dict = {"task_id": carrier.task_id}
    if carrier.text is not None:
        out["text"] = carrier.text
    out["encoded_dimensions"] = sorted(carrier.encoded_dimensions)
    return out


def serialize_carrier(carrier: Carrier) -> bytes:
    return (dumps_canonical(carrier_to_obj(carrier)) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# masks
# ---------------------------------------------------------------------------

def compute_mask(spec: IntentSpec, carrier: Carrier) -> EncodingMask:
    """Bit per flattened dimension: 1 exactly when the carrier encodes it."""
    flat = flatten(spec)
    ids = [f.id for f in flat]
    known = set(ids)
    for dim_id in carrier.encoded_dimensions:
        if dim_id not in known:
            raise UnknownDimension(dim_id)
    return EncodingMask(tuple(ids),
                        tuple(1 if i in carrier.encoded_dimensions else 0
                              for i in ids))


def mask_to_obj(mask: EncodingMask) -> list:
    return [{"dimension": d, "m": b} for d, b in zip(mask.dims, mask.bits)]


def mask_from_obj(value, path: str, lenient: bool = False) -> EncodingMask:
    if not isinstance(value, list):
        raise SchemaError(path, "expected array")
    dims, bits = [], []
    for i, item in enumerate(value):
        obj = _require_obj(item, f"{path}[{i}]")
        _check_keys(obj, f"{path}[{i}]", {"dimension", "m"}, set(), lenient)
        dims.append(_get_str(obj, "dimension", f"{path}[{i}]"))
        m = obj["m"]
        if m not in (0, 1) or isinstance(m, bool):
            raise SchemaError(f"{path}[{i}].m", f"expected 0 or 1, got {m!r}")
        bits.append(int(m))
    return EncodingMask(tuple(dims), tuple(bits))


# ---------------------------------------------------------------------------
# output records (JSONL)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutputRecord:
    """One scored model output under a named condition."""

    task_id: str
    condition: str
    model_tag: str
    mask: EncodingMask
    realized_values: dict[str, ValueRef]
    ga: int
    s_icmw: float
    f_icmw: float
    text: str | None = None


def record_to_obj(rec: OutputRecord) -> dict:
    out: dict = {
        "task_id": rec.task_id,
        "condition": rec.condition,
        "model_tag": rec.model_tag,
        "mask": mask_to_obj(rec.mask),
        "realized_values": {k: _value_ref_obj(v)
                            for k, v in rec.realized_values.items()},
        "ga": int(rec.ga),
        "s_icmw": float(rec.s_icmw),
        "f_icmw": float(rec.f_icmw),
    }
    if rec.text is not None:
        out["text"] = rec.text
    return out


def record_from_obj(doc, *, path: str = "$", lenient: bool = False) -> OutputRecord:
    obj = _require_obj(doc, path)
    _check_keys(obj, path,
                {"task_id", "condition", "model_tag", "mask",
                 "realized_values", "ga", "s_icmw", "f_icmw"},
                {"text"}, lenient)
    ga = obj["ga"]
    if isinstance(ga, bool) or not isinstance(ga, int):
        raise SchemaError(f"{path}.ga", "expected integer")
    if not 1 <= ga <= 5:
        raise SchemaError(f"{path}.ga", f"must be in 1..5, got {ga}")
    scores = {}
    for key in ("s_icmw", "f_icmw"):
        v = _get_number(obj, key, path)
        if not 0.0 <= v <= 1.0:
            raise SchemaError(f"{path}.{key}", f"must be in [0, 1], got {v}")
        scores[key] = v
    raw_values = _require_obj(obj["realized_values"], f"{path}.realized_values")
    realized = {
        k: _parse_value_ref(v, f"{path}.realized_values.{k}", lenient)
        for k, v in raw_values.items()
    }
    text = None
    if obj.get("text") is not None:
        text = _get_str(obj, "text", path)
    return OutputRecord(
        task_id=_get_str(obj, "task_id", path),
        condition=_get_str(obj, "condition", path),
        model_tag=_get_str(obj, "model_tag", path),
        mask=mask_from_obj(obj["mask"], f"{path}.mask", lenient),
        realized_values=realized,
        ga=ga,
        s_icmw=scores["s_icmw"],
        f_icmw=scores["f_icmw"],
        text=text,
    )


def record_to_line(rec: OutputRecord) -> str:
    return dumps_canonical(record_to_obj(rec))


def write_records(path, records: Iterable[OutputRecord]) -> int:
    """Write records as JSONL; returns the number written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_line(rec))
            fh.write("\n")
            n += 1
    return n


def read_records(path, *, fail_fast: bool = False, lenient: bool = False,
                 on_error: Callable[[SchemaError], None] | None = None,
                 ) -> Iterator[OutputRecord]:
    """Stream records from a JSONL file (constant memory in record count).

    Malformed lines raise a SchemaError naming the line number. With
    ``on_error`` given and ``fail_fast`` false, errors are reported to the
    callback and reading continues.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                try:
                    doc = json.loads(line, parse_constant=_reject_constant)
                except json.JSONDecodeError as e:
                    raise SchemaError("$", f"invalid JSON: {e.msg}", line=lineno) from None
                except SchemaError as e:
                    raise SchemaError(e.path, e.reason, line=lineno) from None
                try:
                    yield record_from_obj(doc, lenient=lenient)
                except SchemaError as e:
                    raise SchemaError(e.path, e.reason, line=lineno) from None
            except SchemaError as err:
                if on_error is not None and not fail_fast:
                    on_error(err)
                    continue
                raise


# ---------------------------------------------------------------------------
# output documents (realized values for one task)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutputDocument:
    task_id: str
    realized_values: dict[str, ValueRef]
    text: str | None = None


def parse_output_document(data: bytes | str, *, lenient: bool = False) -> OutputDocument:
    doc = loads_strict(data)
    obj = _require_obj(doc, "$")
    _check_keys(obj, "$", {"task_id", "realized_values"}, {"text"}, lenient)
    raw = _require_obj(obj["realized_values"], "$.realized_values")
    realized = {
        k: _parse_value_ref(v, f"$.realized_values.{k}", lenient)
        for k, v in raw.items()
    }
    text = None
    if obj.get("text") is not None:
        text = _get_str(obj, "text", "$")
    return OutputDocument(task_id=_get_str(obj, "task_id", "$"),
                          realized_values=realized, text=text)


def output_document_to_obj(doc: OutputDocument) -> dict:
    out: dict = {
        "task_id": doc.task_id,
        "realized_values": {k: _value_ref_obj(v)
                            for k, v in doc.realized_values.items()},
    }
    if doc.text is not None:
        out["text"] = doc.text
    return out


# ---------------------------------------------------------------------------
# bundled documents
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpecDocument:
    """A spec file optionally bundling its carrier and prior outputs."""

    format_version: str
    spec: IntentSpec
    carrier: Carrier | None = None
    outputs: tuple[OutputRecord, ...] = ()


def parse_spec_document(data: bytes | str, *, lenient: bool = False) -> SpecDocument:
    doc = loads_strict(data)
    obj = _require_obj(doc, "$")
    spec_obj = {k: v for k, v in obj.items() if k not in ("carrier", "outputs")}
    spec = spec_from_obj(spec_obj, lenient=lenient)
    carrier = None
    if obj.get("carrier") is not None:
        carrier = carrier_from_obj(obj["carrier"], path="$.carrier", lenient=lenient)
    outputs = ()
    if obj.get("outputs") is not None:
        raw = obj["outputs"]
        if not isinstance(raw, list):
            raise SchemaError("$.outputs", "expected array")
        outputs = tuple(record_from_obj(r, path=f"$.outputs[{i}]", lenient=lenient)
                        for i, r in enumerate(raw))
    return SpecDocument(FORMAT_VERSION, spec, carrier, outputs)


def read_file(path) -> bytes:
    return Path(path).read_bytes()
