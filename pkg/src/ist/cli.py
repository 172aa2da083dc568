"""Command-line front end.

Subcommands: validate, mask, score, audit, ablate, perturb, tiil-check,
report, demo. Results go to standard output (or --out); diagnostics go
to standard error.

Exit codes are a contract:
  0  success
  1  audit gate violated (split zone detected, or d_drift > --max-drift)
  2  input parse/validation error
  3  internal error (including oracle invariant violations, which would
     mean the math here is broken)
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .audit import (
    AuditThresholds,
    build_audit_record,
    audit_record_to_obj,
    read_audit_records,
    render_report,
    resolve_privacy_labels,
)
from .errors import BadConfig, IstError, ValidationError
from .experiments import (
    estimate_weights_by_ablation,
    parse_experiment_config,
    plan_for_world,
    report_to_obj,
    run_ablation,
    run_weight_perturbation,
)
from .infotheory import THETA_PUB_DEFAULT, tiil_check
from .metrics import bundle_for_output
from .model import flatten
from .spec_io import (
    compute_mask,
    dumps_canonical,
    mask_to_obj,
    parse_carrier,
    parse_intent_spec,
    parse_output_document,
    record_to_line,
    write_records,
)
from .worlds import load_world

PROG = "ist"


def _data_path(name: str) -> Path:
    return Path(str(resources.files("ist").joinpath("data", name)))


def _read(path) -> bytes:
    return Path(path).read_bytes()


def _write_out(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _print_err(*lines: str) -> None:
    for line in lines:
        print(line, file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    spec = parse_intent_spec(_read(args.spec), lenient=args.lenient)
    flat = flatten(spec)
    if args.format == "json":
        _write_out(args, dumps_canonical({
            "task_id": spec.task_id,
            "task_type": spec.task_type,
            "dimensions": [{"id": d.id, "weight": d.weight} for d in flat],
            "valid": True,
        }) + "\n")
    else:
        _write_out(args, f"ok: task {spec.task_id!r} ({spec.task_type}), "
                         f"{len(flat)} flattened dimensions\n")
    return 0


def cmd_mask(args) -> int:
    spec = parse_intent_spec(_read(args.spec), lenient=args.lenient)
    carrier = parse_carrier(_read(args.carrier), lenient=args.lenient)
    if carrier.task_id != spec.task_id:
        raise BadConfig(f"carrier task {carrier.task_id!r} does not match "
                        f"spec task {spec.task_id!r}")
    mask = compute_mask(spec, carrier)
    flat = flatten(spec)
    from .metrics import encoding_loss
    l_enc = encoding_loss([d.weight for d in flat], mask)
    if args.format == "json":
        _write_out(args, dumps_canonical({
            "task_id": spec.task_id,
            "mask": mask_to_obj(mask),
            "l_enc": l_enc,
        }) + "\n")
    else:
        lines = [f"{d}: {'encoded' if b else 'absent'}"
                 for d, b in zip(mask.dims, mask.bits)]
        lines.append(f"l_enc = {l_enc:.6f}")
        _write_out(args, "\n".join(lines) + "\n")
    return 0


def cmd_score(args) -> int:
    spec = parse_intent_spec(_read(args.spec), lenient=args.lenient)
    out_doc = parse_output_document(_read(args.output), lenient=args.lenient)
    if out_doc.task_id != spec.task_id:
        raise BadConfig(f"output task {out_doc.task_id!r} does not match "
                        f"spec task {spec.task_id!r}")
    mask = None
    if args.carrier:
        carrier = parse_carrier(_read(args.carrier), lenient=args.lenient)
        if carrier.task_id != spec.task_id:
            raise BadConfig(f"carrier task {carrier.task_id!r} does not match "
                            f"spec task {spec.task_id!r}")
        mask = compute_mask(spec, carrier)
    scores, bundle = bundle_for_output(spec, out_doc.realized_values, mask)
    if args.format == "json":
        flat = flatten(spec)
        _write_out(args, dumps_canonical({
            "task_id": spec.task_id,
            "s_icmw": bundle.s_icmw,
            "f_icmw": bundle.f_icmw,
            "d_drift": bundle.d_drift,
            "ga": bundle.ga,
            "split_zone": bundle.split_zone,
            "l_enc": bundle.l_enc,
            "dimensions": [
                {"id": d, "weight": fd.weight, "r": r, "f": f}
                for d, fd, r, f in zip(scores.dims, flat, scores.r, scores.f)
            ],
        }) + "\n")
    else:
        lines = [f"{d}: r={r:.3f} f={f:.3f}"
                 for d, r, f in zip(scores.dims, scores.r, scores.f)]
        lines.append(f"s_icmw = {bundle.s_icmw:.6f}")
        lines.append(f"f_icmw = {bundle.f_icmw:.6f}")
        lines.append(f"d_drift = {bundle.d_drift:.6f}")
        lines.append(f"ga = {bundle.ga}")
        lines.append(f"split_zone = {'yes' if bundle.split_zone else 'no'}")
        if bundle.l_enc is not None:
            lines.append(f"l_enc = {bundle.l_enc:.6f}")
        _write_out(args, "\n".join(lines) + "\n")
    return 0


def _gate_exit(record, max_drift: float | None) -> int:
    if record.split_zone:
        return 1
    if max_drift is not None and record.d_drift > max_drift:
        return 1
    return 0


def cmd_audit(args) -> int:
    spec = parse_intent_spec(_read(args.spec), lenient=args.lenient)
    carrier = parse_carrier(_read(args.carrier), lenient=args.lenient)
    out_doc = parse_output_document(_read(args.output), lenient=args.lenient)
    if out_doc.task_id != spec.task_id:
        raise BadConfig(f"output task {out_doc.task_id!r} does not match "
                        f"spec task {spec.task_id!r}")
    world = None
    if args.world:
        world = load_world(args.world, args.seed)
    labels, source = resolve_privacy_labels(spec, world, args.theta_pub)
    record = build_audit_record(
        spec, carrier, out_doc.realized_values,
        privacy_labels=labels, privacy_source=source,
        thresholds=AuditThresholds(r_threshold=args.r_threshold,
                                   f_threshold=args.f_threshold),
        timestamp=args.timestamp,
    )
    _write_out(args, dumps_canonical(audit_record_to_obj(record)) + "\n")
    code = _gate_exit(record, args.max_drift)
    if code:
        _print_err(f"audit gate: split_zone={record.split_zone} "
                   f"d_drift={record.d_drift:.4f}")
    return code


def cmd_ablate(args) -> int:
    if args.config:
        cfg = parse_experiment_config(_read(args.config),
                                      base_dir=Path(args.config).parent,
                                      seed=args.seed)
        world = cfg.world
        mode = args.mode or cfg.mode
        replicates = args.replicates or cfg.replicates
    else:
        world = load_world(_data_path("demo_world.json"), args.seed)
        mode = args.mode or "argmax"
        replicates = args.replicates
    plan = plan_for_world(world, mode, replicates)
    records = list(run_ablation(world, plan, jobs=args.jobs))
    summaries = {}
    for task_id in plan.task_ids:
        task_records = [r for r in records if r.task_id == task_id]
        try:
            summaries[task_id] = estimate_weights_by_ablation(task_records)
        except IstError as e:
            summaries[task_id] = None
            _print_err(f"{task_id}: weights not estimable ({e})")
    summary_text = dumps_canonical({"estimated_weights": summaries}) + "\n"
    if args.out:
        write_records(args.out, records)
        sys.stdout.write(summary_text)
    else:
        for rec in records:
            sys.stdout.write(record_to_line(rec) + "\n")
        _print_err(summary_text.rstrip("\n"))
    return 0


def cmd_perturb(args) -> int:
    if args.config:
        cfg = parse_experiment_config(_read(args.config),
                                      base_dir=Path(args.config).parent,
                                      seed=args.seed)
    else:
        default = dumps_canonical({"world_path": "perturb_grid.json"})
        cfg = parse_experiment_config(default, base_dir=_data_path(""),
                                      seed=args.seed)
    report = run_weight_perturbation(
        cfg.world, budget=cfg.budget, perturbations=cfg.perturbations,
        mode=args.mode or cfg.mode, replicates=args.replicates or cfg.replicates,
        jobs=args.jobs)
    _write_out(args, dumps_canonical(report_to_obj(report)) + "\n")
    return 0


def cmd_tiil_check(args) -> int:
    path = args.world or _data_path("demo_world.json")
    world = load_world(path, args.seed)
    result = tiil_check(world, theta_pub=args.theta_pub, seed=args.seed or 0)
    if args.format == "json":
        _write_out(args, dumps_canonical(result) + "\n")
    else:
        lines = []
        for d in result["dims"]:
            lines.append(
                f"{d['task_id']}/{d['dimension']}: lambda={d['lambda']:g} "
                f"label={d['label']} bayes={d['bayes_accuracy']:.4f} "
                f"chance={d['chance']:.4f} mi={d['mi_bits']:.6f}")
            for row in d["decoders"]:
                lines.append(
                    f"  {row['decoder']}: dpi={'ok' if row['dpi_holds'] else 'VIOLATED'} "
                    f"slack={row['slack']:.3e} acc={row['accuracy']:.4f} "
                    f"i_v_g={row['i_v_g']:.3e}")
        lines.append("all bounds hold" if result["all_hold"]
                     else "IRREVERSIBILITY BOUND VIOLATED")
        _write_out(args, "\n".join(lines) + "\n")
    if not result["all_hold"]:
        _print_err("internal error: irreversibility bound violated; "
                   "this indicates a bug in the oracle")
        return 3
    return 0


def cmd_report(args) -> int:
    records = list(read_audit_records(args.records))
    _write_out(args, render_report(records, args.format))
    return 0


def cmd_demo(args) -> int:
    spec = parse_intent_spec(_read(_data_path("report_task.json")))
    carrier = parse_carrier(_read(_data_path("report_carrier.json")))
    out_doc = parse_output_document(_read(_data_path("report_output.json")))
    labels, source = resolve_privacy_labels(spec)
    record = build_audit_record(
        spec, carrier, out_doc.realized_values,
        privacy_labels=labels, privacy_source=source,
        timestamp=args.timestamp,
    )
    _write_out(args, dumps_canonical(audit_record_to_obj(record)) + "\n")
    _print_err(
        "demo: structured report task; carrier encodes only the public "
        "dimensions (what/when/where/how_much).",
        f"demo: output fills every slot (ga={record.ga}) but private "
        f"content is generic (f_icmw={record.f_icmw:.2f}).",
        f"demo: drift {record.d_drift:.2f}, split_zone={record.split_zone}, "
        f"at risk: {', '.join(record.private_at_risk)}.",
    )
    code = _gate_exit(record, args.max_drift)
    if code:
        _print_err(f"audit gate: split_zone={record.split_zone} "
                   f"d_drift={record.d_drift:.4f}")
    return code


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="override the master seed where one applies")
    common.add_argument("--format", choices=("text", "markdown", "json"),
                        default="text", help="output format")
    common.add_argument("--lenient", action="store_true",
                        help="warn on unknown input fields instead of failing")
    common.add_argument("--out", default=None,
                        help="write the primary result to this file")

    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Intent-signal metrics, synthetic prior worlds, and audits.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common],
                       help="check an intent spec file")
    p.add_argument("spec", help="intent spec JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("mask", parents=[common],
                       help="compute the encoding mask and L_enc")
    p.add_argument("--spec", required=True)
    p.add_argument("--carrier", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("score", parents=[common],
                       help="score realized values against a spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--output", required=True, help="output document JSON")
    p.add_argument("--carrier", default=None,
                   help="optional carrier (enables l_enc)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("audit", parents=[common],
                       help="emit an audit record for one interaction")
    p.add_argument("--spec", required=True)
    p.add_argument("--carrier", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--world", default=None,
                   help="world config for oracle privacy labels")
    p.add_argument("--theta-pub", type=float, default=None)
    p.add_argument("--r-threshold", type=float, default=0.5)
    p.add_argument("--f-threshold", type=float, default=0.5)
    p.add_argument("--max-drift", type=float, default=None,
                   help="gate: exit 1 when d_drift exceeds this")
    p.add_argument("--timestamp", default=None,
                   help="fixed RFC 3339 timestamp (for reproducible output)")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("ablate", parents=[common],
                       help="run the FULL + single-dimension ablation design")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--mode", choices=("argmax", "sample"), default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("perturb", parents=[common],
                       help="run the weight-perturbation experiment")
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--mode", choices=("argmax", "sample"), default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("tiil-check", parents=[common],
                       help="verify the irreversibility bounds on a world")
    p.add_argument("--world", default=None, help="world config JSON")
    p.add_argument("--theta-pub", type=float, default=THETA_PUB_DEFAULT)
    p.set_defaults(func=cmd_tiil_check)

    p = sub.add_parser("report", parents=[common],
                       help="render an audit record batch")
    p.add_argument("--records", required=True, help="AuditRecord JSONL file")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("demo", parents=[common],
                       help="run the shipped report-task scenario end to end")
    p.add_argument("--max-drift", type=float, default=None)
    p.add_argument("--timestamp", default=None)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        _print_err("error: spec failed validation:")
        for v in e.violations:
            _print_err(f"  {v}")
        return 2
    except FileNotFoundError as e:
        _print_err(f"error: {e}")
        return 2
    except IstError as e:
        _print_err(f"error: {e}")
        return 2
    except Exception as e:  # pragma: no cover - by construction unreachable
        _print_err(f"internal error: {type(e).__name__}: {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
