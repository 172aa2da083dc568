"""Intent-signal metrics, synthetic prior worlds, and audit tooling.

The package is organized bottom-up:

* model: weighted intent specs, carriers, masks, validation, flattening
* spec_io: canonical JSON serialization and the record formats
* metrics: encoding loss, s_icmw/f_icmw/drift, GA synthesis, split zone
* worlds: finite-alphabet prior simulation with derived seeds
* infotheory: dense-enumeration entropy/MI, decoders, DPI, privacy
* experiments: ablation and weight-perturbation harnesses
* audit: per-interaction audit records and reports
* cli: the `ist` command
"""

from .errors import IstError
from .metrics import (
    DimensionScores,
    MetricBundle,
    SPLIT_ZONE_THRESHOLD,
    build_bundle,
    bundle_for_output,
    detect_split_zone,
    encoding_loss,
    score_output,
    synthesize_ga,
)
from .model import (
    Carrier,
    Dimension,
    EncodingMask,
    IntentSpec,
    ValueRef,
    flatten,
    refine_dimension,
    validate_spec,
)
from .spec_io import (
    OutputRecord,
    compute_mask,
    parse_carrier,
    parse_intent_spec,
    read_records,
    serialize_carrier,
    serialize_intent_spec,
    write_records,
)
from .worlds import (
    SyntheticWorld,
    build_world,
    expected_f_icmw,
    mc_mean_f_icmw,
    simulate_output,
)
from .infotheory import (
    Decoder,
    DiscreteJoint,
    PrivacyVerdict,
    apply_decoder,
    bayes_accuracy,
    classify_privacy,
    entropy,
    mutual_information,
    verify_dpi,
)
from .experiments import (
    AblationPlan,
    PerturbationSpec,
    encode_with_budget,
    estimate_weights_by_ablation,
    perturb_weights,
    run_ablation,
    run_weight_perturbation,
)
from .audit import (
    AuditRecord,
    AuditThresholds,
    build_audit_record,
    render_report,
    resolve_privacy_labels,
)

__version__ = "0.1.0"

__all__ = [
    "AblationPlan",
    "AuditRecord",
    "AuditThresholds",
    "Carrier",
    "Decoder",
    "Dimension",
    "DimensionScores",
    "DiscreteJoint",
    "EncodingMask",
    "IntentSpec",
    "IstError",
    "MetricBundle",
    "OutputRecord",
    "PerturbationSpec",
    "PrivacyVerdict",
    "SPLIT_ZONE_THRESHOLD",
    "SyntheticWorld",
    "ValueRef",
    "apply_decoder",
    "bayes_accuracy",
    "build_audit_record",
    "build_bundle",
    "build_world",
    "bundle_for_output",
    "classify_privacy",
    "compute_mask",
    "detect_split_zone",
    "encode_with_budget",
    "encoding_loss",
    "entropy",
    "estimate_weights_by_ablation",
    "expected_f_icmw",
    "flatten",
    "mc_mean_f_icmw",
    "mutual_information",
    "parse_carrier",
    "parse_intent_spec",
    "perturb_weights",
    "read_records",
    "refine_dimension",
    "render_report",
    "resolve_privacy_labels",
    "run_ablation",
    "run_weight_perturbation",
    "score_output",
    "serialize_carrier",
    "serialize_intent_spec",
    "simulate_output",
    "synthesize_ga",
    "validate_spec",
    "verify_dpi",
    "write_records",
]
