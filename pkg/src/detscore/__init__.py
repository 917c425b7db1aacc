"""Detection-score evaluation, calibration and fusion.

Core pieces: immutable trial-data containers with text/binary serialization,
pool-adjacent-violators fitting and the ROC convex hull built from it,
threshold-sweep error rates and the Bayes error-rate / Cllr metric family,
a trust-region Newton optimizer driving prior-weighted logistic calibration
and fusion (optionally with quality measures), and DET / normalized Bayes
error-rate plot emission.
"""

from .errors import (
    AlignmentError,
    DegenerateInput,
    DetscoreError,
    DimensionMismatch,
    DuplicateTrial,
    EmptyInput,
    EmptySelection,
    FormatError,
    InvalidCellValue,
    NoProgressWarning,
    OracleFailure,
    OverlapError,
    ParseError,
)
from .fusion import (
    FusionModel,
    PavCalibrationMap,
    QualityPairs,
    TrainingConfig,
    apply_fusion,
    apply_pav_calibration,
    fuse_matrices,
    model_from_text,
    model_to_text,
    stack_for_key,
    train_calibration,
    train_fusion,
    train_pav_calibration,
    train_quality_fusion,
    wlr_objective,
)
from .io import (
    decode_any,
    decode_key,
    decode_scores,
    emit_text_key,
    emit_text_quality,
    emit_text_scores,
    encode_key,
    encode_scores,
    parse_text_key,
    parse_text_quality,
    parse_text_scores,
    sniff_binary,
)
from .metrics import (
    BayesError,
    CostParams,
    Dr30Markers,
    ErrorRates,
    ErrorRateSweep,
    MinBayesError,
    OperatingPoint,
    actual_bayes_error,
    bayes_threshold,
    cllr,
    default_x_grid,
    dr30_markers,
    effective_prior,
    error_rates_at,
    fast_error_rate_sweep,
    min_bayes_error,
    min_cllr,
    min_dcf,
)
from .optimize import ObjectiveOracle, TrDiagnostics, TrOptions, TrResult, minimize
from .plots import (
    DetCurve,
    NberMarkers,
    NberPlotData,
    SvgOptions,
    det_curve,
    emit_csv,
    nber_curve,
    probit,
    render_svg,
)
from .rocch import (
    PavBlocks,
    RocchCurve,
    pav_fit,
    pav_llr_blocks,
    pav_llrs,
    prbep,
    rocch,
    rocch_eer,
    uer,
)
from .synthetic import gaussian_llr, gaussian_scores
from .trials import (
    LabeledScores,
    QualityMeasures,
    ScoreMatrix,
    TrialIndex,
    TrialKey,
    TrialLabel,
    align_scores_to_key,
    filter_by_index,
    filter_by_name_lists,
    gather_scores_on_key,
    merge_scores,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "DetscoreError",
    "OverlapError",
    "EmptySelection",
    "FormatError",
    "InvalidCellValue",
    "ParseError",
    "DuplicateTrial",
    "EmptyInput",
    "DegenerateInput",
    "AlignmentError",
    "DimensionMismatch",
    "OracleFailure",
    "NoProgressWarning",
    # trial data
    "TrialLabel",
    "TrialIndex",
    "TrialKey",
    "ScoreMatrix",
    "QualityMeasures",
    "LabeledScores",
    "align_scores_to_key",
    "gather_scores_on_key",
    "merge_scores",
    "filter_by_index",
    "filter_by_name_lists",
    # io
    "encode_scores",
    "decode_scores",
    "encode_key",
    "decode_key",
    "decode_any",
    "sniff_binary",
    "parse_text_scores",
    "emit_text_scores",
    "parse_text_key",
    "emit_text_key",
    "parse_text_quality",
    "emit_text_quality",
    # pav / rocch
    "PavBlocks",
    "RocchCurve",
    "pav_fit",
    "rocch",
    "uer",
    "rocch_eer",
    "prbep",
    "pav_llr_blocks",
    "pav_llrs",
    # metrics
    "CostParams",
    "OperatingPoint",
    "ErrorRates",
    "ErrorRateSweep",
    "BayesError",
    "MinBayesError",
    "Dr30Markers",
    "effective_prior",
    "bayes_threshold",
    "error_rates_at",
    "fast_error_rate_sweep",
    "actual_bayes_error",
    "min_bayes_error",
    "min_dcf",
    "cllr",
    "min_cllr",
    "default_x_grid",
    "dr30_markers",
    # optimizer
    "ObjectiveOracle",
    "TrOptions",
    "TrDiagnostics",
    "TrResult",
    "minimize",
    # calibration / fusion
    "FusionModel",
    "PavCalibrationMap",
    "QualityPairs",
    "TrainingConfig",
    "wlr_objective",
    "train_calibration",
    "train_fusion",
    "train_quality_fusion",
    "apply_fusion",
    "train_pav_calibration",
    "apply_pav_calibration",
    "model_to_text",
    "model_from_text",
    "stack_for_key",
    "fuse_matrices",
    # plots
    "DetCurve",
    "NberMarkers",
    "NberPlotData",
    "SvgOptions",
    "det_curve",
    "nber_curve",
    "render_svg",
    "emit_csv",
    "probit",
    # synthetic
    "gaussian_scores",
    "gaussian_llr",
]
