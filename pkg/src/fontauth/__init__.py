"""Detect characters printed in a font other than the document's standard one.

The pipeline: render glyphs from vector fonts into small grayscale
bitmaps (`synthgen`), train compact convolutional classifiers on them
(`nncore`, `classifier`), measure sensitivity and specificity with
per-character-class breakdowns (`metrics`), and combine a plain
character reader with the authenticity classifier into a field-level
verdict (`verdict`). The `fontauth` console script exposes each stage.
"""

__version__ = "1.0.0"

from .classifier import (
    ClassifierKind,
    LabelCodec,
    Prediction,
    TrainedModel,
    build_network,
    decode_output,
    load_model,
    predict,
    predict_batch,
    train,
)
from .errors import (
    ChecksumError,
    CodecError,
    ConfigError,
    EmptyFontSet,
    FontAuthError,
    FontLoadError,
    FormatError,
    MetricError,
    MissingGlyph,
    ShapeError,
    TrainingDiverged,
)
from .metrics import (
    BinaryCounts,
    EvalReport,
    ModifiedConfusionMatrix,
    ResultType,
    classify_result_type,
    evaluate,
    exclusion_sensitivity,
    force_forged_sensitivity,
    format_percent,
    load_report,
    rank_font_miss_rates,
    save_report,
)
from .nncore import TrainConfig
from .synthgen import (
    AugmentationConfig,
    Dataset,
    FontAsset,
    FontRegistry,
    GlyphSample,
    RenderConfig,
    load_dataset,
    load_registry,
    render_glyph,
    save_dataset,
    synthesize_dataset,
    synthesize_role_dataset,
)
from .verdict import (
    FieldVerdict,
    SymbolAssessment,
    assess_field,
    assess_symbol,
    build_reliability_table,
    field_verdict,
    low_recall_classes,
)

__all__ = [
    "__version__",
    # classifier
    "ClassifierKind", "LabelCodec", "Prediction", "TrainedModel", "build_network",
    "decode_output", "load_model", "predict", "predict_batch", "train",
    # errors
    "FontAuthError", "ConfigError", "FontLoadError", "MissingGlyph", "EmptyFontSet",
    "FormatError", "ChecksumError", "ShapeError", "CodecError", "TrainingDiverged",
    "MetricError",
    # metrics
    "BinaryCounts", "EvalReport", "ModifiedConfusionMatrix", "ResultType",
    "classify_result_type", "evaluate", "exclusion_sensitivity",
    "force_forged_sensitivity", "format_percent", "load_report",
    "rank_font_miss_rates", "save_report",
    # nncore
    "TrainConfig",
    # synthgen
    "AugmentationConfig", "Dataset", "FontAsset", "FontRegistry", "GlyphSample",
    "RenderConfig", "load_dataset", "load_registry", "render_glyph", "save_dataset",
    "synthesize_dataset", "synthesize_role_dataset",
    # verdict
    "FieldVerdict", "SymbolAssessment", "assess_field", "assess_symbol",
    "build_reliability_table", "field_verdict", "low_recall_classes",
]
