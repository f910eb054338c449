"""Deterministic generation and evaluation of perimeter-degraded
regular-polygon sketch datasets."""

from .datagen import (
    GenerationConfig,
    ImageRecord,
    Manifest,
    assign_split,
    derive_seed,
    generate_dataset,
    load_manifest,
    plan_manifest,
    verify_dataset,
)
from .errors import (
    ConfigurationError,
    DecodeError,
    MeasurementError,
    PredictionsError,
    ValidationError,
)
from .evalmetrics import (
    MetricsReport,
    PredictionSet,
    accuracy_by_cell,
    differential_curve,
    export_report,
    load_predictions,
    topk_accuracy,
)
from .geometry import (
    DegradationSpec,
    Disk,
    Point,
    PolygonSpec,
    degradation_radius,
    edge_midpoints,
    erasure_disks,
    perimeter,
    polygon_vertices,
    sample_polygon,
)
from .raster import (
    Canvas,
    black_pixel_count,
    decode_png,
    encode_png,
    measure_degradation,
    render_polygon,
    stamp_disks,
)

__version__ = "0.1.0"

__all__ = [
    "Canvas",
    "ConfigurationError",
    "DecodeError",
    "DegradationSpec",
    "Disk",
    "GenerationConfig",
    "ImageRecord",
    "Manifest",
    "MeasurementError",
    "MetricsReport",
    "Point",
    "PolygonSpec",
    "PredictionSet",
    "PredictionsError",
    "ValidationError",
    "accuracy_by_cell",
    "assign_split",
    "black_pixel_count",
    "decode_png",
    "degradation_radius",
    "derive_seed",
    "differential_curve",
    "edge_midpoints",
    "encode_png",
    "erasure_disks",
    "export_report",
    "generate_dataset",
    "load_manifest",
    "load_predictions",
    "measure_degradation",
    "perimeter",
    "plan_manifest",
    "polygon_vertices",
    "render_polygon",
    "sample_polygon",
    "stamp_disks",
    "topk_accuracy",
    "verify_dataset",
]
