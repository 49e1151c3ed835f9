"""Toolkit for unifying text-line polygon annotations and scoring line
segmentation predictions.

The package covers three evaluation tiers (pixel scores, object-level
average precision, recognition error rates), the annotation normalization
pipeline that removes touching/overlapping line labels, and the plumbing
around them (page JSON + PAGE XML ingestion, PNG masks, reports, overlays,
synthetic fixtures).
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    BoundingBox,
    DegeneratePolygonError,
    Point,
    Polygon,
    intersection_area,
    inward_offset,
    polygon_area,
    polygon_difference,
    polygon_iou,
    rectangle,
    scale_polygon,
    to_bounding_box,
)
from .io_formats import (  # noqa: F401
    DataError,
    DatasetManifest,
    EvalReport,
    PageAnnotation,
    TextLine,
    import_pagexml,
    load_manifest,
    load_pages,
    save_pages,
)
from .metrics_object import (  # noqa: F401
    APResult,
    Detection,
    Pairing,
    PRCurve,
    average_precision,
    evaluate_objects,
    pair_objects,
    pr_curve,
)
from .metrics_pixel import PixelScores, evaluate_pixel, pixel_scores  # noqa: F401
from .metrics_text import (  # noqa: F401
    CerReport,
    cer,
    cer_at_line,
    cer_at_page,
    cer_range,
    edit_distance,
    reading_order,
    wer,
)
from .normalize import (  # noqa: F401
    NormalizationConfig,
    PairClassification,
    PairKind,
    classify_pair,
    erode_pair,
    naive_label_image,
    normalize_page,
    split_pair,
)
from .raster import (  # noqa: F401
    Mask,
    PixelConfusion,
    ProbabilityMap,
    connected_components,
    extract_polygons,
    pixel_confusion,
    rasterize,
    remove_small_components,
    threshold,
)
from .report_viz import confusion_overlay, draw_polygons  # noqa: F401
from .synth import SynthSpec, generate_page, perturb  # noqa: F401
