"""Unification of touching and overlapping text-line annotations.

Heterogeneous datasets annotate lines with polygons that may touch, overlap
slightly, or overlap heavily. Rasterizing such labels (and worse, shrinking
the rasters to a network input size) merges neighbouring lines into single
blobs. This module classifies every line pair and repairs the fixable cases
on the polygons themselves, after rescaling them to the target resolution,
so the generated label image keeps one component per line:

* touching pairs are eroded inward,
* pairs overlapping by less than the threshold on both sides are split
  (the line with the smaller overlap share loses the intersection, then is
  eroded away from the cut so the rasters stay separated),
* heavier overlaps are kept untouched, since splitting them would destroy
  too much of a line.
"""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional

from . import geometry
from .geometry import Polygon
from .io_formats import PageAnnotation, TextLine
from .raster import Mask, rasterize, resize_preserving_foreground

logger = logging.getLogger(__name__)

#: Intersections below this area (px^2) do not count as real overlap.
TOUCH_AREA = 1.0
#: Boundaries closer than this (px) make a non-overlapping pair "touching".
TOUCH_DISTANCE = 1.0


class PairKind(str, enum.Enum):
    DISJOINT = "disjoint"
    TOUCHING = "touching"
    SMALL_OVERLAP = "small_overlap"
    LARGE_OVERLAP = "large_overlap"


@dataclass(frozen=True)
class NormalizationConfig:
    """Tunables of the unification pipeline.

    ``overlap_threshold`` is the per-line overlap share below which a pair
    is split (roughly the ascender/descender share of a line's height).
    ``erosion_px`` is the inward offset applied to touching pairs and to the
    losing side of a split; 0 disables erosion. ``target_long_side`` rescales
    pages so their larger dimension matches it before any pair processing;
    None keeps the original scale.
    """

    overlap_threshold: float = 0.20
    erosion_px: float = 1.0
    target_long_side: Optional[int] = 768
    simplify_to_bbox: bool = False

    def __post_init__(self):
        if not 0.0 < self.overlap_threshold < 1.0:
            raise ValueError(f"overlap_threshold must lie in (0, 1), got {self.overlap_threshold}")
        if self.erosion_px < 0.0:
            raise ValueError(f"erosion_px must be >= 0, got {self.erosion_px}")
        if self.target_long_side is not None and self.target_long_side < 16:
            raise ValueError(f"target_long_side must be >= 16, got {self.target_long_side}")


@dataclass(frozen=True)
class PairClassification:
    kind: PairKind
    ratio_a: float
    ratio_b: float


@dataclass
class PairAction:
    """Log record for one processed line pair."""

    index_a: int
    index_b: int
    kind: str
    ratio_a: float
    ratio_b: float
    action: str
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index_a": self.index_a,
            "index_b": self.index_b,
            "kind": self.kind,
            "ratio_a": self.ratio_a,
            "ratio_b": self.ratio_b,
            "action": self.action,
            "warnings": list(self.warnings),
        }


@dataclass
class NormalizationLog:
    """Everything the pipeline changed on one page."""

    page_id: str
    scale: float
    output_width: int
    output_height: int
    simplified_to_bbox: bool
    pair_actions: list[PairAction] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def modifications(self) -> int:
        return sum(1 for a in self.pair_actions if a.action in ("eroded_both", "split"))

    def to_dict(self) -> dict:
        return {
            "page_id": self.page_id,
            "scale": self.scale,
            "output_width": self.output_width,
            "output_height": self.output_height,
            "simplified_to_bbox": self.simplified_to_bbox,
            "modifications": self.modifications,
            "pair_actions": [a.to_dict() for a in self.pair_actions],
            "warnings": list(self.warnings),
        }


def classify_pair(a: Polygon, b: Polygon, cfg: NormalizationConfig) -> PairClassification:
    """Classify one line pair as disjoint, touching, or a small/large overlap.

    Overlaps smaller than 1 px^2 count as contact, not as overlap; a pair is
    "touching" when its boundaries come closer than 1 px. The overlap case
    is "small" only when the intersection is below the threshold share of
    *both* line areas.
    """
    inter = geometry.intersection_area(a, b)
    ratio_a = inter / a.area
    ratio_b = inter / b.area
    if inter < TOUCH_AREA:
        # The epsilon keeps a separation of exactly one erosion width (the
        # state the pipeline itself produces) from flapping back to
        # "touching" through float rounding.
        if geometry.polygon_distance(a, b) < TOUCH_DISTANCE - geometry.EPSILON:
            kind = PairKind.TOUCHING
        else:
            kind = PairKind.DISJOINT
    elif ratio_a < cfg.overlap_threshold and ratio_b < cfg.overlap_threshold:
        kind = PairKind.SMALL_OVERLAP
    else:
        kind = PairKind.LARGE_OVERLAP
    return PairClassification(kind=kind, ratio_a=ratio_a, ratio_b=ratio_b)


def split_pair(a: Polygon, b: Polygon) -> tuple[Polygon, Polygon]:
    """Resolve a small overlap: the line with the smaller overlap share
    loses the intersection, the other is kept as is.

    Ties go against ``b`` (the line that comes later in document order).
    If the difference splits the loser, only the largest piece survives.
    """
    inter = geometry.intersection_area(a, b)
    if inter <= geometry.EPSILON:
        raise ValueError("split_pair requires an overlapping pair")
    ratio_a = inter / a.area
    ratio_b = inter / b.area
    if ratio_a < ratio_b:
        pieces = geometry.polygon_difference(a, b)
        if not pieces:
            raise ValueError("split consumed the losing line entirely")
        return pieces[0], b
    pieces = geometry.polygon_difference(b, a)
    if not pieces:
        raise ValueError("split consumed the losing line entirely")
    return a, pieces[0]


def erode_pair(
    a: Polygon, b: Polygon, erosion_px: float
) -> tuple[Polygon, Polygon, list[str]]:
    """Erode both polygons of a touching pair inward by ``erosion_px``.

    A polygon too thin to survive the erosion is kept unmodified and the
    degradation is reported in the returned warnings (and logged), never
    dropped silently.
    """
    warnings: list[str] = []

    def _erode(p: Polygon, side: str) -> Polygon:
        shrunk = geometry.inward_offset(p, erosion_px)
        if shrunk is None:
            message = f"line {side}: erosion by {erosion_px} px would remove the line, kept as is"
            warnings.append(message)
            logger.warning(message)
            return p
        return shrunk

    return _erode(a, "a"), _erode(b, "b"), warnings


def scaled_size(width: int, height: int, target_long_side: Optional[int]) -> tuple[int, int, float]:
    """Output (width, height, scale) for a page rescaled so its longer side
    equals ``target_long_side`` (aspect ratio preserved)."""
    if target_long_side is None:
        return width, height, 1.0
    scale = target_long_side / max(width, height)
    if width >= height:
        return target_long_side, max(1, round(height * scale)), scale
    return max(1, round(width * scale)), target_long_side, scale


def normalize_page(
    page: PageAnnotation, cfg: NormalizationConfig
) -> tuple[PageAnnotation, Mask, NormalizationLog]:
    """Run the full unification pipeline on one page.

    Steps: optional bounding-box simplification, rescaling of all polygons
    to the target resolution, one pass over all line pairs in document order
    (each pair classified on the current polygon state), and rasterization
    of the result. The log records every classification that required a
    decision and every modification made.

    With ``simplify_to_bbox`` off, no polygon ever grows; lines may shrink
    but never disappear (failed erosions keep the original and warn).
    """
    out_width, out_height, scale = scaled_size(
        page.image_width, page.image_height, cfg.target_long_side
    )
    log = NormalizationLog(
        page_id=page.page_id,
        scale=scale,
        output_width=out_width,
        output_height=out_height,
        simplified_to_bbox=cfg.simplify_to_bbox,
    )

    polygons: list[Polygon] = []
    for line in page.lines:
        poly = line.polygon
        if cfg.simplify_to_bbox:
            poly = geometry.to_bounding_box(poly).as_polygon()
        if scale != 1.0:
            poly = geometry.scale_polygon(poly, scale)
        polygons.append(poly)

    for i, j in itertools.combinations(range(len(polygons)), 2):
        classification = classify_pair(polygons[i], polygons[j], cfg)
        kind = classification.kind
        if kind is PairKind.DISJOINT:
            continue
        action = PairAction(
            index_a=i,
            index_b=j,
            kind=kind.value,
            ratio_a=classification.ratio_a,
            ratio_b=classification.ratio_b,
            action="kept",
        )
        if kind is PairKind.TOUCHING and cfg.erosion_px > 0:
            polygons[i], polygons[j], warnings = erode_pair(
                polygons[i], polygons[j], cfg.erosion_px
            )
            action.action = "eroded_both"
            action.warnings.extend(warnings)
        elif kind is PairKind.SMALL_OVERLAP:
            polygons[i], polygons[j] = split_pair(polygons[i], polygons[j])
            loser = i if classification.ratio_a < classification.ratio_b else j
            # Pull the cut side back so the rasterized lines do not stay
            # pixel-adjacent (and so a second pass sees a disjoint pair).
            if cfg.erosion_px > 0:
                shrunk = geometry.inward_offset(polygons[loser], cfg.erosion_px)
                if shrunk is None:
                    message = (
                        f"line {loser}: post-split erosion would remove the line, kept unshrunk"
                    )
                    action.warnings.append(message)
                    logger.warning(message)
                else:
                    polygons[loser] = shrunk
            action.action = "split"
        log.pair_actions.append(action)

    out_lines = [
        TextLine(polygon=poly, text=line.text, confidence=line.confidence)
        for poly, line in zip(polygons, page.lines)
    ]
    out_page = PageAnnotation(
        page_id=page.page_id,
        image_width=out_width,
        image_height=out_height,
        lines=out_lines,
    )
    mask = rasterize(polygons, out_width, out_height)
    return out_page, mask, log


def naive_label_image(page: PageAnnotation, target_long_side: Optional[int]) -> Mask:
    """Label image via the lossy baseline: rasterize at the original page
    size, then shrink the raster (a target pixel is foreground if any source
    pixel it covers is). Kept for A/B comparison against normalize_page;
    close lines merge under this path."""
    full = rasterize(page.polygons, page.image_width, page.image_height)
    out_width, out_height, _ = scaled_size(page.image_width, page.image_height, target_long_side)
    return resize_preserving_foreground(full, out_width, out_height)
