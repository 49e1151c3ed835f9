"""Binary masks and probability maps on the page pixel grid.

Pixel (row i, column j) covers the unit square [j, j+1) x [i, i+1); its
center sits at (j + 0.5, i + 0.5). Rasterization marks a pixel as
foreground iff its center lies inside a polygon under the even-odd rule,
which keeps boundary ownership consistent when polygons share an edge.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import cv2
import numpy as np
import shapely.geometry
import shapely.ops
from scipy import ndimage

from .geometry import EPSILON, Polygon, _largest_polygon

logger = logging.getLogger(__name__)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class Mask:
    """Binary page raster; True marks text-line foreground."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(np.asarray(self.pixels).astype(bool))
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"mask must be a 2D grid, got shape {np.shape(self.pixels)}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def foreground_count(self) -> int:
        return int(self.pixels.sum())

    @classmethod
    def blank(cls, width: int, height: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True)
class ProbabilityMap:
    """Real-valued raster of per-pixel foreground probabilities in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError(f"probability map must be a 2D grid, got shape {np.shape(self.values)}")
        if vals.min() < 0.0 or vals.max() > 1.0:
            raise ValueError("probability values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PixelConfusion:
    """Foreground pixel confusion counts between a prediction and a reference."""

    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if self.tp < 0 or self.fp < 0 or self.fn < 0:
            raise ValueError("confusion counts must be >= 0")

    def __add__(self, other: "PixelConfusion") -> "PixelConfusion":
        return PixelConfusion(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class Component:
    """One 8-connected foreground component."""

    label: int
    area: int
    coords: np.ndarray  # (k, 2) array of (row, col) pixel indices


def rasterize(polygons: Sequence[Polygon], width: int, height: int) -> Mask:
    """Draw filled polygons onto a blank canvas of the given size.

    A pixel is foreground iff its center lies inside any polygon (even-odd
    rule). Polygons entirely outside the canvas contribute nothing and are
    logged.
    """
    if width < 1 or height < 1:
        raise ValueError(f"canvas must be at least 1x1, got {width}x{height}")
    grid = np.zeros((height, width), dtype=bool)
    for idx, poly in enumerate(polygons):
        min_x, min_y, max_x, max_y = poly.bounds
        if max_x <= 0 or min_x >= width or max_y <= 0 or min_y >= height:
            logger.warning("polygon %d lies entirely outside the %dx%d canvas", idx, width, height)
            continue
        _fill_even_odd(poly.points, grid)
    return Mask(grid)


def _fill_even_odd(points: np.ndarray, grid: np.ndarray) -> None:
    """OR the even-odd fill of one polygon into ``grid`` (modified in place)."""
    height, width = grid.shape
    min_y = points[:, 1].min()
    max_y = points[:, 1].max()
    row_lo = max(0, int(np.ceil(min_y - 0.5)))
    row_hi = min(height - 1, int(np.floor(max_y - 0.5)))
    if row_lo > row_hi:
        return
    centers_y = np.arange(row_lo, row_hi + 1) + 0.5
    # Toggle bookkeeping: an edge crossing a scanline at x toggles every
    # pixel whose center is left of x. delta[r, 0] += 1 / delta[r, c] -= 1
    # encodes that prefix; cumulative sum + parity recovers the fill.
    delta = np.zeros((centers_y.size, width + 1), dtype=np.int32)
    x0 = points[:, 0]
    y0 = points[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)
    for k in range(points.shape[0]):
        if y0[k] == y1[k]:
            continue
        straddles = (y0[k] > centers_y) != (y1[k] > centers_y)
        if not straddles.any():
            continue
        rows = np.nonzero(straddles)[0]
        cross_x = x0[k] + (centers_y[rows] - y0[k]) * (x1[k] - x0[k]) / (y1[k] - y0[k])
        cols = np.clip(np.ceil(cross_x - 0.5).astype(np.int64), 0, width)
        delta[rows, 0] += 1
        np.subtract.at(delta, (rows, cols), 1)
    inside = (np.cumsum(delta[:, :width], axis=1) & 1).astype(bool)
    grid[row_lo:row_hi + 1] |= inside


def threshold(pmap: ProbabilityMap, t: float, strict: bool = True) -> Mask:
    """Binarize a probability map at threshold ``t``.

    By default a pixel is foreground iff its value is strictly greater than
    ``t``; pass strict=False for >= semantics.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    if strict:
        return Mask(pmap.values > t)
    return Mask(pmap.values >= t)


def connected_components(m: Mask) -> list[Component]:
    """8-connected foreground components, labeled in raster scan order."""
    labels, count = ndimage.label(m.pixels, structure=_EIGHT_CONNECTED)
    components = []
    for label, window in enumerate(ndimage.find_objects(labels), start=1):
        local = labels[window] == label
        coords = np.argwhere(local)
        coords[:, 0] += window[0].start
        coords[:, 1] += window[1].start
        components.append(Component(label=label, area=int(local.sum()), coords=coords))
    return components


def remove_small_components(m: Mask, min_cc: int) -> Mask:
    """Erase 8-connected components with area strictly below ``min_cc``."""
    if min_cc < 0:
        raise ValueError(f"min_cc must be >= 0, got {min_cc}")
    if min_cc == 0:
        return m
    labels, count = ndimage.label(m.pixels, structure=_EIGHT_CONNECTED)
    if count == 0:
        return m
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    keep = areas >= min_cc
    keep[0] = False
    return Mask(keep[labels])


def extract_polygons(m: Mask) -> list[Polygon]:
    """Outer boundary polygon of every 8-connected component.

    The returned polygons follow pixel edges (a single pixel yields its unit
    square), so rasterizing them reproduces the component pixels; holes are
    ignored. Order matches the component scan order.
    """
    labels, count = ndimage.label(m.pixels, structure=_EIGHT_CONNECTED)
    polygons: list[Polygon] = []
    for label, window in enumerate(ndimage.find_objects(labels), start=1):
        local = (labels[window] == label).astype(np.uint8)
        contours, _ = cv2.findContours(local, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
        contour = max(contours, key=cv2.contourArea)
        centers = contour.reshape(-1, 2).astype(float)
        centers[:, 0] += window[1].start + 0.5
        centers[:, 1] += window[0].start + 0.5
        region = _largest_polygon(_pixel_hull(centers))
        if region is None:
            logger.warning("component %d produced no outline polygon", label)
            continue
        polygons.append(Polygon(np.asarray(region.exterior.coords)[:-1]))
    return polygons


def _pixel_hull(centers: np.ndarray):
    """Grow a boundary-pixel-center trace out to the pixel edges.

    The closed boundary ring is buffered as a line so that out-and-back
    spikes (diagonally attached pixels) stay covered, then unioned with the
    repaired ring fill which covers the component interior.
    """
    buffer_kwargs = dict(cap_style="square", join_style="mitre", mitre_limit=2.0)
    if centers.shape[0] == 1:
        return shapely.geometry.Point(centers[0]).buffer(0.5, **buffer_kwargs)
    if centers.shape[0] == 2:
        return shapely.geometry.LineString(centers).buffer(0.5, **buffer_kwargs)
    ring = shapely.geometry.LineString(np.vstack([centers, centers[:1]]))
    strip = ring.buffer(0.5, **buffer_kwargs)
    fill = shapely.geometry.Polygon(centers)
    if not fill.is_valid:
        fill = fill.buffer(0)
    # Unit squares at the vertices keep 180-degree spike tips (diagonally
    # attached pixels) covered, where the mitre join would bevel through
    # the tip pixel center.
    squares = [
        shapely.geometry.box(cx - 0.5, cy - 0.5, cx + 0.5, cy + 0.5)
        for cx, cy in centers
    ]
    return shapely.ops.unary_union([strip, fill, *squares])


def pixel_confusion(pred: Mask, gt: Mask) -> PixelConfusion:
    """Count foreground TP/FP/FN pixels between equally sized masks."""
    if pred.pixels.shape != gt.pixels.shape:
        raise ValueError(
            f"mask dimensions differ: prediction {pred.width}x{pred.height}, "
            f"reference {gt.width}x{gt.height}"
        )
    tp = int(np.count_nonzero(pred.pixels & gt.pixels))
    fp = int(np.count_nonzero(pred.pixels & ~gt.pixels))
    fn = int(np.count_nonzero(~pred.pixels & gt.pixels))
    return PixelConfusion(tp=tp, fp=fp, fn=fn)


def resize_nearest(m: Mask, width: int, height: int) -> Mask:
    """Nearest-neighbor resample; preserves binary values exactly."""
    if width < 1 or height < 1:
        raise ValueError(f"target size must be at least 1x1, got {width}x{height}")
    rows = np.floor((np.arange(height) + 0.5) * m.height / height).astype(int)
    cols = np.floor((np.arange(width) + 0.5) * m.width / width).astype(int)
    rows = np.clip(rows, 0, m.height - 1)
    cols = np.clip(cols, 0, m.width - 1)
    return Mask(m.pixels[rows][:, cols])


def resize_preserving_foreground(m: Mask, width: int, height: int) -> Mask:
    """Resample so a target pixel is foreground iff any source pixel it
    covers is foreground (the lossy mask-downscaling baseline)."""
    if width < 1 or height < 1:
        raise ValueError(f"target size must be at least 1x1, got {width}x{height}")
    if (width, height) == (m.width, m.height):
        return m
    integral = np.zeros((m.height + 1, m.width + 1), dtype=np.int64)
    np.cumsum(np.cumsum(m.pixels, axis=0), axis=1, out=integral[1:, 1:])
    row_edges = np.arange(height + 1) * m.height / height
    col_edges = np.arange(width + 1) * m.width / width
    row_lo = np.floor(row_edges[:-1]).astype(int)
    row_hi = np.ceil(row_edges[1:]).astype(int)
    col_lo = np.floor(col_edges[:-1]).astype(int)
    col_hi = np.ceil(col_edges[1:]).astype(int)
    counts = (
        integral[np.ix_(row_hi, col_hi)]
        - integral[np.ix_(row_lo, col_hi)]
        - integral[np.ix_(row_hi, col_lo)]
        + integral[np.ix_(row_lo, col_lo)]
    )
    return Mask(counts > 0)
