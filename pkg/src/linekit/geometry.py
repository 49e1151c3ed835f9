"""2D polygon arithmetic for text-line annotations.

Coordinates are real-valued pixels with the origin at the top-left corner
and y growing downward. Values stay continuous here; quantization to a
pixel grid happens only in the raster module.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
import shapely.geometry
import shapely.ops
from shapely.geometry.polygon import orient
from shapely.validation import make_valid

logger = logging.getLogger(__name__)

#: Area/coincidence tolerance for boolean results, in pixels. Annotation
#: coordinates are pixel-scale, so anything below this is numerical noise.
EPSILON = 1e-9

#: Mitre limit for inward offsets. Erosion is a ~1 px nudge, so long spikes
#: from near-degenerate corners are capped instead of being followed.
OFFSET_MITRE_LIMIT = 2.0


class DegeneratePolygonError(ValueError):
    """Vertices do not form a polygon with positive area."""


@dataclass(frozen=True)
class Point:
    """A 2D point in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box from min corner to max corner."""

    min: Point
    max: Point

    def __post_init__(self):
        if self.min.x > self.max.x or self.min.y > self.max.y:
            raise ValueError("bounding box min corner must not exceed max corner")

    @property
    def width(self) -> float:
        return self.max.x - self.min.x

    @property
    def height(self) -> float:
        return self.max.y - self.min.y

    def as_polygon(self) -> "Polygon":
        """The box as a 4-vertex polygon."""
        x0, y0, x1, y1 = self.min.x, self.min.y, self.max.x, self.max.y
        return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


class Polygon:
    """A simple closed polygon (implicitly closed, no holes).

    Vertex order is normalized so the shoelace area is positive. A
    self-intersecting input ring is repaired by keeping the largest lobe of
    its valid decomposition; the repair is logged rather than raised so that
    sloppy real-world annotations do not abort batch runs.
    """

    __slots__ = ("_points", "_geom")

    def __init__(self, vertices: Iterable) -> None:
        points = _as_coord_array(vertices)
        if points.shape[0] < 3 or np.unique(points, axis=0).shape[0] < 3:
            raise DegeneratePolygonError(
                f"polygon needs >= 3 distinct vertices, got {points.shape[0]}"
            )
        if not np.isfinite(points).all():
            raise ValueError("polygon vertices must be finite")
        geom = shapely.geometry.Polygon(points)
        if not geom.is_valid:
            repaired = _largest_polygon(make_valid(geom))
            if repaired is None:
                raise DegeneratePolygonError("polygon has no interior after repair")
            logger.warning(
                "repaired self-intersecting polygon (%d vertices, area %.6g -> %.6g)",
                points.shape[0], abs(geom.area), repaired.area,
            )
            geom = repaired
        geom = orient(shapely.geometry.Polygon(geom.exterior))
        if geom.area <= EPSILON:
            raise DegeneratePolygonError("polygon area is zero")
        coords = np.asarray(geom.exterior.coords, dtype=float)[:-1]
        coords.setflags(write=False)
        self._points = coords
        self._geom = geom

    @property
    def points(self) -> np.ndarray:
        """Vertices as a read-only (n, 2) float array."""
        return self._points

    @property
    def vertices(self) -> tuple[Point, ...]:
        return tuple(Point(float(x), float(y)) for x, y in self._points)

    @property
    def area(self) -> float:
        return self._geom.area

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(min_x, min_y, max_x, max_y)."""
        return self._geom.bounds

    def to_list(self) -> list[list[float]]:
        """Vertices as JSON-friendly [[x, y], ...]."""
        return [[float(x), float(y)] for x, y in self._points]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return np.array_equal(self._points, other._points)

    def __hash__(self):
        return hash(self._points.tobytes())

    def __reduce__(self):
        return (Polygon, (np.array(self._points),))

    def __repr__(self) -> str:
        return f"Polygon({self._points.shape[0]} vertices, area={self.area:.3f})"


def rectangle(x0: float, y0: float, x1: float, y1: float) -> Polygon:
    """Axis-aligned rectangle polygon from two corners."""
    return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def polygon_area(p: Polygon) -> float:
    """Shoelace area of the polygon, always >= 0."""
    return p.area


def intersection_area(a: Polygon, b: Polygon) -> float:
    """Area of the boolean intersection; 0 when disjoint or only touching."""
    return a._geom.intersection(b._geom).area


def union_area(a: Polygon, b: Polygon) -> float:
    """Area of the boolean union."""
    return a._geom.union(b._geom).area


def polygon_iou(a: Polygon, b: Polygon) -> float:
    """Intersection-over-union of two polygons, in [0, 1].

    Symmetric by construction: the operand pair is put into a canonical
    order before the boolean operations run.
    """
    a, b = _canonical_pair(a, b)
    union = union_area(a, b)
    if union <= EPSILON:
        raise DegeneratePolygonError("IoU undefined: union has zero area")
    return intersection_area(a, b) / union


def polygon_difference(a: Polygon, b: Polygon) -> list[Polygon]:
    """The region a minus b as simple polygons, largest first.

    Pieces with holes are subdivided into hole-free simple polygons, so the
    summed piece areas equal area(a) - intersection_area(a, b). An empty
    result means a was fully consumed by b; this is logged.
    """
    diff = a._geom.difference(b._geom)
    pieces = _simple_pieces(diff)
    if not pieces:
        logger.warning("polygon fully consumed by difference")
        return []
    pieces.sort(key=lambda g: g.area, reverse=True)
    return [_from_shapely(g) for g in pieces]


def inward_offset(p: Polygon, d: float) -> Optional[Polygon]:
    """Shrink the polygon by ``d`` pixels along inward normals.

    Returns None when the polygon is thinner than 2*d and nothing remains;
    callers must report that, not drop it silently. If the offset splits the
    polygon into several pieces, only the largest is kept (a ~1 px erosion
    changing topology is treated as noise).
    """
    if d <= 0:
        raise ValueError(f"offset distance must be > 0, got {d}")
    shrunk = p._geom.buffer(-d, join_style="mitre", mitre_limit=OFFSET_MITRE_LIMIT)
    largest = _largest_polygon(shrunk)
    if largest is None or largest.area <= EPSILON:
        return None
    return _from_shapely(largest)


def scale_polygon(p: Polygon, s: float) -> Polygon:
    """Multiply every vertex by ``s`` (area scales by s**2)."""
    if s <= 0:
        raise ValueError(f"scale factor must be > 0, got {s}")
    return Polygon(p.points * float(s))


def to_bounding_box(p: Polygon) -> BoundingBox:
    """Axis-aligned bounding box of the vertices."""
    min_x, min_y, max_x, max_y = p.bounds
    return BoundingBox(Point(min_x, min_y), Point(max_x, max_y))


def polygon_distance(a: Polygon, b: Polygon) -> float:
    """Minimum distance between the two polygon boundaries (0 if they meet)."""
    return a._geom.distance(b._geom)


def _as_coord_array(vertices: Iterable) -> np.ndarray:
    rows = []
    for v in vertices:
        if isinstance(v, Point):
            rows.append((v.x, v.y))
        else:
            x, y = v
            rows.append((float(x), float(y)))
    return np.asarray(rows, dtype=float).reshape(-1, 2)


def _from_shapely(geom: shapely.geometry.Polygon) -> Polygon:
    return Polygon(np.asarray(geom.exterior.coords, dtype=float)[:-1])


def _polygonal_parts(geom) -> list[shapely.geometry.Polygon]:
    if geom.is_empty:
        return []
    if isinstance(geom, shapely.geometry.Polygon):
        return [geom]
    if hasattr(geom, "geoms"):
        parts: list[shapely.geometry.Polygon] = []
        for g in geom.geoms:
            parts.extend(_polygonal_parts(g))
        return parts
    return []


def _largest_polygon(geom) -> Optional[shapely.geometry.Polygon]:
    parts = [g for g in _polygonal_parts(geom) if g.area > EPSILON]
    if not parts:
        return None
    return max(parts, key=lambda g: g.area)


def _simple_pieces(geom) -> list[shapely.geometry.Polygon]:
    """Polygonal parts of ``geom``, recursively cut until hole-free."""
    out: list[shapely.geometry.Polygon] = []
    stack = [g for g in _polygonal_parts(geom) if g.area > EPSILON]
    while stack:
        part = stack.pop()
        if not part.interiors:
            out.append(part)
            continue
        # Cut vertically through the first hole; the halves lose that hole.
        hole_x = part.interiors[0].centroid.x
        min_x, min_y, max_x, max_y = part.bounds
        cutter = shapely.geometry.LineString(
            [(hole_x, min_y - 1.0), (hole_x, max_y + 1.0)]
        )
        halves = shapely.ops.split(part, cutter)
        stack.extend(g for g in _polygonal_parts(halves) if g.area > EPSILON)
    return out


def _canonical_pair(a: Polygon, b: Polygon) -> tuple[Polygon, Polygon]:
    key_a = (a.bounds, a.points.shape[0], a.points.tobytes())
    key_b = (b.bounds, b.points.shape[0], b.points.tobytes())
    return (a, b) if key_a <= key_b else (b, a)
