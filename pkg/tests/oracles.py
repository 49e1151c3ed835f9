"""Independent oracles for the test suite.

Everything here is deliberately written from first principles (textbook
formulations, plain loops) so it shares no code path with the package
implementations it cross-checks.
"""
from __future__ import annotations

import numpy as np


def point_in_polygon(x: float, y: float, pts) -> bool:
    """Even-odd crossing test for a single point."""
    inside = False
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        if (y0 > y) != (y1 > y):
            cross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if x < cross:
                inside = not inside
    return inside


def _row_intervals(pts, y: float) -> list[tuple[float, float]]:
    """Sorted inside-intervals of a polygon along the horizontal line at y."""
    xs = []
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        if (y0 > y) != (y1 > y):
            xs.append(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
    xs.sort()
    return list(zip(xs[0::2], xs[1::2]))


def rasterized_pair_counts(pts_a, pts_b, cells: int = 4096) -> dict[str, float]:
    """Areas of a, b, intersection and union measured by counting cell
    centers on a cells x cells grid over the joint bounding box."""
    pts_a = np.asarray(pts_a, dtype=float)
    pts_b = np.asarray(pts_b, dtype=float)
    stacked = np.vstack([pts_a, pts_b])
    min_x, min_y = stacked.min(axis=0) - 1e-9
    max_x, max_y = stacked.max(axis=0) + 1e-9
    res_x = (max_x - min_x) / cells
    res_y = (max_y - min_y) / cells

    def centers_before(x: float) -> int:
        return int(np.clip(np.ceil((x - min_x) / res_x - 0.5), 0, cells))

    count_a = count_b = count_i = 0
    for row in range(cells):
        y = min_y + (row + 0.5) * res_y
        spans_a = _row_intervals(pts_a, y)
        spans_b = _row_intervals(pts_b, y)
        for lo, hi in spans_a:
            count_a += centers_before(hi) - centers_before(lo)
        for lo, hi in spans_b:
            count_b += centers_before(hi) - centers_before(lo)
        for lo_a, hi_a in spans_a:
            for lo_b, hi_b in spans_b:
                lo = max(lo_a, lo_b)
                hi = min(hi_a, hi_b)
                if hi > lo:
                    count_i += centers_before(hi) - centers_before(lo)
    cell_area = res_x * res_y
    return {
        "a": count_a * cell_area,
        "b": count_b * cell_area,
        "intersection": count_i * cell_area,
        "union": (count_a + count_b - count_i) * cell_area,
    }


def random_star_polygon(rng: np.random.RandomState, center, radius_low=15.0, radius_high=45.0,
                        min_vertices=5, max_vertices=12) -> np.ndarray:
    """Random simple (star-shaped) polygon around a center point."""
    n = rng.randint(min_vertices, max_vertices + 1)
    angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, n))
    radii = rng.uniform(radius_low, radius_high, n)
    cx, cy = center
    return np.column_stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)])


def ap_bruteforce(records, gt_count: int, t: float) -> float:
    """Average precision computed rank by rank straight from the
    definitions: ranked precision/recall points, then every-point
    interpolation over distinct recall levels.

    ``records`` is a list of (confidence, source_rank, matched_iou).
    """
    order = sorted(range(len(records)), key=lambda i: (-records[i][0], records[i][1]))
    points = []
    tp = 0
    for k, i in enumerate(order, start=1):
        if records[i][2] > t:
            tp += 1
        precision = tp / k
        recall = tp / gt_count if gt_count > 0 else 0.0
        points.append((precision, recall))
    if not points:
        return 1.0 if gt_count == 0 else 0.0
    ap = 0.0
    previous = 0.0
    for level in sorted({r for _, r in points}):
        if level <= previous:
            continue
        interpolated = max(p for p, r in points if r >= level)
        ap += (level - previous) * interpolated
        previous = level
    return ap


def edit_distance_dp(a, b) -> int:
    """Full-table Levenshtein DP."""
    m, n = len(a), len(b)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        table[i][0] = i
    for j in range(n + 1):
        table[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
                table[i - 1][j - 1] + cost,
            )
    return table[m][n]
