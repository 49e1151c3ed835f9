"""Object-level pairing and average precision for detected lines.

Predictions and references are paired once by raw polygon IoU (greedy,
one-to-one). TP/FP status is then decided per IoU threshold on the fixed
pairing, detections are ranked by confidence, and AP is the area under the
interpolated precision/recall curve. AP is also averaged over the COCO-style
threshold grid 0.50:0.05:0.95.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .geometry import Polygon, polygon_iou

#: IoU thresholds for the averaged AP (10 values, 0.50 .. 0.95).
IOU_GRID: tuple[float, ...] = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))


@dataclass(frozen=True)
class Detection:
    """One predicted line with its ranking confidence.

    Detections without native scores get confidence 1.0; ``source_rank``
    (document order) breaks confidence ties deterministically.
    """

    polygon: Polygon
    confidence: float = 1.0
    source_rank: int = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class Match:
    pred_index: int
    gt_index: int
    iou: float


@dataclass(frozen=True)
class Pairing:
    """One-to-one prediction/reference matches, sorted by descending IoU."""

    matches: tuple[Match, ...]
    unmatched_pred: tuple[int, ...]
    unmatched_gt: tuple[int, ...]

    @property
    def total_gt(self) -> int:
        return len(self.matches) + len(self.unmatched_gt)


@dataclass(frozen=True)
class PRCurve:
    """Ranked precision/recall points: one (k, p_k, r_k) per rank k."""

    points: tuple[tuple[int, float, float], ...]
    total_gt: int


@dataclass(frozen=True)
class APResult:
    ap_by_threshold: dict[float, float]
    ap_range: float
    macro_ap_by_threshold: dict[float, float]
    macro_ap_range: float
    true_positives_by_threshold: dict[float, int]
    total_predictions: int
    total_gt: int

    @property
    def ap50(self) -> float:
        return self.ap_by_threshold[0.50]

    @property
    def ap75(self) -> float:
        return self.ap_by_threshold[0.75]


def pair_objects(preds: Sequence[Detection], gts: Sequence[Polygon]) -> Pairing:
    """Greedy global matching by IoU.

    All overlapping (prediction, reference) pairs are sorted by descending
    IoU (ties broken by prediction source_rank, then reference index) and
    accepted while both endpoints are still free, so each object is paired
    at most once.
    """
    candidates = []
    gt_bounds = [g.bounds for g in gts]
    for pred_index, det in enumerate(preds):
        p_minx, p_miny, p_maxx, p_maxy = det.polygon.bounds
        for gt_index, gt in enumerate(gts):
            g_minx, g_miny, g_maxx, g_maxy = gt_bounds[gt_index]
            if p_maxx <= g_minx or g_maxx <= p_minx or p_maxy <= g_miny or g_maxy <= p_miny:
                continue
            iou = polygon_iou(det.polygon, gt)
            if iou > 0.0:
                candidates.append((iou, det.source_rank, gt_index, pred_index))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    free_pred = set(range(len(preds)))
    free_gt = set(range(len(gts)))
    matches = []
    for iou, _, gt_index, pred_index in candidates:
        if pred_index in free_pred and gt_index in free_gt:
            matches.append(Match(pred_index=pred_index, gt_index=gt_index, iou=iou))
            free_pred.discard(pred_index)
            free_gt.discard(gt_index)
    return Pairing(
        matches=tuple(matches),
        unmatched_pred=tuple(sorted(free_pred)),
        unmatched_gt=tuple(sorted(free_gt)),
    )


def pr_curve(pairing: Pairing, preds: Sequence[Detection], t: float) -> PRCurve:
    """Ranked precision/recall at IoU threshold ``t``.

    Detections are ordered by decreasing confidence (source_rank breaks
    ties); a detection counts as TP iff it is paired with IoU strictly
    above ``t``. p_k = TP_k / k and r_k = TP_k / total_gt at every rank.
    """
    if not 0.0 < t < 1.0:
        raise ValueError(f"IoU threshold must lie in (0, 1), got {t}")
    iou_of = {m.pred_index: m.iou for m in pairing.matches}
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, preds[i].source_rank))
    total_gt = pairing.total_gt
    points = []
    tp = 0
    for k, pred_index in enumerate(order, start=1):
        if iou_of.get(pred_index, 0.0) > t:
            tp += 1
        recall = tp / total_gt if total_gt > 0 else 0.0
        points.append((k, tp / k, recall))
    return PRCurve(points=tuple(points), total_gt=total_gt)


def average_precision(curve: PRCurve) -> float:
    """Area under the interpolated curve.

    Precision is interpolated as the maximum precision at any recall at
    least as high (every-point interpolation); the area is summed over
    distinct recall levels starting from recall 0. An empty curve scores
    1.0 when there was nothing to find, 0.0 when references went undetected.
    """
    if not curve.points:
        return 1.0 if curve.total_gt == 0 else 0.0
    n = len(curve.points)
    suffix_max = [0.0] * n
    running = 0.0
    for i in range(n - 1, -1, -1):
        running = max(running, curve.points[i][1])
        suffix_max[i] = running
    ap = 0.0
    prev_recall = 0.0
    for i, (_, _, recall) in enumerate(curve.points):
        if recall > prev_recall:
            ap += (recall - prev_recall) * suffix_max[i]
            prev_recall = recall
    return ap


@dataclass(frozen=True)
class PageMatches:
    """Per-page pairing results reduced to what AP needs: one
    (confidence, source_rank, matched IoU) record per detection."""

    records: tuple[tuple[float, int, float], ...]
    gt_count: int


def page_matches(preds: Sequence[Detection], gts: Sequence[Polygon]) -> PageMatches:
    """Pair one page and keep the ranking-relevant remains."""
    pairing = pair_objects(preds, gts)
    iou_of = {m.pred_index: m.iou for m in pairing.matches}
    records = tuple(
        (det.confidence, det.source_rank, iou_of.get(i, 0.0)) for i, det in enumerate(preds)
    )
    return PageMatches(records=records, gt_count=len(gts))


def ap_from_matches(
    pages: Sequence[PageMatches], thresholds: Sequence[float] = IOU_GRID
) -> APResult:
    """AP over a dataset: detections pooled across pages into one ranked
    list (macro per-page averages are reported alongside)."""
    pooled = []
    total_gt = 0
    for page_index, page in enumerate(pages):
        total_gt += page.gt_count
        for confidence, source_rank, iou in page.records:
            pooled.append((confidence, page_index, source_rank, iou))
    pooled.sort(key=lambda r: (-r[0], r[1], r[2]))

    ap_by_threshold: dict[float, float] = {}
    tp_by_threshold: dict[float, int] = {}
    for t in thresholds:
        points = []
        tp = 0
        for k, (_, _, _, iou) in enumerate(pooled, start=1):
            if iou > t:
                tp += 1
            recall = tp / total_gt if total_gt > 0 else 0.0
            points.append((k, tp / k, recall))
        curve = PRCurve(points=tuple(points), total_gt=total_gt)
        ap_by_threshold[t] = average_precision(curve)
        tp_by_threshold[t] = tp

    macro_by_threshold: dict[float, float] = {}
    if pages:
        for t in thresholds:
            total = 0.0
            for page in pages:
                page_points = []
                tp = 0
                ranked = sorted(page.records, key=lambda r: (-r[0], r[1]))
                for k, (_, _, iou) in enumerate(ranked, start=1):
                    if iou > t:
                        tp += 1
                    recall = tp / page.gt_count if page.gt_count > 0 else 0.0
                    page_points.append((k, tp / k, recall))
                total += average_precision(
                    PRCurve(points=tuple(page_points), total_gt=page.gt_count)
                )
            macro_by_threshold[t] = total / len(pages)
    else:
        macro_by_threshold = {t: 0.0 for t in thresholds}

    return APResult(
        ap_by_threshold=ap_by_threshold,
        ap_range=sum(ap_by_threshold.values()) / len(thresholds),
        macro_ap_by_threshold=macro_by_threshold,
        macro_ap_range=sum(macro_by_threshold.values()) / len(thresholds),
        true_positives_by_threshold=tp_by_threshold,
        total_predictions=len(pooled),
        total_gt=total_gt,
    )


def evaluate_objects(
    pages: Sequence[tuple[Sequence[Detection], Sequence[Polygon]]],
    thresholds: Sequence[float] = IOU_GRID,
) -> APResult:
    """Pair every page, pool the detections, and compute AP at each IoU
    threshold plus the averaged AP over the grid."""
    return ap_from_matches([page_matches(preds, gts) for preds, gts in pages], thresholds)


def detections_from_lines(lines) -> list[Detection]:
    """Detections from annotated lines: native confidence when present,
    else 1.0, with document order as the tie-break rank."""
    return [
        Detection(
            polygon=line.polygon,
            confidence=1.0 if line.confidence is None else line.confidence,
            source_rank=rank,
        )
        for rank, line in enumerate(lines)
    ]
