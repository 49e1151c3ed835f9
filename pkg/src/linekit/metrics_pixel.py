"""Pixel-level precision, recall, IoU and F1 from foreground confusion counts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .raster import Mask, PixelConfusion, pixel_confusion, resize_nearest


@dataclass(frozen=True)
class PixelScores:
    """The four pixel metrics plus the counts they were derived from."""

    precision: float
    recall: float
    iou: float
    f1: float
    confusion: PixelConfusion

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "iou": self.iou,
            "f1": self.f1,
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "fn": self.confusion.fn,
        }


@dataclass(frozen=True)
class PixelEvalResult:
    per_page: dict[str, PixelScores]
    micro: PixelScores
    macro: dict[str, float]


def pixel_scores(c: PixelConfusion) -> PixelScores:
    """P = TP/(TP+FP), R = TP/(TP+FN), IoU = TP/(TP+FP+FN),
    F1 = 2TP/(2TP+FP+FN).

    An all-zero confusion (empty prediction against empty reference) scores
    1.0 everywhere; any other zero denominator scores 0.0.
    """
    total = c.tp + c.fp + c.fn
    if total == 0:
        return PixelScores(1.0, 1.0, 1.0, 1.0, c)
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else 0.0
    iou = c.tp / total
    f1 = 2 * c.tp / (2 * c.tp + c.fp + c.fn)
    return PixelScores(precision=precision, recall=recall, iou=iou, f1=f1, confusion=c)


def evaluate_pixel(preds: Mapping[str, Mask], gts: Mapping[str, Mask]) -> PixelEvalResult:
    """Score every page and aggregate two ways.

    Micro sums the confusion counts over pages before applying the
    formulas; macro averages the per-page scores. Prediction masks whose
    size differs from the reference (resized network outputs) are upscaled
    to the reference size with nearest-neighbor resampling first.
    """
    if not gts:
        raise ValueError("cannot evaluate an empty dataset")
    missing_pred = sorted(set(gts) - set(preds))
    missing_gt = sorted(set(preds) - set(gts))
    if missing_pred or missing_gt:
        raise ValueError(
            "page ids do not match: "
            f"missing predictions for {missing_pred}, missing references for {missing_gt}"
        )
    per_page: dict[str, PixelScores] = {}
    total = PixelConfusion(0, 0, 0)
    for page_id in sorted(gts):
        gt = gts[page_id]
        pred = preds[page_id]
        if (pred.width, pred.height) != (gt.width, gt.height):
            pred = resize_nearest(pred, gt.width, gt.height)
        confusion = pixel_confusion(pred, gt)
        per_page[page_id] = pixel_scores(confusion)
        total = total + confusion
    n = len(per_page)
    macro = {
        "precision": sum(s.precision for s in per_page.values()) / n,
        "recall": sum(s.recall for s in per_page.values()) / n,
        "iou": sum(s.iou for s in per_page.values()) / n,
        "f1": sum(s.f1 for s in per_page.values()) / n,
    }
    return PixelEvalResult(per_page=per_page, micro=pixel_scores(total), macro=macro)
