"""Recognition-based scoring of line segmentations.

The segmentation quality is judged by the damage it does to downstream
text recognition: character/word error rates over whole pages (reading
order, concatenated) and over IoU-paired individual lines, where every
reference line left unpaired is penalized by its full length.

Recognizer outputs are consumed as page annotations whose lines carry a
``text`` field; no recognizer runs here. All texts are NFC-normalized
before any distance is computed.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .io_formats import TextLine
from .metrics_object import IOU_GRID, Detection, pair_objects


@dataclass(frozen=True)
class CerReport:
    """Line-level error rates at one IoU threshold.

    ``matched_char_fraction`` is the share of reference characters that
    belong to lines actually paired (and above threshold); CER can exceed 1.
    Unmatched predicted lines are counted but not penalized.
    """

    cer: float
    wer: float
    matched_char_fraction: float
    matched_pairs: int
    unmatched_gt: int
    unmatched_pred: int

    def to_dict(self) -> dict:
        return {
            "cer": self.cer,
            "wer": self.wer,
            "matched_char_fraction": self.matched_char_fraction,
            "matched_pairs": self.matched_pairs,
            "unmatched_gt": self.unmatched_gt,
            "unmatched_pred": self.unmatched_pred,
        }


@dataclass(frozen=True)
class CerRange:
    """CER/WER swept over the IoU threshold grid, plus the grid means."""

    by_threshold: dict[float, CerReport]
    cer_mean: float
    wer_mean: float


class MissingTextError(ValueError):
    """A line needed for text metrics carries no transcription."""


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Minimum number of unit-cost insertions, deletions and substitutions
    turning ``a`` into ``b``. Works on strings and on token lists."""
    if a == b:
        return 0
    if len(a) == 0:
        return len(b)
    if len(b) == 0:
        return len(a)
    b_arr = np.asarray(list(b))
    offsets = np.arange(len(b) + 1)
    prev = offsets.copy()
    for i, item in enumerate(a, start=1):
        substitute = prev[:-1] + (b_arr != item)
        delete = prev[1:] + 1
        candidates = np.concatenate(([i], np.minimum(substitute, delete)))
        # Fold in the insertion chain cur[j] = min(cand[j], cur[j-1] + 1)
        # as a prefix minimum of cand[k] - k.
        prev = np.minimum.accumulate(candidates - offsets) + offsets
    return int(prev[-1])


def cer(hyp: str, ref: str) -> float:
    """Character error rate: edit distance over reference length."""
    hyp_n = _nfc(hyp)
    ref_n = _nfc(ref)
    return edit_distance(hyp_n, ref_n) / max(len(ref_n), 1)


def wer(hyp: str, ref: str) -> float:
    """Word error rate over whitespace-separated tokens (punctuation kept)."""
    hyp_tokens = _nfc(hyp).split()
    ref_tokens = _nfc(ref).split()
    return edit_distance(hyp_tokens, ref_tokens) / max(len(ref_tokens), 1)


def reading_order(lines: Sequence[TextLine]) -> list[TextLine]:
    """Stable top-left to bottom-right ordering (bounding-box top edge,
    then left edge; input order breaks exact ties)."""
    def key(line: TextLine):
        min_x, min_y, _, _ = line.polygon.bounds
        return (min_y, min_x)

    return sorted(lines, key=key)


def cer_at_page(
    pred_lines: Sequence[TextLine],
    gt_lines: Sequence[TextLine],
    joiner: str = " ",
) -> float:
    """CER between whole-page texts.

    Both sides are sorted into reading order and concatenated with a single
    space (configurable), then one CER is computed.
    """
    char_distance, char_length, _, _ = page_error_counts(pred_lines, gt_lines, joiner=joiner)
    return char_distance / max(char_length, 1)


def wer_at_page(
    pred_lines: Sequence[TextLine],
    gt_lines: Sequence[TextLine],
    joiner: str = " ",
) -> float:
    """Word-level counterpart of cer_at_page."""
    _, _, token_distance, token_length = page_error_counts(pred_lines, gt_lines, joiner=joiner)
    return token_distance / max(token_length, 1)


def page_error_counts(
    pred_lines: Sequence[TextLine],
    gt_lines: Sequence[TextLine],
    joiner: str = " ",
) -> tuple[int, int, int, int]:
    """(char distance, char ref length, token distance, token ref length)
    behind the page-level rates; exposed so datasets can be aggregated by
    summed counts."""
    if not gt_lines:
        raise ValueError("cer_at_page needs at least one reference line")
    hyp = _nfc(joiner.join(_required_text(l) for l in reading_order(pred_lines)))
    ref = _nfc(joiner.join(_required_text(l) for l in reading_order(gt_lines)))
    hyp_tokens = hyp.split()
    ref_tokens = ref.split()
    return (
        edit_distance(hyp, ref),
        len(ref),
        edit_distance(hyp_tokens, ref_tokens),
        len(ref_tokens),
    )


@dataclass(frozen=True)
class _CoupleStats:
    """Pairing of one ground-truth line, with error counts precomputed so a
    threshold sweep does not recompute distances."""

    iou: float  # 0.0 when the line was never paired
    char_errors: int
    token_errors: int
    ref_chars: int
    ref_tokens: int


@dataclass(frozen=True)
class LinePairingStats:
    couples: tuple[_CoupleStats, ...]
    total_pred: int


def line_pairing_stats(
    pred_lines: Sequence[TextLine], gt_lines: Sequence[TextLine]
) -> LinePairingStats:
    """Pair predicted and reference lines once (same greedy IoU pairing as
    the object metrics) and precompute per-couple error counts."""
    if not gt_lines:
        raise ValueError("line-level CER needs at least one reference line")
    detections = [
        Detection(
            polygon=line.polygon,
            confidence=1.0 if line.confidence is None else line.confidence,
            source_rank=rank,
        )
        for rank, line in enumerate(pred_lines)
    ]
    pairing = pair_objects(detections, [l.polygon for l in gt_lines])
    hyp_by_gt = {m.gt_index: (m.pred_index, m.iou) for m in pairing.matches}
    couples = []
    for gt_index, gt_line in enumerate(gt_lines):
        ref = _nfc(_required_text(gt_line))
        ref_tokens = ref.split()
        pred_index, iou = hyp_by_gt.get(gt_index, (None, 0.0))
        if pred_index is None:
            char_errors = len(ref)
            token_errors = len(ref_tokens)
        else:
            hyp = _nfc(_required_text(pred_lines[pred_index]))
            char_errors = edit_distance(hyp, ref)
            token_errors = edit_distance(hyp.split(), ref_tokens)
        couples.append(
            _CoupleStats(
                iou=iou,
                char_errors=char_errors,
                token_errors=token_errors,
                ref_chars=len(ref),
                ref_tokens=len(ref_tokens),
            )
        )
    return LinePairingStats(couples=tuple(couples), total_pred=len(pred_lines))


def threshold_error_counts(stats: LinePairingStats, t: float) -> dict[str, int]:
    """Raw error/total counts at IoU threshold ``t``.

    Couples with IoU strictly above ``t`` contribute their edit distance;
    every other reference line is penalized by its full length. The counts
    sum across pages for micro aggregation.
    """
    if not 0.0 < t < 1.0:
        raise ValueError(f"IoU threshold must lie in (0, 1), got {t}")
    counts = {
        "char_errors": 0,
        "token_errors": 0,
        "matched_chars": 0,
        "matched_pairs": 0,
        "total_chars": sum(c.ref_chars for c in stats.couples),
        "total_tokens": sum(c.ref_tokens for c in stats.couples),
        "total_gt": len(stats.couples),
        "total_pred": stats.total_pred,
    }
    for couple in stats.couples:
        if couple.iou > t:
            counts["char_errors"] += couple.char_errors
            counts["token_errors"] += couple.token_errors
            counts["matched_chars"] += couple.ref_chars
            counts["matched_pairs"] += 1
        else:
            counts["char_errors"] += couple.ref_chars
            counts["token_errors"] += couple.ref_tokens
    return counts


def report_from_counts(counts: dict[str, int]) -> CerReport:
    """CerReport ratios from (possibly summed) threshold_error_counts."""
    return CerReport(
        cer=counts["char_errors"] / max(counts["total_chars"], 1),
        wer=counts["token_errors"] / max(counts["total_tokens"], 1),
        matched_char_fraction=counts["matched_chars"] / max(counts["total_chars"], 1),
        matched_pairs=counts["matched_pairs"],
        unmatched_gt=counts["total_gt"] - counts["matched_pairs"],
        unmatched_pred=counts["total_pred"] - counts["matched_pairs"],
    )


def report_at_threshold(stats: LinePairingStats, t: float) -> CerReport:
    """CerReport from precomputed pairing stats at IoU threshold ``t``."""
    return report_from_counts(threshold_error_counts(stats, t))


def cer_at_line(
    pred_lines: Sequence[TextLine], gt_lines: Sequence[TextLine], t: float
) -> CerReport:
    """Line-level CER at one IoU threshold (see report_at_threshold)."""
    return report_at_threshold(line_pairing_stats(pred_lines, gt_lines), t)


def cer_range(
    pred_lines: Sequence[TextLine],
    gt_lines: Sequence[TextLine],
    thresholds: Sequence[float] = IOU_GRID,
) -> CerRange:
    """cer_at_line swept over the IoU grid; the pairing is computed once."""
    stats = line_pairing_stats(pred_lines, gt_lines)
    by_threshold = {t: report_at_threshold(stats, t) for t in thresholds}
    return CerRange(
        by_threshold=by_threshold,
        cer_mean=sum(r.cer for r in by_threshold.values()) / len(thresholds),
        wer_mean=sum(r.wer for r in by_threshold.values()) / len(thresholds),
    )


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


def _required_text(line: TextLine) -> str:
    if line.text is None:
        raise MissingTextError("line carries no text; text metrics need transcriptions")
    return line.text
