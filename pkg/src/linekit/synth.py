"""Deterministic synthetic pages and prediction perturbations.

These fixtures are the internal oracle for the claims the metric tiers are
built around: segmentations with identical pixel scores can differ sharply
in object AP, and a single line merger barely moves AP while wrecking the
page-level recognition error. Everything here is reproducible bit-exactly
from a seed (a small linear congruential generator, no global RNG state).
"""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Polygon, rectangle
from .io_formats import PageAnnotation, TextLine
from .metrics_object import IOU_GRID, ap_from_matches, detections_from_lines, page_matches
from .raster import Mask, pixel_confusion, rasterize

logger = logging.getLogger(__name__)

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


class _Lcg:
    """Minimal 32-bit linear congruential generator (Numerical Recipes
    constants); stable across platforms and Python versions."""

    def __init__(self, seed: int):
        self.state = seed & 0xFFFFFFFF

    def next_u32(self) -> int:
        self.state = (1664525 * self.state + 1013904223) & 0xFFFFFFFF
        return self.state

    def randint(self, low: int, high: int) -> int:
        """Uniform integer in [low, high] inclusive."""
        return low + self.next_u32() % (high - low + 1)

    def uniform(self) -> float:
        return self.next_u32() / 2**32


@dataclass(frozen=True)
class SynthSpec:
    """Layout of a synthetic page: stacked full-width line rectangles."""

    width: int = 800
    height: int = 600
    line_count: int = 10
    line_height: int = 30
    gap: int = 10
    margin: int = 20
    seed: int = 0

    def __post_init__(self):
        needed = 2 * self.margin + self.line_count * self.line_height
        if self.line_count > 1:
            needed += (self.line_count - 1) * self.gap
        if needed > self.height:
            raise ValueError(
                f"{self.line_count} lines of height {self.line_height} with gap {self.gap} "
                f"and margin {self.margin} do not fit a page of height {self.height}"
            )
        if self.width - 2 * self.margin < 1:
            raise ValueError("page too narrow for the requested margin")


def pseudo_text(rng: _Lcg, length: int) -> str:
    """Deterministic lowercase pseudo-text of exactly ``length`` characters
    with single spaces between 2-8 letter words."""
    if length <= 0:
        return ""
    chars: list[str] = []
    while len(chars) < length:
        if chars:
            chars.append(" ")
        for _ in range(rng.randint(2, 8)):
            if len(chars) >= length:
                break
            chars.append(_ALPHABET[rng.randint(0, 25)])
    text = "".join(chars[:length])
    if text.endswith(" "):
        text = text[:-1] + _ALPHABET[rng.randint(0, 25)]
    return text


def generate_page(spec: SynthSpec, page_id: Optional[str] = None) -> PageAnnotation:
    """A page of evenly stacked line rectangles with seeded pseudo-texts
    (lengths 20-40); identical specs produce identical pages."""
    rng = _Lcg(spec.seed)
    lines = []
    for i in range(spec.line_count):
        y0 = spec.margin + i * (spec.line_height + spec.gap)
        poly = rectangle(spec.margin, y0, spec.width - spec.margin, y0 + spec.line_height)
        lines.append(TextLine(polygon=poly, text=pseudo_text(rng, rng.randint(20, 40))))
    return PageAnnotation(
        page_id=page_id if page_id is not None else f"synth-{spec.seed}",
        image_width=spec.width,
        image_height=spec.height,
        lines=lines,
    )


def merge_lines(page: PageAnnotation, i: int, j: int) -> PageAnnotation:
    """Replace lines i and j by the rectangle enclosing both.

    The merged line keeps only line i's text, simulating a recognizer that
    reads one line of text out of a merged region.
    """
    _check_index(page, i)
    _check_index(page, j)
    if i == j:
        raise ValueError("merge needs two distinct line indices")
    first, second = min(i, j), max(i, j)
    a = page.lines[first].polygon
    b = page.lines[second].polygon
    min_x = min(a.bounds[0], b.bounds[0])
    min_y = min(a.bounds[1], b.bounds[1])
    max_x = max(a.bounds[2], b.bounds[2])
    max_y = max(a.bounds[3], b.bounds[3])
    merged = TextLine(
        polygon=rectangle(min_x, min_y, max_x, max_y),
        text=page.lines[i].text,
        confidence=page.lines[i].confidence,
    )
    lines = [copy.copy(l) for k, l in enumerate(page.lines) if k not in (first, second)]
    lines.insert(first, merged)
    return _with_lines(page, lines)


def split_line(page: PageAnnotation, i: int) -> PageAnnotation:
    """Cut line i at its vertical midline into a left and a right half;
    the text splits at its midpoint."""
    _check_index(page, i)
    line = page.lines[i]
    min_x, min_y, max_x, max_y = line.polygon.bounds
    mid_x = (min_x + max_x) / 2.0
    text_left = text_right = None
    if line.text is not None:
        cut = (len(line.text) + 1) // 2
        text_left, text_right = line.text[:cut], line.text[cut:]
    left = TextLine(rectangle(min_x, min_y, mid_x, max_y), text_left, line.confidence)
    right = TextLine(rectangle(mid_x, min_y, max_x, max_y), text_right, line.confidence)
    lines = [copy.copy(l) for l in page.lines]
    lines[i:i + 1] = [left, right]
    return _with_lines(page, lines)


def thicken(page: PageAnnotation, d: float) -> PageAnnotation:
    """Dilate every line rectangle by ``d`` px on all sides (line polygons
    are replaced by their enclosing rectangles)."""
    if d < 0:
        raise ValueError(f"thicken amount must be >= 0, got {d}")
    lines = []
    for line in page.lines:
        min_x, min_y, max_x, max_y = line.polygon.bounds
        lines.append(
            TextLine(
                rectangle(min_x - d, min_y - d, max_x + d, max_y + d),
                line.text,
                line.confidence,
            )
        )
    return _with_lines(page, lines)


def shift(page: PageAnnotation, dx: float, dy: float) -> PageAnnotation:
    """Translate every line polygon by (dx, dy)."""
    lines = [
        TextLine(Polygon(line.polygon.points + np.array([dx, dy])), line.text, line.confidence)
        for line in page.lines
    ]
    return _with_lines(page, lines)


def drop_line(page: PageAnnotation, i: int) -> PageAnnotation:
    """Remove line i."""
    _check_index(page, i)
    lines = [copy.copy(l) for k, l in enumerate(page.lines) if k != i]
    return _with_lines(page, lines)


def perturb(page: PageAnnotation, op: str) -> PageAnnotation:
    """Apply one perturbation given as a compact spec string:
    ``merge:i,j`` | ``split:i`` | ``thicken:d`` | ``shift:dx,dy`` | ``drop:i``."""
    name, _, arg = op.partition(":")
    try:
        if name == "merge":
            i, j = (int(v) for v in arg.split(","))
            return merge_lines(page, i, j)
        if name == "split":
            return split_line(page, int(arg))
        if name == "thicken":
            return thicken(page, float(arg))
        if name == "shift":
            dx, dy = (float(v) for v in arg.split(","))
            return shift(page, dx, dy)
        if name == "drop":
            return drop_line(page, int(arg))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"bad perturbation {op!r}: {exc}") from exc
    raise ValueError(f"unknown perturbation {name!r}")


def with_text_noise(page: PageAnnotation, rate: float, seed: int = 0) -> PageAnnotation:
    """Substitute a deterministic fraction of non-space characters in every
    line text (simulated recognizer noise)."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"noise rate must lie in [0, 1], got {rate}")
    rng = _Lcg(seed)
    lines = []
    for line in page.lines:
        text = line.text
        if text is not None:
            chars = list(text)
            for k, ch in enumerate(chars):
                if ch != " " and rng.uniform() < rate:
                    replacement = _ALPHABET[rng.randint(0, 25)]
                    while replacement == ch:
                        replacement = _ALPHABET[rng.randint(0, 25)]
                    chars[k] = replacement
            text = "".join(chars)
        lines.append(TextLine(line.polygon, text, line.confidence))
    return _with_lines(page, lines)


@dataclass(frozen=True)
class EqualIouFixture:
    """Two predictions with matched pixel IoU but very different AP@.5.

    ``thickened`` keeps every line (just fattened); ``merged`` merges two
    lines and drops another. The thicken amount is binary-searched until
    both predictions misplace the same number of pixels.
    """

    ground_truth: PageAnnotation
    thickened: PageAnnotation
    merged: PageAnnotation
    iou_thickened: float
    iou_merged: float
    thicken_px: float


def equal_iou_fixture(seed: int = 0) -> EqualIouFixture:
    """Construct the pixel-blindness fixture deterministically.

    Line positions are jittered by sub-pixel offsets so the rasterized IoU
    varies almost continuously with the thicken amount, letting the binary
    search land within 0.01 of the merged variant's IoU.
    """
    rng = _Lcg(seed)
    n, line_w, line_h, gap, margin = 10, 400, 30, 10, 20
    width = line_w + 2 * margin
    height = 2 * margin + n * line_h + (n - 1) * gap + 1
    lines = []
    for i in range(n):
        jitter_x = rng.uniform() * 0.9
        jitter_y = rng.uniform() * 0.9
        x0 = margin + jitter_x
        y0 = margin + i * (line_h + gap) + jitter_y
        lines.append(
            TextLine(
                polygon=rectangle(x0, y0, x0 + line_w, y0 + line_h),
                text=pseudo_text(rng, 30),
            )
        )
    gt = PageAnnotation("equal-iou", width, height, lines)
    gt_mask = rasterize(gt.polygons, width, height)

    merged = drop_line(merge_lines(gt, 0, 1), 4)  # merge first two, drop old line 5
    iou_merged = _page_iou(merged, gt_mask)

    low, high = 0.0, gap / 2.0 - 1.0
    best_d, best_iou, best_gap = 0.0, _page_iou(gt, gt_mask), None
    for _ in range(60):
        mid = (low + high) / 2.0
        iou_mid = _page_iou(thicken(gt, mid), gt_mask)
        distance = abs(iou_mid - iou_merged)
        if best_gap is None or distance < best_gap:
            best_d, best_iou, best_gap = mid, iou_mid, distance
        if iou_mid > iou_merged:
            low = mid  # still too good, thicken more
        else:
            high = mid
    return EqualIouFixture(
        ground_truth=gt,
        thickened=thicken(gt, best_d),
        merged=merged,
        iou_thickened=best_iou,
        iou_merged=iou_merged,
        thicken_px=best_d,
    )


def _page_iou(page: PageAnnotation, gt_mask: Mask) -> float:
    mask = rasterize(page.polygons, gt_mask.width, gt_mask.height)
    c = pixel_confusion(mask, gt_mask)
    total = c.tp + c.fp + c.fn
    return c.tp / total if total else 1.0


@dataclass(frozen=True)
class MergerFixture:
    """Baseline prediction (perfect geometry, noisy texts) and the same
    prediction with one line merger, for comparing how hard a single merger
    hits page-level CER versus averaged AP."""

    ground_truth: PageAnnotation
    baseline: PageAnnotation
    merged: PageAnnotation


def merger_sensitivity_fixture(
    seed: int = 0, line_chars: int = 30, noise_rate: float = 0.07
) -> MergerFixture:
    spec = SynthSpec(width=640, height=460, line_count=10, line_height=30, gap=10, margin=20, seed=seed)
    gt = generate_page(spec, page_id="merger-fixture")
    rng = _Lcg(seed + 1)
    gt = _with_lines(
        gt,
        [TextLine(l.polygon, pseudo_text(rng, line_chars), l.confidence) for l in gt.lines],
    )
    baseline = with_text_noise(gt, noise_rate, seed=seed + 2)
    merged = merge_lines(baseline, 4, 5)
    return MergerFixture(ground_truth=gt, baseline=baseline, merged=merged)


def ap_range_for_pages(
    pairs: Sequence[tuple[PageAnnotation, PageAnnotation]],
    thresholds: Sequence[float] = IOU_GRID,
) -> float:
    """Averaged AP over the IoU grid for (prediction page, reference page)
    pairs; convenience wrapper used by fixtures and tests."""
    matches = [
        page_matches(detections_from_lines(pred.lines), gt.polygons) for pred, gt in pairs
    ]
    return ap_from_matches(matches, thresholds).ap_range


def _with_lines(page: PageAnnotation, lines: list[TextLine]) -> PageAnnotation:
    return PageAnnotation(
        page_id=page.page_id,
        image_width=page.image_width,
        image_height=page.image_height,
        lines=lines,
    )


def _check_index(page: PageAnnotation, i: int) -> None:
    if not 0 <= i < len(page.lines):
        raise ValueError(f"line index {i} out of range for page with {len(page.lines)} lines")
