"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute.
"""
import json
import time
from contextlib import contextmanager

import numpy as np
import pytest
from click.testing import CliRunner

from linekit.cli import cli
from linekit.geometry import Polygon, intersection_area, rectangle, union_area
from linekit.io_formats import (
    PageAnnotation,
    TextLine,
    load_pages,
    read_mask_png,
    save_pages,
    write_mask_png,
)
from linekit.metrics_object import ap_from_matches, detections_from_lines, page_matches
from linekit.metrics_pixel import pixel_scores
from linekit.metrics_text import (
    cer_at_page,
    edit_distance,
    line_pairing_stats,
    report_at_threshold,
    threshold_error_counts,
)
from linekit.normalize import NormalizationConfig, PairKind, naive_label_image, normalize_page
from linekit.raster import Mask, PixelConfusion, connected_components, pixel_confusion, rasterize
from linekit.report_viz import COLOR_FN, COLOR_FP, COLOR_TP, confusion_overlay
from linekit.synth import (
    SynthSpec,
    drop_line,
    equal_iou_fixture,
    generate_page,
    merger_sensitivity_fixture,
    thicken,
    with_text_noise,
)
from oracles import ap_bruteforce, random_star_polygon, rasterized_pair_counts


@contextmanager
def criterion(number, label):
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {number:2d} ({label}): FAIL")
        raise
    print(f"[acceptance] criterion {number:2d} ({label}): PASS")


def test_criterion_01_pixel_formulas():
    with criterion(1, "pixel metric formulas"):
        start = time.perf_counter()
        worked = pixel_scores(PixelConfusion(6, 2, 2))
        assert worked.iou == 0.6
        assert worked.f1 == 0.75
        rng = np.random.RandomState(100)
        for _ in range(1000):
            tp, fp, fn = (int(v) for v in rng.randint(0, 10_000, 3))
            s = pixel_scores(PixelConfusion(tp, fp, fn))
            if tp + fp + fn == 0:
                assert (s.precision, s.recall, s.iou, s.f1) == (1.0, 1.0, 1.0, 1.0)
                continue
            assert abs(s.precision - (tp / (tp + fp) if tp + fp else 0.0)) <= 1e-12
            assert abs(s.recall - (tp / (tp + fn) if tp + fn else 0.0)) <= 1e-12
            assert abs(s.iou - tp / (tp + fp + fn)) <= 1e-12
            assert abs(s.f1 - 2 * tp / (2 * tp + fp + fn)) <= 1e-12
        assert time.perf_counter() - start < 1.0


def test_criterion_02_geometry_against_rasterized_oracle():
    with criterion(2, "polygon booleans vs 4096^2 pixel-count oracle"):
        start = time.perf_counter()
        rng = np.random.RandomState(200)
        pairs = 0
        while pairs < 100:
            pts_a = random_star_polygon(rng, (60.0, 60.0), radius_low=20, radius_high=50)
            offset = rng.uniform(-25, 25, 2)
            pts_b = random_star_polygon(
                rng, (60.0 + offset[0], 60.0 + offset[1]), radius_low=20, radius_high=50
            )
            a = Polygon(pts_a)
            b = Polygon(pts_b)
            inter = intersection_area(a, b)
            if inter < 50.0:  # oracle relative error is meaningless on slivers
                continue
            pairs += 1
            counts = rasterized_pair_counts(pts_a, pts_b, cells=4096)
            union = union_area(a, b)
            assert inter == pytest.approx(counts["intersection"], rel=0.01)
            assert union == pytest.approx(counts["union"], rel=0.01)
            assert inter / union == pytest.approx(
                counts["intersection"] / counts["union"], rel=0.01
            )
        elapsed = time.perf_counter() - start
        assert elapsed < 120.0, f"oracle comparison took {elapsed:.1f}s"


def test_criterion_03_average_precision_against_bruteforce():
    with criterion(3, "AP vs brute-force rank enumeration"):
        # The ranked [TP, FP, TP] / 2-reference fixture.
        g1, g2 = rectangle(0, 0, 10, 10), rectangle(20, 0, 30, 10)
        from linekit.metrics_object import Detection, average_precision, pair_objects, pr_curve

        preds = [
            Detection(g1, 0.9, 0),
            Detection(rectangle(40, 0, 50, 10), 0.8, 1),
            Detection(rectangle(20, 0, 30, 11), 0.7, 2),
        ]
        fixture_ap = average_precision(pr_curve(pair_objects(preds, [g1, g2]), preds, 0.5))
        assert abs(fixture_ap - 5 / 6) <= 1e-12

        rng = np.random.RandomState(300)
        for _ in range(500):
            n_gt = int(rng.randint(0, 5))
            n_pred = int(rng.randint(0, 7))
            gts = [rectangle(0, 30 * k, 100, 30 * k + 20) for k in range(n_gt)]
            preds = []
            for k in range(n_pred):
                if n_gt and rng.rand() < 0.7:
                    target = int(rng.randint(0, n_gt))
                    stretch = float(rng.uniform(0, 25))
                    poly = rectangle(0, 30 * target, 100, 30 * target + 20 + stretch)
                else:
                    poly = rectangle(200, 30 * k, 300, 30 * k + 20)
                preds.append(Detection(poly, float(rng.rand()), k))
            matches = page_matches(preds, gts)
            t = float(rng.choice([0.3, 0.5, 0.75, 0.9]))
            ours = ap_from_matches([matches], thresholds=[t]).ap_by_threshold[t]
            reference = ap_bruteforce(list(matches.records), matches.gt_count, t)
            assert abs(ours - reference) <= 1e-9


def test_criterion_04_equal_iou_unequal_ap():
    with criterion(4, "equal pixel IoU, unequal AP@.5"):
        fx = equal_iou_fixture(seed=0)
        assert abs(fx.iou_thickened - fx.iou_merged) <= 0.01
        ap_thick = ap_from_matches(
            [page_matches(detections_from_lines(fx.thickened.lines), fx.ground_truth.polygons)]
        ).ap_by_threshold[0.50]
        ap_merged = ap_from_matches(
            [page_matches(detections_from_lines(fx.merged.lines), fx.ground_truth.polygons)]
        ).ap_by_threshold[0.50]
        # Same direction as the reported instance (intact lines score higher)
        # and a gap of at least 0.2.
        assert ap_thick - ap_merged >= 0.2


def _random_touchy_page(seed):
    """Stacked full-width lines with injected touches and sub-20% overlaps."""
    rng = np.random.RandomState(seed)
    n = 6
    height = 24
    width = 800
    lines = []
    y = 40.0
    for i in range(n):
        lines.append(TextLine(rectangle(30, y, width - 30, y + height)))
        case = rng.choice(["touch", "overlap", "clear"])
        if case == "touch":
            gap = 0.0
        elif case == "overlap":
            gap = -float(rng.uniform(1.0, 4.0))  # <= 4/24 = 16.7% per side
        else:
            gap = float(rng.uniform(3.0, 10.0))
        y = y + height + gap
    page_height = int(y + 40)
    return PageAnnotation(f"touchy-{seed}", width, max(page_height, width // 2 + 1), lines)


def test_criterion_05_normalization_guarantees():
    with criterion(5, "normalization separates all non-large pairs"):
        cfg = NormalizationConfig(target_long_side=768)
        for seed in range(100):
            page = _random_touchy_page(seed)
            out, mask, log = normalize_page(page, cfg)
            assert len(out.lines) == len(page.lines)
            large = {
                (a.index_a, a.index_b)
                for a in log.pair_actions
                if a.kind == PairKind.LARGE_OVERLAP.value
            }
            rasters = [
                rasterize([l.polygon], out.image_width, out.image_height).pixels
                for l in out.lines
            ]
            for i in range(len(rasters)):
                for j in range(i + 1, len(rasters)):
                    if (i, j) in large:
                        continue
                    assert not (rasters[i] & rasters[j]).any(), (seed, i, j)
            _, _, log2 = normalize_page(out, cfg)
            assert log2.modifications == 0, f"page {seed} not idempotent"


def test_criterion_06_rescale_then_split_prevents_mergers():
    with criterion(6, "label generation avoids re-merged lines"):
        n = 5
        lines = [TextLine(rectangle(50, 100 + i * 43, 2900, 140 + i * 43)) for i in range(n)]
        page = PageAnnotation("gap3", 3072, 400, lines)
        naive = naive_label_image(page, 768)
        assert len(connected_components(naive)) < n
        _, mask, _ = normalize_page(page, NormalizationConfig(target_long_side=768))
        assert len(connected_components(mask)) == n


def _text_scene(rng, competing=False):
    """Reference lines with one prediction each (noisy text, jittered box)."""
    alphabet = list("abcdefgh ")
    n = int(rng.randint(2, 6))
    gt, preds = [], []
    for i in range(n):
        y = 40.0 * i
        text = "".join(rng.choice(alphabet, rng.randint(5, 15))).strip() or "xyz"
        gt.append(TextLine(rectangle(0, y, 200, y + 25), text))
        if competing or rng.rand() < 0.85:
            stretch = float(rng.uniform(0, 20))
            noisy = "".join(c if rng.rand() > 0.2 else "z" for c in text)
            preds.append(TextLine(rectangle(0, y, 200, y + 25 + stretch), noisy))
    if not preds:
        preds.append(TextLine(rectangle(0, 999, 10, 1010), "far"))
    return preds, gt


def test_criterion_07_cer_penalty_semantics():
    with criterion(7, "unmatched-line penalty and threshold monotonicity"):
        rng = np.random.RandomState(700)
        # Removing one matched prediction raises the error mass by exactly
        # |ref| - edit_distance(hyp, ref) for that couple.
        for _ in range(50):
            preds, gt = _text_scene(rng)
            stats = line_pairing_stats(preds, gt)
            matched = [
                k for k, couple in enumerate(stats.couples) if couple.iou > 0.5
            ]
            if not matched:
                continue
            victim_gt = matched[0]
            victim_pred = None
            for p_index, p in enumerate(preds):
                if intersection_area(p.polygon, gt[victim_gt].polygon) > 0:
                    victim_pred = p_index
                    break
            reduced = [p for k, p in enumerate(preds) if k != victim_pred]
            if not reduced:
                continue
            before = threshold_error_counts(stats, 0.5)
            after = threshold_error_counts(line_pairing_stats(reduced, gt), 0.5)
            hyp = preds[victim_pred].text
            ref = gt[victim_gt].text
            expected_delta = len(ref) - edit_distance(hyp, ref)
            assert after["char_errors"] - before["char_errors"] == expected_delta

        # CER@line is non-decreasing in the IoU threshold.
        grid = [round(0.5 + 0.05 * k, 2) for k in range(10)]
        for _ in range(200):
            preds, gt = _text_scene(rng)
            stats = line_pairing_stats(preds, gt)
            values = [report_at_threshold(stats, t).cer for t in grid]
            assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


def test_criterion_08_merger_hits_cer_harder_than_ap():
    with criterion(8, "one merger: CER@page degrades more than AP@[.5,.95]"):
        fx = merger_sensitivity_fixture(seed=0)
        cer_before = cer_at_page(fx.baseline.lines, fx.ground_truth.lines)
        cer_after = cer_at_page(fx.merged.lines, fx.ground_truth.lines)
        ap_before = ap_from_matches(
            [page_matches(detections_from_lines(fx.baseline.lines), fx.ground_truth.polygons)]
        ).ap_range
        ap_after = ap_from_matches(
            [page_matches(detections_from_lines(fx.merged.lines), fx.ground_truth.polygons)]
        ).ap_range
        assert cer_before > 0 and ap_before > 0
        cer_relative_increase = (cer_after - cer_before) / cer_before
        ap_relative_decrease = (ap_before - ap_after) / ap_before
        assert cer_relative_increase > ap_relative_decrease


def _build_benchmark_dataset(root, pages=100):
    gt_pages = []
    pred_pages = []
    for k in range(pages):
        spec = SynthSpec(
            width=1000, height=1400, line_count=30, line_height=30, gap=12, margin=25,
            seed=9000 + k,
        )
        page = generate_page(spec, page_id=f"bench-{k:04d}")
        pred = thicken(page, 0.5 + (k % 4) * 0.5)
        pred = with_text_noise(pred, 0.05, seed=k)
        if k % 5 == 0:
            pred = drop_line(pred, k % 30)
        gt_pages.append(page)
        pred_pages.append(pred)
    gt_path = root / "gt.json"
    pred_path = root / "pred.json"
    save_pages(gt_pages, gt_path)
    save_pages(pred_pages, pred_path)
    return gt_path, pred_path


def test_criterion_09_end_to_end_speed_and_determinism(tmp_path):
    with criterion(9, "100-page evaluate --all under 60s, byte-identical re-run"):
        gt_path, pred_path = _build_benchmark_dataset(tmp_path)
        runner = CliRunner()
        args = ["evaluate", "--gt", str(gt_path), "--pred", str(pred_path), "--tier", "all"]
        start = time.perf_counter()
        result = runner.invoke(cli, args + ["-o", str(tmp_path / "run1")])
        elapsed = time.perf_counter() - start
        assert result.exit_code == 0, result.output
        assert elapsed < 60.0, f"evaluate --all took {elapsed:.1f}s"
        result2 = runner.invoke(cli, args + ["-o", str(tmp_path / "run2")])
        assert result2.exit_code == 0

        def stripped(path):
            payload = json.loads(path.read_text())
            payload.pop("timestamp")
            return json.dumps(payload, sort_keys=True)

        assert stripped(tmp_path / "run1/report.json") == stripped(tmp_path / "run2/report.json")
        assert (tmp_path / "run1/summary.csv").read_bytes() == (tmp_path / "run2/summary.csv").read_bytes()


def test_criterion_10_round_trips(tmp_path):
    with criterion(10, "page/mask round trips and overlay counts"):
        rng = np.random.RandomState(1000)
        pages = []
        for k in range(20):
            page = generate_page(
                SynthSpec(width=400, height=400, line_count=int(rng.randint(0, 6)),
                          line_height=20, gap=15, margin=12, seed=k),
                page_id=f"rt-{k}",
            )
            pages.append(page)
        path = tmp_path / "pages.json"
        save_pages(pages, path)
        assert load_pages(path) == pages

        for k in range(20):
            mask = Mask(rng.rand(37, 53) > rng.uniform(0.3, 0.7))
            png = tmp_path / f"m{k}.png"
            write_mask_png(mask, png)
            assert read_mask_png(png) == mask

        for k in range(50):
            pred = Mask(rng.rand(24, 31) > 0.5)
            gt = Mask(rng.rand(24, 31) > 0.5)
            overlay = confusion_overlay(pred, gt)
            c = pixel_confusion(pred, gt)
            assert int(np.all(overlay == COLOR_TP, axis=-1).sum()) == c.tp
            assert int(np.all(overlay == COLOR_FP, axis=-1).sum()) == c.fp
            assert int(np.all(overlay == COLOR_FN, axis=-1).sum()) == c.fn
