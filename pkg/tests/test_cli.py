import json

import numpy as np
import pytest
from click.testing import CliRunner

from linekit.cli import cli, main
from linekit.io_formats import (
    load_pages,
    read_mask_png,
    save_pages,
    write_probability_png,
)
from linekit.raster import ProbabilityMap, connected_components, rasterize
from linekit.synth import SynthSpec, generate_page, thicken


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args):
    result = runner.invoke(cli, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


class TestSynthCommand:
    def test_pages_masks_and_predictions(self, runner, tmp_path):
        out = tmp_path / "data"
        invoke(runner, ["synth", "-o", str(out), "--pages", "2", "--seed", "7",
                        "--perturb", "thicken:1.0", "--perturb", "drop:0"])
        pages = load_pages(out / "pages.json")
        preds = load_pages(out / "predictions.json")
        assert len(pages) == 2
        assert len(preds[0].lines) == len(pages[0].lines) - 1
        mask = read_mask_png(out / "masks" / f"{pages[0].page_id}.png")
        assert mask.foreground_count > 0

    def test_fixture_emission(self, runner, tmp_path):
        out = tmp_path / "fx"
        invoke(runner, ["synth", "-o", str(out), "--fixture", "equal-iou"])
        for name in ("ground_truth", "thickened", "merged"):
            assert (out / f"{name}.json").exists()
            assert (out / "masks" / f"{name}.png").exists()


class TestNormalizeCommand:
    def test_labels_and_log(self, runner, tmp_path):
        page = generate_page(SynthSpec(width=400, height=300, line_count=4, gap=0, seed=1))
        src = tmp_path / "pages.json"
        save_pages([page], src)
        out = tmp_path / "norm"
        invoke(runner, ["normalize", str(src), "-o", str(out), "--target-long-side", "200"])
        labels = read_mask_png(out / "labels" / f"{page.page_id}.png")
        assert labels.width == 200
        assert len(connected_components(labels)) == 4
        log = json.loads((out / "normalize_log.json").read_text())
        # pairs (0,1) and (2,3) erode; (1,2) is separated by those erosions
        assert log["pages"][0]["modifications"] >= 2
        normalized = load_pages(out / "pages.json")
        assert len(normalized[0].lines) == 4

    def test_naive_mode_merges(self, runner, tmp_path):
        # 3 px gaps collapse in the rasterize-then-resize path
        from linekit.geometry import rectangle
        from linekit.io_formats import PageAnnotation, TextLine

        lines = [TextLine(rectangle(50, 100 + 43 * i, 2900, 140 + 43 * i)) for i in range(3)]
        src = tmp_path / "pages.json"
        save_pages([PageAnnotation("g", 3072, 400, lines)], src)
        out = tmp_path / "naive"
        invoke(runner, ["normalize", str(src), "-o", str(out), "--naive"])
        labels = read_mask_png(out / "labels" / "g.png")
        assert len(connected_components(labels)) < 3
        assert not (out / "pages.json").exists()


class TestExtractCommand:
    def test_threshold_and_min_cc(self, runner, tmp_path):
        values = np.zeros((100, 120))
        values[10:20, 10:22] = 0.9    # 120 px, kept
        values[50:57, 50:57] = 0.9    # 49 px, removed
        values[80:95, 10:22] = 0.5    # below 0.7 threshold
        png = tmp_path / "prob.png"
        write_probability_png(ProbabilityMap(values), png)
        out = tmp_path / "pred.json"
        invoke(runner, ["extract", str(png), "-o", str(out)])
        pages = load_pages(out)
        assert len(pages[0].lines) == 1
        assert pages[0].lines[0].confidence == pytest.approx(0.9, abs=0.01)

    def test_aru_net_preset_keeps_low_probability(self, runner, tmp_path):
        values = np.zeros((60, 60))
        values[5:25, 5:25] = 0.5
        png = tmp_path / "prob.png"
        write_probability_png(ProbabilityMap(values), png)
        out = tmp_path / "pred.json"
        invoke(runner, ["extract", str(png), "-o", str(out), "--aru-net"])
        assert len(load_pages(out)[0].lines) == 1

    def test_preset_conflict_is_usage_error(self, tmp_path):
        png = tmp_path / "p.png"
        write_probability_png(ProbabilityMap(np.zeros((4, 4))), png)
        code = main(["extract", str(png), "-o", str(tmp_path / "o.json"), "--aru-net", "--dhsegment"])
        assert code == 1


class TestEvaluateCommand:
    def _dataset(self, tmp_path, perturbed=True):
        pages = [generate_page(SynthSpec(seed=s), page_id=f"p{s}") for s in (1, 2)]
        preds = [thicken(p, 1.0) if perturbed else p for p in pages]
        gt = tmp_path / "gt.json"
        pred = tmp_path / "pred.json"
        save_pages(pages, gt)
        save_pages(preds, pred)
        return gt, pred

    def test_perfect_predictions_all_ones(self, runner, tmp_path):
        gt, pred = self._dataset(tmp_path, perturbed=False)
        out = tmp_path / "eval"
        invoke(runner, ["evaluate", "--gt", str(gt), "--pred", str(gt), "-o", str(out)])
        report = json.loads((out / "report.json").read_text())
        assert report["pixel"]["micro"]["iou"] == 1.0
        assert report["objects"]["pooled"]["ap_range"] == 1.0
        assert report["text"]["aggregate_micro"]["cer_page"] == 0.0
        assert (out / "summary.csv").exists()

    def test_tier_selection(self, runner, tmp_path):
        gt, pred = self._dataset(tmp_path)
        out = tmp_path / "eval"
        invoke(runner, ["evaluate", "--gt", str(gt), "--pred", str(pred), "-o", str(out),
                        "--tier", "pixel", "--tier", "object"])
        report = json.loads((out / "report.json").read_text())
        assert report["text"] is None
        assert 0 < report["pixel"]["micro"]["iou"] < 1
        assert set(report["objects"]["pooled"]["ap_by_threshold"]) == {
            "0.50", "0.55", "0.60", "0.65", "0.70", "0.75", "0.80", "0.85", "0.90", "0.95"
        }

    def test_manifest_mode_with_mask_source(self, runner, tmp_path):
        from linekit.io_formats import write_mask_png

        page = generate_page(SynthSpec(seed=3), page_id="m1")
        gt_file = tmp_path / "gt_m1.json"
        save_pages([page], gt_file)
        mask = rasterize(page.polygons, page.image_width, page.image_height)
        mask_file = tmp_path / "pred_m1.png"
        write_mask_png(mask, mask_file)
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({
            "name": "demo",
            "items": [{"gt": "gt_m1.json", "pred_mask": "pred_m1.png"}],
        }))
        out = tmp_path / "eval"
        invoke(runner, ["evaluate", "--manifest", str(manifest), "-o", str(out),
                        "--tier", "pixel", "--tier", "object"])
        report = json.loads((out / "report.json").read_text())
        assert report["pixel"]["micro"]["iou"] > 0.95
        assert report["objects"]["pooled"]["ap_by_threshold"]["0.50"] == 1.0

    def test_text_tier_refused_without_texts(self, tmp_path):
        page = generate_page(SynthSpec(seed=4), page_id="p")
        stripped = [l for l in page.lines]
        from linekit.io_formats import PageAnnotation, TextLine

        no_text = PageAnnotation("p", page.image_width, page.image_height,
                                 [TextLine(l.polygon) for l in stripped])
        gt = tmp_path / "gt.json"
        pred = tmp_path / "pred.json"
        save_pages([page], gt)
        save_pages([no_text], pred)
        code = main(["evaluate", "--gt", str(gt), "--pred", str(pred), "-o", str(tmp_path / "e")])
        assert code == 2

    def test_unmatched_page_ids_is_data_error(self, tmp_path):
        a = generate_page(SynthSpec(seed=1), page_id="a")
        b = generate_page(SynthSpec(seed=1), page_id="b")
        gt = tmp_path / "gt.json"
        pred = tmp_path / "pred.json"
        save_pages([a], gt)
        save_pages([b], pred)
        code = main(["evaluate", "--gt", str(gt), "--pred", str(pred), "-o", str(tmp_path / "e")])
        assert code == 2

    def test_missing_inputs_is_usage_error(self, tmp_path):
        assert main(["evaluate", "-o", str(tmp_path / "e")]) == 1

    def test_pr_curve_dump(self, runner, tmp_path):
        gt, pred = self._dataset(tmp_path)
        out = tmp_path / "eval"
        invoke(runner, ["evaluate", "--gt", str(gt), "--pred", str(pred), "-o", str(out),
                        "--dump-pr-curve"])
        rows = (out / "pr_curve.csv").read_text().strip().splitlines()
        assert rows[0] == "rank,confidence,true_positive,precision,recall"
        assert len(rows) == 1 + 20  # 2 pages x 10 detections

    def test_jobs_parallel_same_report(self, runner, tmp_path):
        gt, pred = self._dataset(tmp_path)
        out1 = tmp_path / "eval1"
        out2 = tmp_path / "eval2"
        invoke(runner, ["evaluate", "--gt", str(gt), "--pred", str(pred), "-o", str(out1)])
        invoke(runner, ["evaluate", "--gt", str(gt), "--pred", str(pred), "-o", str(out2),
                        "--jobs", "2"])
        a = json.loads((out1 / "report.json").read_text())
        b = json.loads((out2 / "report.json").read_text())
        for payload in (a, b):
            payload.pop("timestamp")
            payload["config"].pop("jobs")  # echoed, but must not affect results
            payload["config"].pop("output")
        assert a == b

    def test_config_file_defaults(self, runner, tmp_path):
        gt, pred = self._dataset(tmp_path)
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"tiers": ["pixel"], "min_cc": 10}))
        out = tmp_path / "eval"
        invoke(runner, ["evaluate", "--gt", str(gt), "--pred", str(pred), "-o", str(out),
                        "--config", str(config)])
        report = json.loads((out / "report.json").read_text())
        assert report["objects"] is None
        assert report["config"]["min_cc"] == 10


class TestVisualizeCommand:
    def test_overlays_and_outlines(self, runner, tmp_path):
        page = generate_page(SynthSpec(seed=9), page_id="v1")
        pred = thicken(page, 2.0)
        gt_file = tmp_path / "gt.json"
        pred_file = tmp_path / "pred.json"
        save_pages([page], gt_file)
        save_pages([pred], pred_file)
        out = tmp_path / "viz"
        invoke(runner, ["visualize", "--gt", str(gt_file), "--pred", str(pred_file), "-o", str(out)])
        assert (out / "v1_overlay.png").exists()
        assert (out / "v1_outlines.png").exists()

    def test_overlay_palette(self, runner, tmp_path):
        from PIL import Image

        page = generate_page(SynthSpec(seed=9), page_id="v1")
        pred = thicken(page, 2.0)
        gt_file = tmp_path / "gt.json"
        pred_file = tmp_path / "pred.json"
        save_pages([page], gt_file)
        save_pages([pred], pred_file)
        out = tmp_path / "viz"
        invoke(runner, ["visualize", "--gt", str(gt_file), "--pred", str(pred_file),
                        "-o", str(out), "--no-outlines"])
        arr = np.asarray(Image.open(out / "v1_overlay.png"))
        colors = {tuple(c) for c in arr.reshape(-1, 3)}
        assert colors <= {(0, 0, 0), (0, 255, 0), (0, 255, 255), (255, 0, 0)}


class TestExitCodes:
    def test_ok(self, tmp_path):
        assert main(["synth", "-o", str(tmp_path / "d")]) == 0

    def test_usage(self):
        assert main(["evaluate"]) == 1
        assert main(["no-such-command"]) == 1

    def test_data_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert main(["normalize", str(bad), "-o", str(tmp_path / "o")]) == 2

    def test_help_is_ok(self):
        assert main(["--help"]) == 0
