"""Command-line front-end: normalize | extract | evaluate | visualize | synth.

Exit codes: 0 success, 1 usage error, 2 data error. Page batches can run in
parallel via --jobs (or the LINEKIT_JOBS environment variable); outputs are
always assembled in page-id order, so results do not depend on the degree
of parallelism.
"""
from __future__ import annotations

import csv
import datetime
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import click
import numpy as np
from dataclasses import dataclass, field

from . import __version__, io_formats, metrics_object, metrics_pixel, metrics_text, report_viz
from .geometry import Polygon
from .io_formats import (
    DataError,
    EvalReport,
    PageAnnotation,
    TextLine,
    load_manifest,
    load_pages,
    read_mask_png,
    read_probability_png,
    save_pages,
    write_label_image,
    write_mask_png,
    write_report,
    write_report_csv,
)
from .normalize import NormalizationConfig, naive_label_image, normalize_page
from .raster import (
    PixelConfusion,
    extract_polygons,
    pixel_confusion,
    rasterize,
    remove_small_components,
    resize_nearest,
    threshold as threshold_map,
)
from .synth import SynthSpec, equal_iou_fixture, generate_page, merger_sensitivity_fixture, perturb

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

#: Post-processing defaults: probability cutoff and minimum component area.
DEFAULT_THRESHOLD = 0.7
DEFAULT_MIN_CC = 50
#: Threshold preset matching the low-cutoff recurrent baseline detector.
ARU_NET_THRESHOLD = 0.3
#: Threshold preset matching the patch-based segmenter's post-processing.
DHSEGMENT_THRESHOLD = 0.7

_TIERS = ("pixel", "object", "text")


@dataclass(frozen=True)
class RunConfig:
    """One command invocation, fully resolved.

    Echoed verbatim into every report so a run can be reproduced
    bit-exactly from the report alone.
    """

    command: str
    inputs: dict
    output: str
    tiers: tuple[str, ...] = ()
    threshold: float = DEFAULT_THRESHOLD
    min_cc: int = DEFAULT_MIN_CC
    iou_grid: tuple[float, ...] = metrics_object.IOU_GRID
    report_formats: tuple[str, ...] = ("json", "csv")
    jobs: int = 1
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        payload = {
            "command": self.command,
            "inputs": self.inputs,
            "output": self.output,
            "tiers": list(self.tiers),
            "threshold": self.threshold,
            "min_cc": self.min_cc,
            "iou_grid": list(self.iou_grid),
            "report_formats": list(self.report_formats),
            "jobs": self.jobs,
            "tool_version": __version__,
        }
        payload.update(self.extras)
        return payload


@click.group(name="linekit")
@click.version_option(__version__)
def cli():
    """Normalize text-line polygon annotations and score segmentation
    predictions at pixel, object and recognition level."""


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point with machine-readable exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return EXIT_OK if exc.exit_code == 0 else exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_DATA
    except (DataError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA


def _load_config_defaults(ctx: click.Context, config_path: Optional[Path]) -> None:
    """Fill unset options from a JSON config file (explicit flags win)."""
    if config_path is None:
        return
    try:
        values = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{config_path}: malformed config JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise DataError(f"{config_path}: config must be a JSON object")
    for key, value in values.items():
        name = key.replace("-", "_")
        if name not in ctx.params:
            raise DataError(f"{config_path}: unknown config key {key!r}")
        source = ctx.get_parameter_source(name)
        if source in (click.core.ParameterSource.DEFAULT, click.core.ParameterSource.DEFAULT_MAP):
            ctx.params[name] = value


def _resolve_jobs(jobs: Optional[int]) -> int:
    return max(1, jobs if jobs is not None else 1)


def _run_per_page(worker, units: list, jobs: int) -> list:
    if jobs <= 1 or len(units) <= 1:
        return [worker(u) for u in units]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, units))


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _fmt_threshold(t: float) -> str:
    return f"{t:.2f}"


# --------------------------------------------------------------------------
# normalize


def _normalize_unit(args):
    page, cfg, naive = args
    if naive:
        mask = naive_label_image(page, cfg.target_long_side)
        return page.page_id, None, mask, None
    out_page, mask, log = normalize_page(page, cfg)
    return page.page_id, out_page, mask, log.to_dict()


@cli.command()
@click.argument("pages", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--target-long-side", default=768, show_default=True, type=int, help="Rescale pages so the longer side matches this before processing.")
@click.option("--keep-scale", is_flag=True, help="Skip rescaling and work at the original page size.")
@click.option("--overlap-threshold", default=0.20, show_default=True, type=float)
@click.option("--erosion", "erosion_px", default=1.0, show_default=True, type=float)
@click.option("--bbox", "simplify_to_bbox", is_flag=True, help="Replace polygons by their bounding rectangles first.")
@click.option("--naive", is_flag=True, help="Emit the lossy rasterize-then-resize label images instead of the unification pipeline.")
@click.option("--jobs", type=int, envvar="LINEKIT_JOBS", help="Pages processed in parallel.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="JSON file with option defaults.")
@click.pass_context
def normalize(ctx, pages, output, target_long_side, keep_scale, overlap_threshold,
              erosion_px, simplify_to_bbox, naive, jobs, config_path):
    """Unify line annotations and emit label images plus a modification log."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    target = None if p["keep_scale"] else p["target_long_side"]
    cfg = NormalizationConfig(
        overlap_threshold=p["overlap_threshold"],
        erosion_px=p["erosion_px"],
        target_long_side=target,
        simplify_to_bbox=p["simplify_to_bbox"],
    )
    all_pages = _load_page_files(pages)
    output = Path(p["output"])
    results = _run_per_page(
        _normalize_unit,
        [(page, cfg, p["naive"]) for page in all_pages],
        _resolve_jobs(p["jobs"]),
    )
    results.sort(key=lambda r: r[0])
    out_pages = []
    logs = []
    for page_id, out_page, mask, log in results:
        write_label_image(mask, output / "labels" / f"{page_id}.png")
        if out_page is not None:
            out_pages.append(out_page)
        if log is not None:
            logs.append(log)
    if out_pages:
        save_pages(out_pages, output / "pages.json")
    run = RunConfig(
        command="normalize",
        inputs={"pages": sorted(str(f) for f in pages)},
        output=str(output),
        jobs=_resolve_jobs(p["jobs"]),
        extras={
            "naive": p["naive"],
            "overlap_threshold": cfg.overlap_threshold,
            "erosion_px": cfg.erosion_px,
            "target_long_side": cfg.target_long_side,
            "simplify_to_bbox": cfg.simplify_to_bbox,
        },
    )
    write_report({"config": run.to_dict(), "pages": logs}, output / "normalize_log.json")
    click.echo(f"normalized {len(all_pages)} pages -> {output}")


def _load_page_files(paths: Sequence[Path]) -> list[PageAnnotation]:
    pages: list[PageAnnotation] = []
    seen: set[str] = set()
    for path in paths:
        for page in load_pages(path):
            if page.page_id in seen:
                raise DataError(f"duplicate page_id {page.page_id!r} across input files")
            seen.add(page.page_id)
            pages.append(page)
    return pages


# --------------------------------------------------------------------------
# extract


def _pick_threshold(threshold: Optional[float], aru_net: bool, dhsegment: bool) -> float:
    if aru_net and dhsegment:
        raise click.UsageError("--aru-net and --dhsegment are mutually exclusive")
    if threshold is not None and (aru_net or dhsegment):
        raise click.UsageError("give either an explicit --threshold or a preset, not both")
    if aru_net:
        return ARU_NET_THRESHOLD
    if dhsegment:
        return DHSEGMENT_THRESHOLD
    return DEFAULT_THRESHOLD if threshold is None else threshold


def _page_from_raster(path: Path, kind: str, t: float, min_cc: int) -> PageAnnotation:
    if kind == "probability":
        pmap = read_probability_png(path)
        base = threshold_map(pmap, t)
    else:
        pmap = None
        base = read_mask_png(path)
    cleaned = remove_small_components(base, min_cc)
    polygons = extract_polygons(cleaned)
    lines = []
    for poly in polygons:
        confidence = None
        if pmap is not None:
            covered = rasterize([poly], pmap.width, pmap.height).pixels
            confidence = float(pmap.values[covered].mean()) if covered.any() else 1.0
        lines.append(TextLine(polygon=poly, confidence=confidence))
    return PageAnnotation(
        page_id=path.stem,
        image_width=cleaned.width,
        image_height=cleaned.height,
        lines=lines,
    )


@cli.command()
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Output page JSON file.")
@click.option("--kind", type=click.Choice(["probability", "mask"]), default="probability", show_default=True)
@click.option("-t", "--threshold", type=float, default=None, help=f"Probability cutoff (default {DEFAULT_THRESHOLD}).")
@click.option("--aru-net", is_flag=True, help=f"Preset: threshold {ARU_NET_THRESHOLD}.")
@click.option("--dhsegment", is_flag=True, help=f"Preset: threshold {DHSEGMENT_THRESHOLD}.")
@click.option("--min-cc", default=DEFAULT_MIN_CC, show_default=True, type=int, help="Remove components smaller than this many pixels.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.pass_context
def extract(ctx, images, output, kind, threshold, aru_net, dhsegment, min_cc, config_path):
    """Turn probability maps or binary masks into prediction page JSON
    (threshold, then small-component removal, then contour polygons)."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    t = _pick_threshold(p["threshold"], p["aru_net"], p["dhsegment"])
    pages = [_page_from_raster(Path(f), p["kind"], t, p["min_cc"]) for f in images]
    pages.sort(key=lambda pg: pg.page_id)
    save_pages(pages, p["output"])
    click.echo(f"extracted {sum(len(pg.lines) for pg in pages)} lines from {len(pages)} images -> {p['output']}")


# --------------------------------------------------------------------------
# evaluate


def _evaluate_unit(args):
    gt_page, pred_kind, payload, tiers, t, min_cc = args
    if pred_kind == "pages":
        pred_lines = payload.lines
        pred_mask = None
        if "pixel" in tiers:
            pred_mask = rasterize(
                [l.polygon for l in pred_lines], gt_page.image_width, gt_page.image_height
            )
    else:
        page = _page_from_raster(Path(payload), pred_kind, t, min_cc)
        scale_x = gt_page.image_width / page.image_width
        scale_y = gt_page.image_height / page.image_height
        pred_lines = page.lines
        if (scale_x, scale_y) != (1.0, 1.0):
            pred_lines = [
                TextLine(
                    Polygon(l.polygon.points * np.array([scale_x, scale_y])),
                    l.text,
                    l.confidence,
                )
                for l in pred_lines
            ]
        pred_mask = None
        if "pixel" in tiers:
            full = rasterize(page.polygons, page.image_width, page.image_height)
            pred_mask = resize_nearest(full, gt_page.image_width, gt_page.image_height)

    result: dict = {"page_id": gt_page.page_id}
    if "pixel" in tiers:
        gt_mask = rasterize(gt_page.polygons, gt_page.image_width, gt_page.image_height)
        c = pixel_confusion(pred_mask, gt_mask)
        result["pixel"] = (c.tp, c.fp, c.fn)
    if "object" in tiers:
        detections = metrics_object.detections_from_lines(pred_lines)
        result["object"] = metrics_object.page_matches(detections, gt_page.polygons)
    if "text" in tiers:
        counts = metrics_text.page_error_counts(pred_lines, gt_page.lines)
        stats = metrics_text.line_pairing_stats(pred_lines, gt_page.lines)
        result["text"] = {
            "page_counts": counts,
            "line_counts": {
                t_: metrics_text.threshold_error_counts(stats, t_) for t_ in metrics_object.IOU_GRID
            },
        }
    return result


def _evaluation_units(manifest, gt, pred, tiers, t, min_cc):
    units = []
    if manifest is not None:
        dataset = load_manifest(manifest)
        for item in dataset.items:
            gt_pages = load_pages(item.gt_pages)
            if len(gt_pages) != 1:
                raise DataError(
                    f"{item.gt_pages}: manifest items must reference single-page files "
                    f"(found {len(gt_pages)} pages)"
                )
            gt_page = gt_pages[0]
            if item.pred_pages is not None:
                pred_pages = load_pages(item.pred_pages)
                if len(pred_pages) != 1:
                    raise DataError(f"{item.pred_pages}: expected a single-page prediction file")
                units.append((gt_page, "pages", pred_pages[0], tiers, t, min_cc))
            elif item.pred_mask is not None:
                units.append((gt_page, "mask", str(item.pred_mask), tiers, t, min_cc))
            else:
                item_t = t if item.threshold is None else item.threshold
                units.append((gt_page, "probability", str(item.pred_probability), tiers, item_t, min_cc))
    else:
        gt_pages = {p.page_id: p for p in load_pages(gt)}
        pred_pages = {p.page_id: p for p in load_pages(pred)}
        missing_pred = sorted(set(gt_pages) - set(pred_pages))
        missing_gt = sorted(set(pred_pages) - set(gt_pages))
        if missing_pred or missing_gt:
            raise DataError(
                "page ids do not match: "
                f"missing predictions for {missing_pred}, missing references for {missing_gt}"
            )
        for page_id in sorted(gt_pages):
            units.append((gt_pages[page_id], "pages", pred_pages[page_id], tiers, t, min_cc))
    if not units:
        raise DataError("nothing to evaluate: no pages found")
    ids = [u[0].page_id for u in units]
    duplicates = sorted({i for i in ids if ids.count(i) > 1})
    if duplicates:
        raise DataError(f"duplicate page ids in dataset: {duplicates}")
    return units


def _check_text_available(units) -> None:
    for gt_page, pred_kind, payload, *_ in units:
        if any(l.text is None for l in gt_page.lines):
            raise DataError(
                f"page {gt_page.page_id!r}: reference lines carry no text; "
                "the text tier needs transcriptions (select tiers explicitly to skip it)"
            )
        if pred_kind != "pages" or any(l.text is None for l in payload.lines):
            raise DataError(
                f"page {gt_page.page_id!r}: predictions carry no text; "
                "the text tier needs recognizer output pages (select tiers explicitly to skip it)"
            )


@cli.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Dataset manifest JSON.")
@click.option("--gt", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Reference pages JSON (direct mode).")
@click.option("--pred", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Prediction pages JSON (direct mode).")
@click.option("--tier", "tiers", multiple=True, type=click.Choice(["pixel", "object", "text", "all"]), default=("all",), show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(file_okay=False, path_type=Path), help="Report output directory.")
@click.option("-t", "--threshold", type=float, default=None, help="Probability cutoff for probability-map predictions.")
@click.option("--aru-net", is_flag=True, help=f"Preset: threshold {ARU_NET_THRESHOLD}.")
@click.option("--dhsegment", is_flag=True, help=f"Preset: threshold {DHSEGMENT_THRESHOLD}.")
@click.option("--min-cc", default=DEFAULT_MIN_CC, show_default=True, type=int)
@click.option("--dump-pr-curve", is_flag=True, help="Also write the pooled PR curve as CSV.")
@click.option("--pr-threshold", default=0.5, show_default=True, type=float, help="IoU threshold for the PR curve dump.")
@click.option("--jobs", type=int, envvar="LINEKIT_JOBS", help="Pages processed in parallel.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.pass_context
def evaluate(ctx, manifest, gt, pred, tiers, output, threshold, aru_net, dhsegment,
             min_cc, dump_pr_curve, pr_threshold, jobs, config_path):
    """Score predictions against references and write report.json +
    summary.csv."""
    _load_config_defaults(ctx, config_path)
    p = ctx.params
    manifest, gt, pred = p["manifest"], p["gt"], p["pred"]
    if manifest is None and (gt is None or pred is None):
        raise click.UsageError("provide either --manifest or both --gt and --pred")
    if manifest is not None and (gt is not None or pred is not None):
        raise click.UsageError("--manifest and --gt/--pred are mutually exclusive")
    wanted = set(_TIERS) if "all" in p["tiers"] else set(p["tiers"])
    t = _pick_threshold(p["threshold"], p["aru_net"], p["dhsegment"])
    units = _evaluation_units(manifest, gt, pred, tuple(sorted(wanted)), t, p["min_cc"])
    if "text" in wanted:
        _check_text_available(units)
    results = _run_per_page(_evaluate_unit, units, _resolve_jobs(p["jobs"]))
    results.sort(key=lambda r: r["page_id"])

    run = RunConfig(
        command="evaluate",
        inputs={
            "manifest": str(manifest) if manifest else None,
            "gt": str(gt) if gt else None,
            "pred": str(pred) if pred else None,
        },
        output=str(p["output"]),
        tiers=tuple(sorted(wanted)),
        threshold=t,
        min_cc=p["min_cc"],
        jobs=_resolve_jobs(p["jobs"]),
        extras={"pr_threshold": p["pr_threshold"]},
    )
    report = _assemble_report(results, wanted, run.to_dict())
    output = Path(p["output"])
    write_report(report, output / "report.json")
    write_report_csv(report, output / "summary.csv")
    if p["dump_pr_curve"]:
        if "object" not in wanted:
            raise click.UsageError("--dump-pr-curve needs the object tier")
        _write_pr_curve(results, p["pr_threshold"], output / "pr_curve.csv")
    click.echo(f"evaluated {len(results)} pages -> {output / 'report.json'}")


def _assemble_report(results: list[dict], wanted: set[str], echo: dict) -> EvalReport:
    pixel_section = objects_section = text_section = None

    if "pixel" in wanted:
        per_page = {}
        total = (0, 0, 0)
        for r in results:
            tp, fp, fn = r["pixel"]
            per_page[r["page_id"]] = metrics_pixel.pixel_scores(PixelConfusion(tp, fp, fn)).to_dict()
            total = (total[0] + tp, total[1] + fp, total[2] + fn)
        n = len(results)
        pixel_section = {
            "per_page": per_page,
            "micro": metrics_pixel.pixel_scores(PixelConfusion(*total)).to_dict(),
            "macro": {
                key: sum(page[key] for page in per_page.values()) / n
                for key in ("precision", "recall", "iou", "f1")
            },
        }

    if "object" in wanted:
        page_match_list = [r["object"] for r in results]
        pooled = metrics_object.ap_from_matches(page_match_list)
        per_page = {}
        for r in results:
            single = metrics_object.ap_from_matches([r["object"]])
            per_page[r["page_id"]] = {
                "ap_by_threshold": {_fmt_threshold(k): v for k, v in single.ap_by_threshold.items()},
                "ap_range": single.ap_range,
            }
        objects_section = {
            "per_page": per_page,
            "pooled": {
                "ap_by_threshold": {_fmt_threshold(k): v for k, v in pooled.ap_by_threshold.items()},
                "ap_range": pooled.ap_range,
                "true_positives_by_threshold": {
                    _fmt_threshold(k): v for k, v in pooled.true_positives_by_threshold.items()
                },
                "total_predictions": pooled.total_predictions,
                "total_gt": pooled.total_gt,
            },
            "macro": {
                "ap_by_threshold": {_fmt_threshold(k): v for k, v in pooled.macro_ap_by_threshold.items()},
                "ap_range": pooled.macro_ap_range,
            },
        }

    if "text" in wanted:
        per_page = {}
        page_sums = [0, 0, 0, 0]
        line_sums: dict[float, dict[str, int]] = {
            t: {k: 0 for k in ("char_errors", "token_errors", "matched_chars", "matched_pairs",
                               "total_chars", "total_tokens", "total_gt", "total_pred")}
            for t in metrics_object.IOU_GRID
        }
        for r in results:
            cd, cl, td, tl = r["text"]["page_counts"]
            page_sums = [page_sums[0] + cd, page_sums[1] + cl, page_sums[2] + td, page_sums[3] + tl]
            by_threshold = {}
            for t, counts in r["text"]["line_counts"].items():
                by_threshold[_fmt_threshold(t)] = metrics_text.report_from_counts(counts).to_dict()
                for key, value in counts.items():
                    line_sums[t][key] += value
            reports = list(by_threshold.values())
            per_page[r["page_id"]] = {
                "cer_page": cd / max(cl, 1),
                "wer_page": td / max(tl, 1),
                "cer_line_by_threshold": by_threshold,
                "cer_line_range": sum(rep["cer"] for rep in reports) / len(reports),
                "wer_line_range": sum(rep["wer"] for rep in reports) / len(reports),
            }
        micro_line = {
            _fmt_threshold(t): metrics_text.report_from_counts(counts).to_dict()
            for t, counts in line_sums.items()
        }
        micro_reports = list(micro_line.values())
        n = len(results)
        text_section = {
            "per_page": per_page,
            "aggregate_micro": {
                "cer_page": page_sums[0] / max(page_sums[1], 1),
                "wer_page": page_sums[2] / max(page_sums[3], 1),
                "cer_line_by_threshold": micro_line,
                "cer_line_range": sum(rep["cer"] for rep in micro_reports) / len(micro_reports),
                "wer_line_range": sum(rep["wer"] for rep in micro_reports) / len(micro_reports),
            },
            "aggregate_macro": {
                "cer_page": sum(p_["cer_page"] for p_ in per_page.values()) / n,
                "wer_page": sum(p_["wer_page"] for p_ in per_page.values()) / n,
                "cer_line_range": sum(p_["cer_line_range"] for p_ in per_page.values()) / n,
            },
        }

    return EvalReport(
        tool_version=__version__,
        config=echo,
        timestamp=_timestamp(),
        num_pages=len(results),
        pixel=pixel_section,
        objects=objects_section,
        text=text_section,
    )


def _write_pr_curve(results: list[dict], t: float, path: Path) -> None:
    pooled = []
    total_gt = 0
    for page_index, r in enumerate(results):
        matches = r["object"]
        total_gt += matches.gt_count
        for confidence, source_rank, iou in matches.records:
            pooled.append((confidence, page_index, source_rank, iou))
    pooled.sort(key=lambda rec: (-rec[0], rec[1], rec[2]))
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rank", "confidence", "true_positive", "precision", "recall"])
        tp = 0
        for k, (confidence, _, _, iou) in enumerate(pooled, start=1):
            flag = 1 if iou > t else 0
            tp += flag
            recall = tp / total_gt if total_gt else 0.0
            writer.writerow([k, confidence, flag, tp / k, recall])


# --------------------------------------------------------------------------
# visualize

#: Outline palette: references drawn first, predictions on top.
OUTLINE_GT_COLOR = (0, 170, 0)
OUTLINE_PRED_COLOR = (204, 0, 0)


@cli.command()
@click.option("--gt", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--pred", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("-o", "--output", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--overlay/--no-overlay", default=True, show_default=True, help="Write pixel-confusion overlays.")
@click.option("--outlines/--no-outlines", default=True, show_default=True, help="Write polygon outline renderings.")
def visualize(gt, pred, output, overlay, outlines):
    """Render confusion overlays (black/green/cyan/red) and polygon outlines
    for matched page pairs."""
    gt_pages = {p.page_id: p for p in load_pages(gt)}
    pred_pages = {p.page_id: p for p in load_pages(pred)}
    missing = sorted(set(gt_pages) ^ set(pred_pages))
    if missing:
        raise DataError(f"page ids do not match between --gt and --pred: {missing}")
    output = Path(output)
    for page_id in sorted(gt_pages):
        g = gt_pages[page_id]
        q = pred_pages[page_id]
        if overlay:
            gt_mask = rasterize(g.polygons, g.image_width, g.image_height)
            pred_mask = rasterize(q.polygons, g.image_width, g.image_height)
            report_viz.write_image(
                report_viz.confusion_overlay(pred_mask, gt_mask),
                output / f"{page_id}_overlay.png",
            )
        if outlines:
            image = report_viz.draw_polygons(
                g.image_width,
                g.image_height,
                [(g.polygons, OUTLINE_GT_COLOR), (q.polygons, OUTLINE_PRED_COLOR)],
            )
            report_viz.write_image(image, output / f"{page_id}_outlines.png")
    click.echo(f"rendered {len(gt_pages)} pages -> {output}")


# --------------------------------------------------------------------------
# synth


@cli.command("synth")
@click.option("--pages", "page_count", default=1, show_default=True, type=int)
@click.option("--lines", default=10, show_default=True, type=int)
@click.option("--width", default=800, show_default=True, type=int)
@click.option("--height", default=600, show_default=True, type=int)
@click.option("--line-height", default=30, show_default=True, type=int)
@click.option("--gap", default=10, show_default=True, type=int)
@click.option("--margin", default=20, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--perturb", "perturb_ops", multiple=True,
              help="Perturbation applied to the prediction copy, e.g. merge:0,1 | split:2 | thicken:1.5 | shift:3,-2 | drop:0. Repeatable.")
@click.option("--fixture", type=click.Choice(["equal-iou", "merger"]), default=None,
              help="Emit a named metric-contrast fixture instead of plain pages.")
@click.option("-o", "--output", required=True, type=click.Path(file_okay=False, path_type=Path))
def synth_command(page_count, lines, width, height, line_height, gap, margin, seed,
                  perturb_ops, fixture, output):
    """Generate deterministic synthetic pages (and optional perturbed
    predictions) with their rasterized masks."""
    output = Path(output)
    if fixture == "equal-iou":
        fx = equal_iou_fixture(seed)
        named = {"ground_truth": fx.ground_truth, "thickened": fx.thickened, "merged": fx.merged}
    elif fixture == "merger":
        fx = merger_sensitivity_fixture(seed)
        named = {"ground_truth": fx.ground_truth, "baseline": fx.baseline, "merged": fx.merged}
    else:
        named = None
    if named is not None:
        for name, page in named.items():
            save_pages([page], output / f"{name}.json")
            mask = rasterize(page.polygons, page.image_width, page.image_height)
            write_mask_png(mask, output / "masks" / f"{name}.png")
        click.echo(f"wrote {fixture} fixture -> {output}")
        return

    gt_pages = []
    pred_pages = []
    for k in range(page_count):
        spec = SynthSpec(
            width=width, height=height, line_count=lines, line_height=line_height,
            gap=gap, margin=margin, seed=seed + k,
        )
        page = generate_page(spec, page_id=f"synth-{seed + k:05d}")
        gt_pages.append(page)
        if perturb_ops:
            perturbed = page
            for op in perturb_ops:
                perturbed = perturb(perturbed, op)
            pred_pages.append(perturbed)
    save_pages(gt_pages, output / "pages.json")
    for page in gt_pages:
        mask = rasterize(page.polygons, page.image_width, page.image_height)
        write_mask_png(mask, output / "masks" / f"{page.page_id}.png")
    if pred_pages:
        save_pages(pred_pages, output / "predictions.json")
    click.echo(f"wrote {len(gt_pages)} synthetic pages -> {output}")


if __name__ == "__main__":
    sys.exit(main())
