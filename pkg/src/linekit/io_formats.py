"""Interchange formats: page annotation JSON, PAGE XML import, dataset
manifests, PNG masks/probability maps and report emission.

The native page schema is one JSON object per page::

    {
      "page_id": "p0001",
      "image_width": 1200,
      "image_height": 900,
      "lines": [
        {"polygon": [[x, y], ...], "text": "optional", "confidence": 0.9},
        ...
      ]
    }

A file holds either a single page object or a list of them. Coordinates are
stored as reals; out-of-bounds vertices are clamped on load and logged.
"""
from __future__ import annotations

import csv
import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from PIL import Image

from .geometry import Polygon
from .raster import Mask, ProbabilityMap

logger = logging.getLogger(__name__)


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass
class TextLine:
    """One annotated or predicted text line."""

    polygon: Polygon
    text: Optional[str] = None
    confidence: Optional[float] = None

    def __post_init__(self):
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise DataError(f"line confidence must lie in [0, 1], got {self.confidence}")


@dataclass
class PageAnnotation:
    """An ordered list of text lines plus the page image dimensions."""

    page_id: str
    image_width: int
    image_height: int
    lines: list[TextLine] = field(default_factory=list)

    def __post_init__(self):
        if self.image_width < 1 or self.image_height < 1:
            raise DataError(
                f"page {self.page_id!r}: image dimensions must be >= 1, "
                f"got {self.image_width}x{self.image_height}"
            )

    @property
    def polygons(self) -> list[Polygon]:
        return [line.polygon for line in self.lines]


@dataclass(frozen=True)
class ManifestItem:
    """One ground-truth page paired with exactly one prediction source."""

    gt_pages: Path
    pred_pages: Optional[Path] = None
    pred_mask: Optional[Path] = None
    pred_probability: Optional[Path] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        sources = [self.pred_pages, self.pred_mask, self.pred_probability]
        if sum(s is not None for s in sources) != 1:
            raise DataError(
                f"manifest item for {self.gt_pages}: exactly one prediction source "
                "(pred_pages | pred_mask | pred_probability) is required"
            )


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    items: tuple[ManifestItem, ...]


@dataclass
class EvalReport:
    """Evaluation results plus everything needed to reproduce the run."""

    tool_version: str
    config: dict
    timestamp: str
    num_pages: int
    pixel: Optional[dict] = None
    objects: Optional[dict] = None
    text: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "config": self.config,
            "timestamp": self.timestamp,
            "num_pages": self.num_pages,
            "pixel": self.pixel,
            "objects": self.objects,
            "text": self.text,
        }


def load_pages(path: Union[str, Path]) -> list[PageAnnotation]:
    """Read page annotations from a JSON file, validating the schema.

    Out-of-bounds polygon vertices are clamped into the page and logged;
    duplicate page ids, missing dimensions and malformed JSON raise
    DataError.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON: {exc}") from exc
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list):
        raise DataError(f"{path}: expected a page object or a list of pages")
    pages = []
    seen: set[str] = set()
    for index, entry in enumerate(raw):
        page = _page_from_dict(entry, f"{path}[{index}]")
        if page.page_id in seen:
            raise DataError(f"{path}: duplicate page_id {page.page_id!r}")
        seen.add(page.page_id)
        pages.append(page)
    return pages


def _page_from_dict(entry: Any, context: str) -> PageAnnotation:
    if not isinstance(entry, dict):
        raise DataError(f"{context}: page entry must be an object")
    for key in ("page_id", "image_width", "image_height"):
        if key not in entry:
            raise DataError(f"{context}: missing required field {key!r}")
    page_id = str(entry["page_id"])
    try:
        width = int(entry["image_width"])
        height = int(entry["image_height"])
    except (TypeError, ValueError) as exc:
        raise DataError(f"{context}: image dimensions must be integers") from exc
    lines = []
    for line_index, line_entry in enumerate(entry.get("lines", [])):
        coords = line_entry.get("polygon")
        if not isinstance(coords, list) or len(coords) < 3:
            raise DataError(
                f"page {page_id!r} line {line_index}: polygon must list >= 3 [x, y] points"
            )
        pts = np.asarray(coords, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DataError(f"page {page_id!r} line {line_index}: polygon points must be [x, y] pairs")
        clamped = np.clip(pts, [0.0, 0.0], [float(width), float(height)])
        n_clamped = int((clamped != pts).any(axis=1).sum())
        if n_clamped:
            logger.warning(
                "page %s line %d: clamped %d out-of-bounds vertices", page_id, line_index, n_clamped
            )
        try:
            polygon = Polygon(clamped)
        except ValueError as exc:
            raise DataError(f"page {page_id!r} line {line_index}: {exc}") from exc
        text = line_entry.get("text")
        if text is not None and not isinstance(text, str):
            raise DataError(f"page {page_id!r} line {line_index}: text must be a string")
        confidence = line_entry.get("confidence")
        if confidence is not None:
            confidence = float(confidence)
        try:
            lines.append(TextLine(polygon=polygon, text=text, confidence=confidence))
        except DataError as exc:
            raise DataError(f"page {page_id!r} line {line_index}: {exc}") from exc
    return PageAnnotation(page_id=page_id, image_width=width, image_height=height, lines=lines)


def page_to_dict(page: PageAnnotation) -> dict:
    lines = []
    for line in page.lines:
        entry: dict[str, Any] = {"polygon": line.polygon.to_list()}
        if line.text is not None:
            entry["text"] = line.text
        if line.confidence is not None:
            entry["confidence"] = line.confidence
        lines.append(entry)
    return {
        "page_id": page.page_id,
        "image_width": page.image_width,
        "image_height": page.image_height,
        "lines": lines,
    }


def save_pages(pages: Sequence[PageAnnotation], path: Union[str, Path]) -> None:
    """Write pages as JSON; load_pages(save_pages(x)) round-trips exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = [page_to_dict(p) for p in pages]
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def import_pagexml(path: Union[str, Path]) -> list[PageAnnotation]:
    """Import TextLine polygons (and transcriptions) from a PAGE XML file.

    Only the TextLine/Coords/TextEquiv subset is read; lines with
    unparseable coordinates are skipped with a warning.
    """
    path = Path(path)
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise DataError(f"{path}: malformed XML: {exc}") from exc
    pages = []
    page_elements = [el for el in root.iter() if _local_name(el) == "Page"]
    if not page_elements:
        raise DataError(f"{path}: no Page element found")
    for page_index, page_el in enumerate(page_elements):
        width = page_el.get("imageWidth")
        height = page_el.get("imageHeight")
        if width is None or height is None:
            raise DataError(f"{path}: Page element lacks imageWidth/imageHeight")
        page_id = path.stem if len(page_elements) == 1 else f"{path.stem}-{page_index}"
        lines = []
        for line_index, line_el in enumerate(el for el in page_el.iter() if _local_name(el) == "TextLine"):
            coords_el = next((c for c in line_el if _local_name(c) == "Coords"), None)
            points_attr = coords_el.get("points") if coords_el is not None else None
            pts = _parse_points(points_attr) if points_attr else None
            if pts is None or len(pts) < 3:
                logger.warning("page %s line %d: unparseable coordinates, skipped", page_id, line_index)
                continue
            try:
                polygon = Polygon(pts)
            except ValueError:
                logger.warning("page %s line %d: degenerate coordinates, skipped", page_id, line_index)
                continue
            lines.append(TextLine(polygon=polygon, text=_line_text(line_el)))
        pages.append(
            PageAnnotation(
                page_id=page_id,
                image_width=int(width),
                image_height=int(height),
                lines=lines,
            )
        )
    return pages


def _local_name(element: ET.Element) -> str:
    tag = element.tag
    return tag.rsplit("}", 1)[-1] if "}" in tag else tag


def _parse_points(attr: str) -> Optional[list[tuple[float, float]]]:
    pts = []
    for token in attr.split():
        parts = token.split(",")
        if len(parts) != 2:
            return None
        try:
            pts.append((float(parts[0]), float(parts[1])))
        except ValueError:
            return None
    return pts


def _line_text(line_el: ET.Element) -> Optional[str]:
    for child in line_el:
        if _local_name(child) == "TextEquiv":
            for sub in child.iter():
                if _local_name(sub) == "Unicode":
                    return sub.text or ""
    return None


def load_manifest(path: Union[str, Path]) -> DatasetManifest:
    """Read a dataset manifest; relative paths resolve against its location."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(raw, dict) or "items" not in raw:
        raise DataError(f"{path}: manifest must be an object with an 'items' list")
    base = path.parent
    items = []
    for index, entry in enumerate(raw["items"]):
        def _resolve(key: str) -> Optional[Path]:
            value = entry.get(key)
            return (base / value) if value is not None else None

        if "gt" not in entry:
            raise DataError(f"{path} item {index}: missing 'gt'")
        items.append(
            ManifestItem(
                gt_pages=base / entry["gt"],
                pred_pages=_resolve("pred_pages"),
                pred_mask=_resolve("pred_mask"),
                pred_probability=_resolve("pred_probability"),
                threshold=entry.get("threshold"),
            )
        )
    return DatasetManifest(name=str(raw.get("name", path.stem)), items=tuple(items))


def write_mask_png(mask: Mask, path: Union[str, Path]) -> None:
    """Write a binary mask as an 8-bit PNG with values 0/255."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.where(mask.pixels, 255, 0).astype(np.uint8), mode="L").save(path)


def read_mask_png(path: Union[str, Path]) -> Mask:
    """Read a binary mask PNG; any value above 127 counts as foreground."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return Mask(arr > 127)


def write_probability_png(pmap: ProbabilityMap, path: Union[str, Path]) -> None:
    """Write a probability map as 8-bit grayscale (value = round(p * 255))."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.rint(pmap.values * 255.0).astype(np.uint8), mode="L").save(path)


def read_probability_png(path: Union[str, Path]) -> ProbabilityMap:
    """Read an 8-bit grayscale PNG mapped linearly onto [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return ProbabilityMap(arr.astype(float) / 255.0)


def write_label_image(mask: Mask, path: Union[str, Path]) -> None:
    """Alias for write_mask_png; label images are plain binary masks."""
    write_mask_png(mask, path)


def write_report(report: Union[EvalReport, dict], path: Union[str, Path]) -> None:
    """Write a report as deterministic JSON (sorted keys, fixed layout)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict() if isinstance(report, EvalReport) else report
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


_CSV_COLUMNS = [
    "page_id",
    "pixel_precision",
    "pixel_recall",
    "pixel_iou",
    "pixel_f1",
    "ap_50",
    "ap_75",
    "ap_range",
    "cer_page",
    "cer_line_50",
    "matched_char_fraction_50",
]


def write_report_csv(report: Union[EvalReport, dict], path: Union[str, Path]) -> None:
    """Flat one-row-per-page summary of the headline metrics."""
    payload = report.to_dict() if isinstance(report, EvalReport) else report
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    pixel = payload.get("pixel") or {}
    objects = payload.get("objects") or {}
    text = payload.get("text") or {}
    page_ids: set[str] = set()
    for section in (pixel, objects, text):
        page_ids.update((section.get("per_page") or {}).keys())

    def _row(page_id: str, px: dict, ob: dict, tx: dict) -> list:
        return [
            page_id,
            _cell(px, "precision"),
            _cell(px, "recall"),
            _cell(px, "iou"),
            _cell(px, "f1"),
            _cell(ob.get("ap_by_threshold", {}), "0.50"),
            _cell(ob.get("ap_by_threshold", {}), "0.75"),
            _cell(ob, "ap_range"),
            _cell(tx, "cer_page"),
            _cell(tx.get("cer_line_by_threshold", {}).get("0.50", {}), "cer"),
            _cell(tx.get("cer_line_by_threshold", {}).get("0.50", {}), "matched_char_fraction"),
        ]

    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(_CSV_COLUMNS)
        for page_id in sorted(page_ids):
            writer.writerow(
                _row(
                    page_id,
                    (pixel.get("per_page") or {}).get(page_id, {}),
                    (objects.get("per_page") or {}).get(page_id, {}),
                    (text.get("per_page") or {}).get(page_id, {}),
                )
            )
        if pixel.get("micro"):
            writer.writerow(_row("aggregate_micro", pixel["micro"], objects.get("pooled", {}), text.get("aggregate_micro", {})))
        if pixel.get("macro"):
            writer.writerow(_row("aggregate_macro", pixel["macro"], objects.get("macro", {}), text.get("aggregate_macro", {})))


def _cell(mapping: dict, key: str):
    value = mapping.get(key)
    return "" if value is None else value
