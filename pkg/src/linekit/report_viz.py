"""Diagnostic renderings: pixel confusion overlays and polygon outlines."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import numpy as np
from PIL import Image, ImageDraw

from .geometry import Polygon
from .raster import Mask

# Fixed overlay palette: correctly predicted foreground is black, correctly
# predicted background green, false positives cyan, false negatives red.
COLOR_TP = (0, 0, 0)
COLOR_TN = (0, 255, 0)
COLOR_FP = (0, 255, 255)
COLOR_FN = (255, 0, 0)


def confusion_overlay(pred: Mask, gt: Mask) -> np.ndarray:
    """Color-coded per-pixel comparison of a prediction against a reference.

    Returns an (h, w, 3) uint8 array where every pixel carries exactly one
    of the four palette colors; the color counts equal the pixel confusion
    counts by construction.
    """
    if pred.pixels.shape != gt.pixels.shape:
        raise ValueError(
            f"mask dimensions differ: prediction {pred.width}x{pred.height}, "
            f"reference {gt.width}x{gt.height}"
        )
    out = np.empty((gt.height, gt.width, 3), dtype=np.uint8)
    out[pred.pixels & gt.pixels] = COLOR_TP
    out[~pred.pixels & ~gt.pixels] = COLOR_TN
    out[pred.pixels & ~gt.pixels] = COLOR_FP
    out[~pred.pixels & gt.pixels] = COLOR_FN
    return out


def draw_polygons(
    width: int,
    height: int,
    layers: Sequence[tuple[Sequence[Polygon], tuple[int, int, int]]],
    line_width: int = 2,
    fill_alpha: float = 0.0,
    background: tuple[int, int, int] = (255, 255, 255),
) -> np.ndarray:
    """Render polygon outlines (optionally with a translucent fill).

    Layers are drawn in order, later layers over earlier ones. Returns an
    (h, w, 3) uint8 array.
    """
    if not 0.0 <= fill_alpha <= 1.0:
        raise ValueError(f"fill_alpha must lie in [0, 1], got {fill_alpha}")
    image = Image.new("RGB", (width, height), background)
    for polygons, color in layers:
        if fill_alpha > 0.0:
            stencil = Image.new("L", (width, height), 0)
            stencil_draw = ImageDraw.Draw(stencil)
            for poly in polygons:
                stencil_draw.polygon([tuple(p) for p in poly.points], fill=int(round(fill_alpha * 255)))
            image = Image.composite(Image.new("RGB", (width, height), color), image, stencil)
        draw = ImageDraw.Draw(image)
        for poly in polygons:
            pts = [tuple(p) for p in poly.points]
            draw.line(pts + [pts[0]], fill=color, width=line_width, joint="curve")
    return np.asarray(image)


def write_image(pixels: np.ndarray, path: Union[str, Path]) -> None:
    """Write an RGB uint8 array as PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels, mode="RGB").save(path)
