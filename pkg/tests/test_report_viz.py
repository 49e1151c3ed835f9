import numpy as np
import pytest

from linekit.geometry import rectangle
from linekit.raster import Mask, pixel_confusion, rasterize
from linekit.report_viz import (
    COLOR_FN,
    COLOR_FP,
    COLOR_TN,
    COLOR_TP,
    confusion_overlay,
    draw_polygons,
)


def color_count(image, color):
    return int(np.all(image == np.array(color, np.uint8), axis=-1).sum())


class TestConfusionOverlay:
    def test_identical_masks_only_black_and_green(self):
        m = rasterize([rectangle(0, 0, 5, 5)], 10, 10)
        overlay = confusion_overlay(m, m)
        assert color_count(overlay, COLOR_TP) == m.foreground_count
        assert color_count(overlay, COLOR_TN) == 100 - m.foreground_count
        assert color_count(overlay, COLOR_FP) == 0
        assert color_count(overlay, COLOR_FN) == 0

    def test_empty_prediction_paints_reference_red(self):
        gt = rasterize([rectangle(0, 0, 4, 4)], 8, 8)
        overlay = confusion_overlay(Mask.blank(8, 8), gt)
        assert color_count(overlay, COLOR_FN) == gt.foreground_count
        assert color_count(overlay, COLOR_FP) == 0

    def test_color_counts_match_confusion_exactly(self):
        rng = np.random.RandomState(14)
        for _ in range(10):
            pred = Mask(rng.rand(12, 17) > 0.5)
            gt = Mask(rng.rand(12, 17) > 0.5)
            overlay = confusion_overlay(pred, gt)
            c = pixel_confusion(pred, gt)
            assert color_count(overlay, COLOR_TP) == c.tp
            assert color_count(overlay, COLOR_FP) == c.fp
            assert color_count(overlay, COLOR_FN) == c.fn
            covered = sum(color_count(overlay, col) for col in (COLOR_TP, COLOR_TN, COLOR_FP, COLOR_FN))
            assert covered == 12 * 17

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            confusion_overlay(Mask.blank(3, 3), Mask.blank(4, 4))


class TestDrawPolygons:
    def test_empty_layers_blank_canvas(self):
        image = draw_polygons(20, 10, [])
        assert image.shape == (10, 20, 3)
        assert (image == 255).all()

    def test_outline_rendered_in_bounds(self):
        image = draw_polygons(30, 30, [([rectangle(5, 5, 25, 25)], (255, 0, 0))])
        assert color_count(image, (255, 0, 0)) > 0

    def test_later_layer_drawn_on_top(self):
        square = [rectangle(5, 5, 25, 25)]
        image = draw_polygons(30, 30, [(square, (255, 0, 0)), (square, (0, 0, 255))])
        assert color_count(image, (0, 0, 255)) > 0
        assert color_count(image, (255, 0, 0)) == 0

    def test_translucent_fill(self):
        image = draw_polygons(20, 20, [([rectangle(2, 2, 18, 18)], (0, 0, 255))], fill_alpha=0.5)
        interior = image[10, 10]
        assert interior.tolist() not in ([255, 255, 255], [0, 0, 255])

    def test_deterministic(self):
        layers = [([rectangle(1, 1, 15, 9)], (10, 200, 30))]
        a = draw_polygons(20, 12, layers, fill_alpha=0.3)
        b = draw_polygons(20, 12, layers, fill_alpha=0.3)
        assert np.array_equal(a, b)
