"""Sliding-window crop search and the hybrid composition metric."""

import numpy as np
import pytest

from vphoto.cropsearch import (
    CropSearchGrid,
    CropWindow,
    ScoredCrop,
    crop_image,
    enumerate_windows,
    hybrid_crop_score,
    iou,
    search_crops,
    search_crops_multi,
    vertical_sweep,
)
from vphoto.raster import RasterImage

from conftest import StubScorer


def brightness_scorer():
    return StubScorer(lambda img: float(img.pixels.mean()))


def constant_scorer(value=0.5):
    return StubScorer(lambda img: value)


class TestCropWindow:
    def test_containment_enforced(self):
        with pytest.raises(ValueError):
            CropWindow(10, 0, 60, 60, 64, 64)

    def test_minimum_size_enforced(self):
        with pytest.raises(ValueError):
            CropWindow(0, 0, 8, 8, 64, 64)

    def test_iou_known_values(self):
        a = CropWindow(0, 0, 32, 32, 64, 64)
        assert iou(a, a) == 1.0
        b = CropWindow(32, 32, 32, 32, 64, 64)
        assert iou(a, b) == 0.0
        c = CropWindow(0, 16, 32, 32, 64, 64)
        assert iou(a, c) == pytest.approx((32 * 16) / (2 * 32 * 32 - 32 * 16))


class TestScoredCrop:
    def test_hybrid_invariant_enforced(self):
        w = CropWindow(0, 0, 32, 32, 64, 64)
        ScoredCrop(w, 0.5, 0.8, 0.6, 0.7)
        with pytest.raises(ValueError):
            ScoredCrop(w, 0.5, 0.8, 0.6, 0.9)


class TestHybridScore:
    def test_endpoints(self):
        img = RasterImage.constant(16, 16, (0.25, 0.25, 0.25))
        comp = constant_scorer(0.8)
        overall = constant_scorer(0.6)
        assert hybrid_crop_score(img, 1.0, comp, overall) == pytest.approx(0.8)
        assert hybrid_crop_score(img, 0.0, comp, overall) == pytest.approx(0.6)

    def test_midpoint_blend(self):
        img = RasterImage.constant(16, 16, (0.25, 0.25, 0.25))
        got = hybrid_crop_score(img, 0.5, constant_scorer(0.8), constant_scorer(0.6))
        assert got == pytest.approx(0.7)

    def test_weight_validated(self):
        img = RasterImage.constant(16, 16)
        with pytest.raises(ValueError):
            hybrid_crop_score(img, 1.5, constant_scorer(), constant_scorer())


class TestEnumerateWindows:
    def test_scan_order_larger_first(self):
        grid = CropSearchGrid()
        windows = enumerate_windows(64, 64, grid)
        assert windows, "expected a nonempty grid"
        areas = [w.area for w in windows]
        assert areas == sorted(areas, reverse=True)

    def test_within_size_scan_order_is_row_major(self):
        grid = CropSearchGrid(width_fractions=(0.5,), aspect_ratios=(1.0,))
        windows = enumerate_windows(64, 64, grid)
        coords = [(w.y, w.x) for w in windows]
        assert coords == sorted(coords)

    def test_edge_positions_included(self):
        grid = CropSearchGrid(width_fractions=(0.5,), aspect_ratios=(1.0,))
        windows = enumerate_windows(64, 64, grid)
        xs = {w.x for w in windows}
        ys = {w.y for w in windows}
        assert 0 in xs and 32 in xs
        assert 0 in ys and 32 in ys


class TestSearchCrops:
    def test_constant_scorer_returns_scan_order_survivors(self):
        rng = np.random.default_rng(80)
        img = RasterImage(rng.uniform(0, 1, (64, 64, 3)))
        grid = CropSearchGrid()
        result = search_crops(img, 0.5, 3, grid, constant_scorer(), constant_scorer())
        # Oracle: replicate the greedy scan with equal scores.
        windows = enumerate_windows(64, 64, grid)
        kept = []
        for w in windows:
            if all(iou(w, k) <= grid.iou_threshold for k in kept):
                kept.append(w)
            if len(kept) == 3:
                break
        assert [c.window for c in result.crops] == kept

    def test_finds_planted_bright_region(self):
        px = np.full((64, 64, 3), 0.05)
        px[40:62, 6:28] = 0.95  # bright block off-center
        img = RasterImage(px)
        grid = CropSearchGrid()
        scorer = brightness_scorer()
        result = search_crops(img, 1.0, 1, grid, scorer, constant_scorer())
        top = result.crops[0].window
        # Exhaustive oracle over the same grid.
        windows = enumerate_windows(64, 64, grid)
        best = max(
            windows,
            key=lambda w: crop_image(img, w).pixels.mean(),
        )
        assert (top.x, top.y, top.w, top.h) == (best.x, best.y, best.w, best.h)
        # The winning window must cover the bright block's center.
        assert top.x <= 17 <= top.x + top.w
        assert top.y <= 51 <= top.y + top.h

    def test_short_count_flagged(self):
        img = RasterImage.constant(64, 64, (0.5, 0.5, 0.5))
        grid = CropSearchGrid(width_fractions=(1.0,), aspect_ratios=(1.0,))
        result = search_crops(img, 0.5, 5, grid, constant_scorer(), constant_scorer())
        assert result.short_count
        assert len(result.crops) == 1

    def test_deterministic(self):
        rng = np.random.default_rng(81)
        img = RasterImage(rng.uniform(0, 1, (64, 64, 3)))
        grid = CropSearchGrid()
        a = search_crops(img, 0.5, 3, grid, brightness_scorer(), constant_scorer())
        b = search_crops(img, 0.5, 3, grid, brightness_scorer(), constant_scorer())
        assert [c.window for c in a.crops] == [c.window for c in b.crops]
        assert [c.hybrid_score for c in a.crops] == [c.hybrid_score for c in b.crops]

    def test_sorted_by_hybrid_score(self):
        rng = np.random.default_rng(82)
        img = RasterImage(rng.uniform(0, 1, (64, 64, 3)))
        result = search_crops(
            img, 0.7, 5, CropSearchGrid(), brightness_scorer(), brightness_scorer()
        )
        scores = [c.hybrid_score for c in result.crops]
        assert scores == sorted(scores, reverse=True)

    def test_weight_endpoints_rank_like_single_scorer(self):
        # c=1 ranks by composition alone, c=0 by the overall scorer alone.
        rng = np.random.default_rng(83)
        img = RasterImage(rng.uniform(0, 1, (64, 64, 3)))
        grid = CropSearchGrid()
        comp = brightness_scorer()
        overall = StubScorer(lambda im: float(im.pixels.std()))
        by_c = search_crops_multi(img, (0.0, 1.0), 3, grid, comp, overall)
        top_comp = search_crops(img, 1.0, 3, grid, comp, constant_scorer())
        top_overall = search_crops(img, 0.0, 3, grid, constant_scorer(), overall)
        assert [c.window for c in by_c[1.0].crops] == [c.window for c in top_comp.crops]
        assert [c.window for c in by_c[0.0].crops] == [c.window for c in top_overall.crops]

    def test_no_feasible_window_is_error(self):
        img = RasterImage.constant(20, 20)
        grid = CropSearchGrid(width_fractions=(0.5,), aspect_ratios=(4.0,))
        with pytest.raises(ValueError):
            search_crops(img, 0.5, 1, grid, constant_scorer(), constant_scorer())


class TestVerticalSweep:
    def test_flat_curves_on_constant_image(self):
        img = RasterImage.constant(64, 64, (0.4, 0.4, 0.4))
        rows = vertical_sweep(img, {"a": brightness_scorer()}, n_positions=6)
        values = [r["a"] for r in rows]
        assert max(values) - min(values) < 1e-12

    def test_window_geometry_matches_spec(self):
        img = RasterImage.constant(64, 64)
        rows = vertical_sweep(img, {"a": constant_scorer()}, width_fraction=0.5, aspect=1.8)
        # Window is half the image width at aspect 1.8, centered horizontally.
        assert rows[0]["y"] == 0
        assert rows[-1]["y"] == 64 - round(32 / 1.8)

    def test_curves_match_pointwise_re_evaluation(self):
        rng = np.random.default_rng(84)
        img = RasterImage(rng.uniform(0, 1, (64, 64, 3)))
        scorer = brightness_scorer()
        rows = vertical_sweep(img, {"s": scorer}, n_positions=5, train_size=32)
        from vphoto.raster import resize_bilinear

        w = round(0.5 * 64)
        h = round(w / 1.8)
        x = (64 - w) // 2
        for row in rows:
            window = CropWindow(x, row["y"], w, h, 64, 64)
            patch = resize_bilinear(crop_image(img, window), 32, 32)
            assert row["s"] == pytest.approx(scorer.score(patch), abs=1e-12)
