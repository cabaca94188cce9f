"""Composition search: sliding-window crop candidates under a hybrid metric.

A window's value is a blend of the composition score and the overall score,
weighted by a constant c: with c=1 composition alone decides, with c=0 the
overall scorer does.  The search scans a deterministic grid of window sizes,
aspect ratios and positions, suppresses near-duplicates, and returns the top
windows in score order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .learner import extract_features, predict_features
from .raster import RasterImage, crop, resize_bilinear

log = logging.getLogger(__name__)

MIN_CROP_SIZE = 16


@dataclass(frozen=True)
class CropWindow:
    """Rectangle fully contained in its source image."""

    x: int
    y: int
    w: int
    h: int
    src_w: int
    src_h: int

    def __post_init__(self) -> None:
        if self.w < MIN_CROP_SIZE or self.h < MIN_CROP_SIZE:
            raise ValueError(f"window {self.w}x{self.h} below the {MIN_CROP_SIZE}px minimum")
        if self.x < 0 or self.y < 0 or self.x + self.w > self.src_w or self.y + self.h > self.src_h:
            raise ValueError("window exceeds its source bounds")

    @property
    def area(self) -> int:
        return self.w * self.h


def iou(a: CropWindow, b: CropWindow) -> float:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def crop_image(img: RasterImage, window: CropWindow) -> RasterImage:
    return crop(img, window.x, window.y, window.w, window.h)


@dataclass(frozen=True)
class ScoredCrop:
    window: CropWindow
    weight: float  # the composition-vs-overall blend constant c
    composition_score: float
    overall_score: float
    hybrid_score: float

    def __post_init__(self) -> None:
        expected = self.weight * self.composition_score + (1.0 - self.weight) * self.overall_score
        if abs(self.hybrid_score - expected) > 1e-12:
            raise ValueError("hybrid score does not match its blend of component scores")


def hybrid_crop_score(img: RasterImage, c: float, composition_scorer, overall_scorer) -> float:
    """c * composition + (1 - c) * overall on the given image."""
    if not 0.0 <= c <= 1.0:
        raise ValueError("composition weight must lie in [0, 1]")
    return c * composition_scorer.score(img) + (1.0 - c) * overall_scorer.score(img)


@dataclass(frozen=True)
class CropSearchGrid:
    """The deterministic window set scanned by the search."""

    width_fractions: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    aspect_ratios: tuple[float, ...] = (0.75, 1.0, 1.33, 1.78)
    stride_fraction: float = 0.125
    iou_threshold: float = 0.8


def enumerate_windows(src_w: int, src_h: int, grid: CropSearchGrid) -> list[CropWindow]:
    """All grid windows in scan order: larger windows first, then top-to-bottom,
    left-to-right within a size."""
    sizes: list[tuple[int, int]] = []
    for wf in grid.width_fractions:
        w = round(wf * src_w)
        for ar in grid.aspect_ratios:
            h = round(w / ar)
            if w < MIN_CROP_SIZE or h < MIN_CROP_SIZE or w > src_w or h > src_h:
                continue
            if (w, h) not in sizes:
                sizes.append((w, h))
    sizes.sort(key=lambda s: (-s[0] * s[1], -s[0], -s[1]))
    windows: list[CropWindow] = []
    for w, h in sizes:
        sx = max(1, round(w * grid.stride_fraction))
        sy = max(1, round(h * grid.stride_fraction))
        ys = sorted(set(range(0, src_h - h + 1, sy)) | {src_h - h})
        xs = sorted(set(range(0, src_w - w + 1, sx)) | {src_w - w})
        for y in ys:
            for x in xs:
                windows.append(CropWindow(x, y, w, h, src_w, src_h))
    return windows


def _patch_scorer(scorer, train_size: int):
    """Score function over (patch, features); model-backed scorers at the
    right working size share one feature extraction per window."""
    model = getattr(scorer, "model", None)
    if model is not None and getattr(scorer, "input_size", None) == train_size:
        return lambda patch, feats: predict_features(model, feats)
    return lambda patch, feats: float(scorer.score(patch))


def score_windows(
    img: RasterImage,
    windows,
    composition_scorer,
    overall_scorer,
    train_size: int,
) -> list[tuple[float, float]]:
    """(composition, overall) score per window, each crop resized to the
    training square first."""
    comp_fn = _patch_scorer(composition_scorer, train_size)
    overall_fn = _patch_scorer(overall_scorer, train_size)
    shared_features = any(
        getattr(s, "model", None) is not None and getattr(s, "input_size", None) == train_size
        for s in (composition_scorer, overall_scorer)
    )
    out = []
    for window in windows:
        patch = resize_bilinear(crop_image(img, window), train_size, train_size)
        feats = extract_features(patch) if shared_features else None
        out.append((comp_fn(patch, feats), overall_fn(patch, feats)))
    return out


@dataclass(frozen=True)
class CropSearchResult:
    crops: tuple[ScoredCrop, ...]
    requested: int

    @property
    def short_count(self) -> bool:
        return len(self.crops) < self.requested


def _select_top(windows, comp_overall, c, k, iou_threshold) -> list[ScoredCrop]:
    scored = [
        (c * comp + (1.0 - c) * ov, idx, comp, ov)
        for idx, (comp, ov) in enumerate(comp_overall)
    ]
    # Ties resolve to scan order, which makes the selection reproducible.
    scored.sort(key=lambda t: (-t[0], t[1]))
    kept: list[ScoredCrop] = []
    for hybrid, idx, comp, ov in scored:
        window = windows[idx]
        if any(iou(window, prior.window) > iou_threshold for prior in kept):
            continue
        kept.append(ScoredCrop(window, c, comp, ov, hybrid))
        if len(kept) == k:
            break
    return kept


def search_crops(
    img: RasterImage,
    c: float,
    k: int,
    grid: CropSearchGrid,
    composition_scorer,
    overall_scorer,
    train_size: int = 64,
) -> CropSearchResult:
    """Top-k windows by hybrid score after near-duplicate suppression."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not 0.0 <= c <= 1.0:
        raise ValueError("composition weight must lie in [0, 1]")
    windows = enumerate_windows(img.width, img.height, grid)
    if not windows:
        raise ValueError(
            f"no feasible crop window in a {img.width}x{img.height} image under this grid"
        )
    comp_overall = score_windows(img, windows, composition_scorer, overall_scorer, train_size)
    kept = _select_top(windows, comp_overall, c, k, grid.iou_threshold)
    if len(kept) < k:
        log.info("crop search returned %d of %d requested windows", len(kept), k)
    return CropSearchResult(tuple(kept), k)


def search_crops_multi(
    img: RasterImage,
    c_values,
    k: int,
    grid: CropSearchGrid,
    composition_scorer,
    overall_scorer,
    train_size: int = 64,
) -> dict[float, CropSearchResult]:
    """search_crops for several blend weights, sharing one window evaluation."""
    windows = enumerate_windows(img.width, img.height, grid)
    if not windows:
        raise ValueError(
            f"no feasible crop window in a {img.width}x{img.height} image under this grid"
        )
    comp_overall = score_windows(img, windows, composition_scorer, overall_scorer, train_size)
    return {
        c: CropSearchResult(tuple(_select_top(windows, comp_overall, c, k, grid.iou_threshold)), k)
        for c in c_values
    }


def vertical_sweep(
    img: RasterImage,
    scorers: dict,
    width_fraction: float = 0.5,
    aspect: float = 1.8,
    n_positions: int = 25,
    train_size: int = 64,
) -> list[dict]:
    """Score curves for a fixed window swept top to bottom at the horizontal
    center; used to visualize how each aspect reacts to composition changes."""
    w = round(width_fraction * img.width)
    h = round(w / aspect)
    if w < MIN_CROP_SIZE or h < MIN_CROP_SIZE or h > img.height:
        raise ValueError("sweep window does not fit the image")
    x = (img.width - w) // 2
    ys = np.unique(np.linspace(0, img.height - h, n_positions).round().astype(int))
    rows = []
    for y in ys:
        window = CropWindow(int(x), int(y), w, h, img.width, img.height)
        patch = resize_bilinear(crop_image(img, window), train_size, train_size)
        row = {"y": int(y)}
        for name, scorer in scorers.items():
            row[name] = scorer.score(patch)
        rows.append(row)
    return rows
