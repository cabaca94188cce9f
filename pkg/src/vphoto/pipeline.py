"""The end-to-end virtual photographer.

For every panorama: extract the six standard views; per view find the top
crops at each composition weight; push every crop candidate through the HDR
search, the saturation search and the mask ensemble; keep the best candidate
per view by overall score; rank everything and attach the predicted level on
the human scale.

The 1-d parameter searches run on a training-size proxy of the candidate
(the scorers judge at that size anyway) and the committed parameter is then
applied at full candidate resolution, which keeps the search cost flat in
view size without changing which parameter wins.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import cropsearch, dramatic, enhance, scoring
from .cropsearch import CropSearchGrid, ScoredCrop
from .dramatic import MaskEnsemble
from .filters import FilterId, apply_filter
from .panorama import Panorama, STANDARD_VIEW_COUNT, standard_views
from .raster import RasterImage, resize_bilinear
from .scoring import AspectScorer, ScaleMapping

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    training_size: int = 64
    view_size: int = 512
    composition_weights: tuple[float, ...] = (0.0, 0.5, 1.0)
    crops_per_weight: int = 3
    crop_grid: CropSearchGrid = field(default_factory=CropSearchGrid)
    saturation_grid: tuple[float, ...] = enhance.saturation_search_grid().values
    hdr_grid: tuple[float, ...] = enhance.hdr_search_grid().values
    brighten_amount: float = dramatic.DEFAULT_BRIGHTEN_AMOUNT
    jbu_sigma_s: float = dramatic.DEFAULT_JBU_SIGMA_S
    jbu_sigma_r: float = dramatic.DEFAULT_JBU_SIGMA_R
    scale_a: float = 3.0
    scale_b: float = 1.0
    seed: int = 0
    # The mask stage normally takes the most recent stage output; "pre_saturation"
    # reproduces the alternative reading where it starts from the HDR stage.
    dramatic_from: str = "latest"
    # Optional artifact paths (composition/saturation/hdr/overall/ensemble);
    # command-line flags override these.
    model_paths: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.dramatic_from not in ("latest", "pre_saturation"):
            raise ValueError("dramatic_from must be 'latest' or 'pre_saturation'")
        if self.crops_per_weight < 1:
            raise ValueError("crops_per_weight must be positive")

    @property
    def scale_mapping(self) -> ScaleMapping:
        return ScaleMapping(self.scale_a, self.scale_b)

    def to_json(self) -> dict:
        return {
            "training_size": self.training_size,
            "view_size": self.view_size,
            "composition_weights": list(self.composition_weights),
            "crops_per_weight": self.crops_per_weight,
            "crop_grid": {
                "width_fractions": list(self.crop_grid.width_fractions),
                "aspect_ratios": list(self.crop_grid.aspect_ratios),
                "stride_fraction": self.crop_grid.stride_fraction,
                "iou_threshold": self.crop_grid.iou_threshold,
            },
            "saturation_grid": list(self.saturation_grid),
            "hdr_grid": list(self.hdr_grid),
            "brighten_amount": self.brighten_amount,
            "jbu_sigma_s": self.jbu_sigma_s,
            "jbu_sigma_r": self.jbu_sigma_r,
            "scale_a": self.scale_a,
            "scale_b": self.scale_b,
            "seed": self.seed,
            "dramatic_from": self.dramatic_from,
            "models": dict(self.model_paths),
        }

    @staticmethod
    def from_json(data: dict) -> "PipelineConfig":
        cfg = PipelineConfig()
        grid = cfg.crop_grid
        if "crop_grid" in data:
            g = data["crop_grid"]
            grid = CropSearchGrid(
                width_fractions=tuple(g.get("width_fractions", grid.width_fractions)),
                aspect_ratios=tuple(g.get("aspect_ratios", grid.aspect_ratios)),
                stride_fraction=g.get("stride_fraction", grid.stride_fraction),
                iou_threshold=g.get("iou_threshold", grid.iou_threshold),
            )
        kwargs = {}
        for name in (
            "training_size",
            "view_size",
            "crops_per_weight",
            "brighten_amount",
            "jbu_sigma_s",
            "jbu_sigma_r",
            "scale_a",
            "scale_b",
            "seed",
            "dramatic_from",
        ):
            if name in data:
                kwargs[name] = data[name]
        for name in ("composition_weights", "saturation_grid", "hdr_grid"):
            if name in data:
                kwargs[name] = tuple(data[name])
        if "models" in data:
            kwargs["model_paths"] = tuple(sorted(data["models"].items()))
        return replace(cfg, crop_grid=grid, **kwargs)


@dataclass(frozen=True)
class ModelBundle:
    composition: AspectScorer
    saturation: AspectScorer
    hdr: AspectScorer
    overall: AspectScorer
    ensemble: MaskEnsemble

    def __post_init__(self) -> None:
        for name in ("composition", "saturation", "hdr", "overall"):
            scorer = getattr(self, name)
            if scorer.aspect != name:
                raise ValueError(f"{name} slot holds a {scorer.aspect!r} scorer")
        self.ensemble.require_nonempty()


def load_bundle(model_paths: dict) -> ModelBundle:
    """Load all scorers plus the mask ensemble, failing fast on anything
    missing or mismatched."""
    scorers = {}
    for name in ("composition", "saturation", "hdr", "overall"):
        path = Path(model_paths[name])
        if not path.exists():
            raise FileNotFoundError(f"missing {name} scorer: {path}")
        scorers[name] = scoring.load_scorer(path)
    ensemble_path = Path(model_paths["ensemble"])
    if not ensemble_path.exists():
        raise FileNotFoundError(f"missing mask ensemble: {ensemble_path}")
    ensemble = dramatic.load_ensemble(ensemble_path)
    return ModelBundle(ensemble=ensemble, **scorers)


@dataclass
class Candidate:
    """One photo hypothesis with its full provenance and score trail."""

    pano_id: str
    view_index: int
    crop: ScoredCrop
    hdr_value: float
    hdr_score: float
    hdr_trace: tuple[tuple[float, float], ...]
    saturation_value: float
    saturation_score: float
    saturation_trace: tuple[tuple[float, float], ...]
    snapshot_id: str
    overall_score: float
    predicted_level: float
    image: RasterImage | None = None

    def to_record(self) -> dict:
        w = self.crop.window
        return {
            "pano_id": self.pano_id,
            "view_index": self.view_index,
            "composition_weight": self.crop.weight,
            "window": {"x": w.x, "y": w.y, "w": w.w, "h": w.h, "src_w": w.src_w, "src_h": w.src_h},
            "composition_score": self.crop.composition_score,
            "crop_overall_score": self.crop.overall_score,
            "hybrid_score": self.crop.hybrid_score,
            "hdr_value": self.hdr_value,
            "hdr_score": self.hdr_score,
            "hdr_trace": [list(t) for t in self.hdr_trace],
            "saturation_value": self.saturation_value,
            "saturation_score": self.saturation_score,
            "saturation_trace": [list(t) for t in self.saturation_trace],
            "snapshot_id": self.snapshot_id,
            "overall_score": self.overall_score,
            "predicted_level": self.predicted_level,
        }


@dataclass(frozen=True)
class PipelineStats:
    panoramas: int
    views: int
    candidates_before_dedupe: int
    survivors: int


def _enhance_stage(img: RasterImage, grid_values, filter_id, scorer, train_size):
    """1-d search on the training-size proxy, committed at full resolution."""
    proxy = resize_bilinear(img, train_size, train_size)
    grid = enhance.SearchGrid(filter_id, tuple(grid_values))
    result = enhance.optimize_filter_1d(proxy, grid, scorer)
    committed = apply_filter(img, filter_id, (result.best_value,))
    return result, committed


def process_crop_candidate(
    view_img: RasterImage,
    scored_crop: ScoredCrop,
    pano_id: str,
    view_index: int,
    bundle: ModelBundle,
    cfg: PipelineConfig,
) -> Candidate:
    """Crop, then HDR, then saturation, then the mask ensemble."""
    stage0 = cropsearch.crop_image(view_img, scored_crop.window)
    hdr_result, stage1 = _enhance_stage(
        stage0, cfg.hdr_grid, FilterId.HDR, bundle.hdr, cfg.training_size
    )
    sat_result, stage2 = _enhance_stage(
        stage1, cfg.saturation_grid, FilterId.SATURATION, bundle.saturation, cfg.training_size
    )
    mask_input = stage2 if cfg.dramatic_from == "latest" else stage1
    choice = dramatic.best_dramatic(
        mask_input,
        bundle.ensemble,
        bundle.overall,
        brighten_amount=cfg.brighten_amount,
        sigma_s=cfg.jbu_sigma_s,
        sigma_r=cfg.jbu_sigma_r,
    )
    return Candidate(
        pano_id=pano_id,
        view_index=view_index,
        crop=scored_crop,
        hdr_value=hdr_result.best_value,
        hdr_score=hdr_result.best_score,
        hdr_trace=hdr_result.trace,
        saturation_value=sat_result.best_value,
        saturation_score=sat_result.best_score,
        saturation_trace=sat_result.trace,
        snapshot_id=choice.snapshot_id,
        overall_score=choice.overall_score,
        predicted_level=scoring.predicted_level(cfg.scale_mapping, choice.overall_score),
        image=choice.image,
    )


def run_pipeline(panoramas, bundle: ModelBundle, cfg: PipelineConfig):
    """Returns (ranked candidates, stats).

    `panoramas` is an iterable of (id, Panorama).  Exactly one candidate
    survives per (panorama, view): the one with the highest overall score.
    The final list is sorted by overall score, descending, with a stable
    provenance tie-break so reruns are byte-identical.
    """
    all_candidates: list[Candidate] = []
    n_panos = 0
    n_views = 0
    for pano_id, pano in panoramas:
        if not isinstance(pano, Panorama):
            raise TypeError(f"{pano_id}: expected a Panorama")
        n_panos += 1
        views = standard_views(pano, cfg.view_size)
        for view_index, view_img in enumerate(views):
            n_views += 1
            by_weight = cropsearch.search_crops_multi(
                view_img,
                cfg.composition_weights,
                cfg.crops_per_weight,
                cfg.crop_grid,
                bundle.composition,
                bundle.overall,
                cfg.training_size,
            )
            for weight in cfg.composition_weights:
                for scored_crop in by_weight[weight].crops:
                    all_candidates.append(
                        process_crop_candidate(
                            view_img, scored_crop, pano_id, view_index, bundle, cfg
                        )
                    )
    # One survivor per source view, by overall score; first-processed wins ties.
    best_by_view: dict[tuple[str, int], Candidate] = {}
    for cand in all_candidates:
        key = (cand.pano_id, cand.view_index)
        prior = best_by_view.get(key)
        if prior is None or cand.overall_score > prior.overall_score:
            best_by_view[key] = cand
    survivors = sorted(
        best_by_view.values(),
        key=lambda c: (-c.overall_score, c.pano_id, c.view_index),
    )
    stats = PipelineStats(
        panoramas=n_panos,
        views=n_views,
        candidates_before_dedupe=len(all_candidates),
        survivors=len(survivors),
    )
    log.info(
        "pipeline: %d panoramas, %d views, %d candidates, %d survivors",
        stats.panoramas,
        stats.views,
        stats.candidates_before_dedupe,
        stats.survivors,
    )
    return survivors, stats


def load_config(path) -> PipelineConfig:
    return PipelineConfig.from_json(json.loads(Path(path).read_text()))


def save_config(cfg: PipelineConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n")
