"""Aspect scorers, percentile ranking and the aesthetic-scale calibration.

A scorer pairs a trained regressor with the aspect it judges (composition,
saturation, hdr, or overall quality).  The overall scorer is trained to
regress percentile rank on a synthetically graded corpus, then mapped onto
the human 4-level aesthetic scale by an affine fit.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import learner, modelio
from .dramatic import sample_negative
from .raster import RasterImage, resize_bilinear
from .seeding import stream

ASPECTS = ("composition", "saturation", "hdr", "overall")

# Percentile thresholds splitting the scale into levels 1..4.
LEVEL_THRESHOLDS = (0.15, 0.70, 0.85)


@dataclass
class AspectScorer:
    """A trained regressor bound to one aesthetic aspect."""

    aspect: str
    model: learner.MlpModel
    input_size: int = ds.DEFAULT_TRAINING_SIZE

    def __post_init__(self) -> None:
        if self.aspect not in ASPECTS:
            raise ValueError(f"unknown aspect {self.aspect!r}, expected one of {ASPECTS}")

    def score(self, img: RasterImage) -> float:
        """Deterministic quality score in [0, 1]; any input is resized to the
        scorer's square working size first."""
        if img.width != self.input_size or img.height != self.input_size:
            img = resize_bilinear(img, self.input_size, self.input_size)
        return learner.predict(self.model, img)


def save_scorer(scorer: AspectScorer, path, metadata: dict | None = None) -> None:
    meta = {"aspect": scorer.aspect, "input_size": scorer.input_size}
    if metadata:
        meta.update(metadata)
    learner.save_model(scorer.model, path, metadata=meta)


def load_scorer(path) -> AspectScorer:
    model = learner.load_model(path)
    meta = modelio.load_metadata(path)
    if "aspect" not in meta:
        raise modelio.ModelFormatError(f"{path}: sidecar does not name an aspect")
    return AspectScorer(meta["aspect"], model, int(meta.get("input_size", ds.DEFAULT_TRAINING_SIZE)))


# --- percentile ranking and the 4-level scale --------------------------------

def rank_to_percentile(raw_scores) -> list[float]:
    """Ascending-rank percentile rank_i / N; tied scores share the mean of
    their positions' percentiles."""
    scores = np.asarray(list(raw_scores), dtype=np.float64)
    n = scores.size
    if n == 0:
        raise ValueError("cannot rank an empty score list")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        # Positions i..j (0-based) share the mean of ranks i+1..j+1.
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return [float(r / n) for r in ranks]


def percentile_to_level(r: float) -> int:
    """Level 1..4 from a percentile; boundary values belong to the level above."""
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"percentile {r} outside [0, 1]")
    for level, threshold in enumerate(LEVEL_THRESHOLDS, start=1):
        if r < threshold:
            return level
    return 4


@dataclass(frozen=True)
class ScaleMapping:
    """Affine map from overall score onto the 1..4 aesthetic scale."""

    a: float
    b: float
    degenerate: bool = False


def fit_scale_mapping(pairs) -> ScaleMapping:
    """Ordinary least squares over (overall score, mean human score) pairs."""
    pts = [(float(x), float(y)) for x, y in pairs]
    if len(pts) < 2:
        raise ValueError("need at least two pairs to fit the scale")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.ptp(xs) == 0.0:
        return ScaleMapping(0.0, float(ys.mean()), degenerate=True)
    xm, ym = xs.mean(), ys.mean()
    a = float(np.sum((xs - xm) * (ys - ym)) / np.sum((xs - xm) ** 2))
    return ScaleMapping(a, float(ym - a * xm))


def predicted_level(mapping: ScaleMapping, overall_score: float) -> float:
    return mapping.a * overall_score + mapping.b


# --- rater consensus -----------------------------------------------------------

@dataclass(frozen=True)
class RatingRecord:
    image_id: str
    rater_id: str
    score: float

    def __post_init__(self) -> None:
        if not 1.0 <= self.score <= 4.0:
            raise ValueError(f"rating {self.score} outside the [1, 4] scale")


@dataclass(frozen=True)
class ConsensusReport:
    per_image: dict[str, tuple[float, float]]  # image id -> (mean, std dev)
    overall_dispersion: float


def consensus(records) -> ConsensusReport:
    """Per-image mean rating plus the rater spread around it.

    Dispersion is the population standard deviation of each image's ratings,
    averaged over images.
    """
    by_image: dict[str, list[float]] = {}
    for rec in records:
        by_image.setdefault(rec.image_id, []).append(rec.score)
    if not by_image:
        raise ValueError("no rating records given")
    per_image = {}
    for image_id, scores in by_image.items():
        arr = np.asarray(scores)
        per_image[image_id] = (float(arr.mean()), float(arr.std()))
    overall = float(np.mean([sd for _, sd in per_image.values()]))
    return ConsensusReport(per_image, overall)


def read_ratings_csv(path) -> list[RatingRecord]:
    """`image_id,rater_id,score` rows, with or without a header line."""
    out: list[RatingRecord] = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "image_id":
                continue
            out.append(RatingRecord(row[0].strip(), row[1].strip(), float(row[2])))
    return out


# --- training helpers ------------------------------------------------------------

OVERALL_STACK_DEPTH = 3


def build_overall_dataset(corpus: ds.Corpus, seed: int, max_stack: int = OVERALL_STACK_DEPTH):
    """Percentile-ranked examples for the overall scorer.

    Each corpus image heads a degradation stack: depth d applies d successive
    random draws from the negative filter bank.  Raw quality falls with depth
    (with a small jitter breaking ties within a depth), and the regression
    target is the percentile of that raw quality across the whole set.
    """
    corpus.require_nonempty()
    images: list[RasterImage] = []
    provenance: list[str] = []
    raw: list[float] = []
    for entry in corpus.entries:
        current = entry.image
        for depth in range(max_stack + 1):
            rng = stream(seed, "overall", entry.path, depth)
            if depth > 0:
                current, sig = sample_negative(current, int(rng.integers(2**32)))
                provenance.append(f"stack depth={depth};{sig};src={entry.path}")
            else:
                provenance.append(f"original;src={entry.path}")
            images.append(current)
            raw.append(-float(depth) + float(rng.uniform(0.0, 0.5)))
    targets = rank_to_percentile(raw)
    return [
        ds.TrainingExample(img, t, provenance=p)
        for img, t, p in zip(images, targets, provenance)
    ]


def dataset_fingerprint(examples) -> str:
    """Stable hash of a training set, recorded in model sidecars."""
    h = hashlib.sha256()
    for ex in examples:
        h.update(np.ascontiguousarray(ex.image.pixels).tobytes())
        h.update(repr(ex.target).encode())
    return h.hexdigest()[:16]


def build_aspect_dataset(corpus: ds.Corpus, aspect: str, seed: int):
    if aspect == "saturation":
        return ds.generate_aspect_dataset(corpus, ds.saturation_perturbation_spec(), seed)
    if aspect == "hdr":
        return ds.generate_aspect_dataset(corpus, ds.hdr_perturbation_spec(), seed)
    if aspect == "composition":
        return ds.generate_crop_dataset(corpus, seed)
    if aspect == "overall":
        return build_overall_dataset(corpus, seed)
    raise ValueError(f"unknown aspect {aspect!r}, expected one of {ASPECTS}")


def train_aspect_scorer(
    corpus: ds.Corpus,
    aspect: str,
    cfg: learner.TrainConfig | None = None,
    seed: int = 0,
) -> AspectScorer:
    """Generate the aspect's dataset from the corpus and fit a scorer on it."""
    cfg = cfg or learner.TrainConfig(seed=seed)
    examples = build_aspect_dataset(corpus, aspect, seed)
    model = learner.train(examples, cfg)
    return AspectScorer(aspect, model, corpus.training_size)
