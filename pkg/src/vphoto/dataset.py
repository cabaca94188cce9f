"""Training corpora and perturbation-generated aspect datasets.

A corpus is a set of professional-quality photos, each resized to the square
training size.  Aspect datasets are built from it by inserting every original
with score 1.0 and adding randomly perturbed copies scored by how little they
moved: score = max(0, 1 - delta / cap) with delta the mean absolute pixel
difference.  Crop datasets score random contained crops by area ratio.

Every sampled example draws from its own named random stream keyed on the
source path, batch and sample index, so regenerating any subset of the data
is independent of corpus ordering.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import filters
from .filters import FilterId, effect_signature, parameter_domain
from .raster import (
    RasterImage,
    crop,
    hsv_saturation,
    load_image,
    mean_abs_diff,
    perturbation_score,
    resize_bilinear,
    save_png,
)
from .seeding import stream

log = logging.getLogger(__name__)

DEFAULT_TRAINING_SIZE = 64
DEFAULT_MIN_SATURATION = 0.55

# Crop sampler geometry: two batches per image, the first stays near the full
# frame, the second roams wider.
CROP_BATCH_WIDTH_RANGES = ((0.9, 1.0), (0.5, 0.9))
CROP_ASPECT_RANGE = (0.5, 2.0)
CROP_MAX_RETRIES = 20


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    image: RasterImage


@dataclass(frozen=True)
class Corpus:
    entries: tuple[CorpusEntry, ...]
    manifest_id: str = "corpus"
    training_size: int = DEFAULT_TRAINING_SIZE

    def __post_init__(self) -> None:
        for e in self.entries:
            if e.image.width != self.training_size or e.image.height != self.training_size:
                raise ValueError(
                    f"{e.path}: corpus images must be {self.training_size}px squares"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def require_nonempty(self) -> "Corpus":
        if not self.entries:
            raise ValueError(f"corpus {self.manifest_id!r} is empty")
        return self


def build_corpus(images, manifest_id: str = "corpus", training_size: int = DEFAULT_TRAINING_SIZE) -> Corpus:
    """Corpus from (path, RasterImage) pairs, resizing to the training square."""
    entries = tuple(
        CorpusEntry(str(path), resize_bilinear(img, training_size, training_size))
        for path, img in images
    )
    return Corpus(entries, manifest_id, training_size)


def ingest_corpus(paths, manifest_id: str = "corpus", training_size: int = DEFAULT_TRAINING_SIZE) -> Corpus:
    return build_corpus(((p, load_image(p)) for p in paths), manifest_id, training_size)


def mean_saturation(img: RasterImage) -> float:
    return float(hsv_saturation(img).mean())


def filter_corpus_by_saturation(corpus: Corpus, min_avg_sat: float = DEFAULT_MIN_SATURATION) -> Corpus:
    """Keep images whose mean HSV saturation reaches the threshold."""
    kept = tuple(e for e in corpus.entries if mean_saturation(e.image) >= min_avg_sat)
    if not kept:
        log.warning(
            "saturation gate at %.2f removed every image from %s",
            min_avg_sat,
            corpus.manifest_id,
        )
    return Corpus(kept, corpus.manifest_id, corpus.training_size)


def save_corpus_manifest(corpus: Corpus, path) -> None:
    lines = [
        "# vphoto corpus manifest",
        f"# id={corpus.manifest_id} size={corpus.training_size}",
    ]
    lines += [e.path for e in corpus.entries]
    Path(path).write_text("\n".join(lines) + "\n")


def load_corpus_manifest(path) -> Corpus:
    manifest_id = Path(path).stem
    size = DEFAULT_TRAINING_SIZE
    paths: list[str] = []
    base = Path(path).parent
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            if "id=" in line and "size=" in line:
                for token in line.lstrip("# ").split():
                    key, _, value = token.partition("=")
                    if key == "id":
                        manifest_id = value
                    elif key == "size":
                        size = int(value)
            continue
        text = line.strip()
        if text:
            p = Path(text)
            paths.append(str(p if p.is_absolute() else base / p))
    return ingest_corpus(paths, manifest_id, size)


@dataclass(frozen=True)
class TrainingExample:
    image: RasterImage
    target: float
    provenance: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.target <= 1.0:
            raise ValueError(f"target {self.target} outside [0, 1]")


@dataclass(frozen=True)
class SamplingBatch:
    """One block of perturbation draws.

    Ranges live in the filter's signed parameter space: a negated batch holds
    negative values and is applied through the inverse-effect construction
    with the absolute parameter.
    """

    ranges: tuple[tuple[float, float], ...]
    count: int
    negate: bool = False

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("batch count must be at least 1")
        for lo, hi in self.ranges:
            if lo > hi:
                raise ValueError(f"empty sampling range ({lo}, {hi})")
            if self.negate and hi > 0:
                raise ValueError("negated batches must sample non-positive values")


@dataclass(frozen=True)
class PerturbationSpec:
    filter: FilterId
    batches: tuple[SamplingBatch, ...]
    diff_cap: float

    def __post_init__(self) -> None:
        if self.diff_cap <= 0:
            raise ValueError("difference cap must be positive")
        domain = parameter_domain(self.filter)
        for batch in self.batches:
            if len(batch.ranges) != domain.dim:
                raise ValueError(
                    f"batch has {len(batch.ranges)} ranges, filter needs {domain.dim}"
                )
            for (lo, hi), (dlo, dhi) in zip(batch.ranges, domain.bounds):
                a, b = (-hi, -lo) if batch.negate else (lo, hi)
                if a < dlo or b > dhi:
                    raise ValueError(
                        f"range ({lo}, {hi}) falls outside the {self.filter.value} "
                        f"domain after negation expansion"
                    )

    @property
    def examples_per_image(self) -> int:
        return 1 + sum(b.count for b in self.batches)


def saturation_perturbation_spec() -> PerturbationSpec:
    """Six draws over (0, 0.8) of the saturation range, difference capped at 6%."""
    return PerturbationSpec(
        FilterId.SATURATION,
        (SamplingBatch(ranges=((0.0, 0.8),), count=6),),
        diff_cap=0.06,
    )


def hdr_perturbation_spec() -> PerturbationSpec:
    """Six under-processed draws via the inverse effect plus three overdone
    ones, difference capped at 20%."""
    return PerturbationSpec(
        FilterId.HDR,
        (
            SamplingBatch(ranges=((-1.0, -0.5),), count=6, negate=True),
            SamplingBatch(ranges=((0.5, 1.0),), count=3),
        ),
        diff_cap=0.20,
    )


def generate_aspect_dataset(corpus: Corpus, spec: PerturbationSpec, seed: int) -> list[TrainingExample]:
    """Originals at score 1.0 plus per-batch perturbed copies scored by
    similarity to their original.  Deterministic for a given seed."""
    corpus.require_nonempty()
    domain = parameter_domain(spec.filter)
    out: list[TrainingExample] = []
    for entry in corpus.entries:
        out.append(TrainingExample(entry.image, 1.0, provenance=f"original;src={entry.path}"))
        for b_idx, batch in enumerate(spec.batches):
            for s_idx in range(batch.count):
                rng = stream(seed, entry.path, b_idx, s_idx)
                signed = tuple(rng.uniform(lo, hi) for lo, hi in batch.ranges)
                applied = tuple(-v for v in signed) if batch.negate else signed
                if not domain.contains(applied):
                    raise AssertionError(
                        f"sampled parameter {signed} escaped the {spec.filter.value} domain"
                    )
                perturbed = filters.apply_effect(entry.image, spec.filter, applied, batch.negate)
                delta = mean_abs_diff(entry.image, perturbed)
                score = perturbation_score(delta, spec.diff_cap)
                sig = effect_signature(spec.filter, applied, batch.negate)
                out.append(
                    TrainingExample(
                        perturbed,
                        score,
                        provenance=f"{sig};seed={seed};src={entry.path}",
                    )
                )
    return out


def _sample_crop(rng: np.random.Generator, width_range, w: int, h: int):
    """(x, y, cw, ch) for a contained crop, or None after bounded retries."""
    for _ in range(CROP_MAX_RETRIES):
        wf = rng.uniform(*width_range)
        aspect = rng.uniform(*CROP_ASPECT_RANGE)
        cw = max(1, round(wf * w))
        ch = max(1, round(cw / aspect))
        if cw > w or ch > h:
            continue
        x = int(rng.integers(0, w - cw + 1))
        y = int(rng.integers(0, h - ch + 1))
        return x, y, cw, ch
    return None


def generate_crop_dataset(
    corpus: Corpus, seed: int, samples_per_batch: int = 3
) -> list[TrainingExample]:
    """Random contained crops scored by area ratio, resized back to the
    training square; the original counts as the full-frame crop at 1.0."""
    corpus.require_nonempty()
    size = corpus.training_size
    out: list[TrainingExample] = []
    for entry in corpus.entries:
        out.append(TrainingExample(entry.image, 1.0, provenance=f"original;src={entry.path}"))
        w, h = entry.image.width, entry.image.height
        for b_idx, width_range in enumerate(CROP_BATCH_WIDTH_RANGES):
            for s_idx in range(samples_per_batch):
                rng = stream(seed, entry.path, 1000 + b_idx, s_idx)
                sampled = _sample_crop(rng, width_range, w, h)
                if sampled is None:
                    log.warning("no feasible crop for %s (batch %d)", entry.path, b_idx)
                    continue
                x, y, cw, ch = sampled
                ratio = (cw * ch) / (w * h)
                cropped = resize_bilinear(crop(entry.image, x, y, cw, ch), size, size)
                out.append(
                    TrainingExample(
                        cropped,
                        ratio,
                        provenance=f"crop;x={x};y={y};w={cw};h={ch};seed={seed};src={entry.path}",
                    )
                )
    return out


# --- persistence: a directory of PNGs plus a CSV index ----------------------

INDEX_NAME = "index.csv"


def save_dataset(examples, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = out / INDEX_NAME
    with open(index, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "target", "provenance"])
        for i, ex in enumerate(examples):
            name = f"{i:06d}.png"
            save_png(ex.image, out / name)
            writer.writerow([name, repr(ex.target), ex.provenance])
    return index


def load_dataset(dataset_dir) -> list[TrainingExample]:
    base = Path(dataset_dir)
    index = base / INDEX_NAME
    if not index.exists():
        raise FileNotFoundError(f"dataset index not found: {index}")
    out: list[TrainingExample] = []
    with open(index, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                TrainingExample(
                    load_image(base / row["path"]),
                    float(row["target"]),
                    row.get("provenance", ""),
                )
            )
    return out
