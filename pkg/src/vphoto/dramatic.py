"""Learned low-frequency lighting masks.

A tiny conditional generator maps a 32x32 photo to an 8x8 mask in [0, 1]
that blends the photo toward a brightened copy, which simulates dramatic
lighting.  It trains adversarially against professional originals, with
negatives drawn from a bank of brightness-bending filters.  Because the
adversarial game never settles, generator snapshots are collected across
runs and steps; at apply time every snapshot proposes an output and the
overall scorer picks the winner.  Masks are joint-bilateral upsampled
against the full-resolution photo for final output, bilinear during
training.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import convnet, modelio
from .convnet import Conv2d, Dense, Flatten, Tanh, sigmoid
from .dataset import Corpus
from .filters import FilterId, apply_effect, brighten, effect_signature
from .raster import RasterImage, clamped, luminance, resample_bilinear, resize_bilinear
from .seeding import stream

log = logging.getLogger(__name__)

MASK_SIZE = 8
GAN_IMAGE_SIZE = 32
DEGENERATE_MASK_VARIANCE = 1e-4
DEFAULT_BRIGHTEN_AMOUNT = 0.4
DEFAULT_JBU_SIGMA_S = 1.0
DEFAULT_JBU_SIGMA_R = 0.1


def validate_mask(mask) -> np.ndarray:
    m = np.asarray(mask, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {m.shape}")
    if not np.all(np.isfinite(m)) or m.min() < 0.0 or m.max() > 1.0:
        raise ValueError("mask cells must be finite and in [0, 1]")
    return m


# --- bilinear mask upscaling as an explicit linear operator ------------------

_UP_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _up_matrix(n_out: int, n_in: int) -> np.ndarray:
    key = (n_out, n_in)
    if key not in _UP_CACHE:
        from .raster import _bilinear_coords

        x0, x1, f = _bilinear_coords(n_out, n_in)
        u = np.zeros((n_out, n_in))
        u[np.arange(n_out), x0] += 1.0 - f
        u[np.arange(n_out), x1] += f
        _UP_CACHE[key] = u
    return _UP_CACHE[key]


def _upsample_batch(masks: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    uy = _up_matrix(out_h, masks.shape[1])
    ux = _up_matrix(out_w, masks.shape[2])
    return np.einsum("ij,bjk,lk->bil", uy, masks, ux)


def _upsample_batch_adjoint(d_up: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    uy = _up_matrix(d_up.shape[1], in_h)
    ux = _up_matrix(d_up.shape[2], in_w)
    return np.einsum("ji,bjk,kl->bil", uy, d_up, ux)


# --- joint bilateral upsampling ----------------------------------------------

def jbu_upsample(
    mask,
    guide: RasterImage,
    sigma_s: float = DEFAULT_JBU_SIGMA_S,
    sigma_r: float = DEFAULT_JBU_SIGMA_R,
    radius: int = 1,
) -> np.ndarray:
    """Upsample a low-res mask to the guide's resolution, weighting low-res
    cells by spatial distance (in cell units) and by luminance similarity to
    the guide.  The output is a convex combination of mask cells, so it stays
    inside the mask's value range.
    """
    m = validate_mask(mask)
    if sigma_s <= 0 or sigma_r <= 0:
        raise ValueError("JBU sigmas must be positive")
    mh, mw = m.shape
    gh, gw = guide.height, guide.width
    lum = luminance(guide)
    # Luminance each low-res cell sees: the guide sampled at the cell center.
    lum_cells = resample_bilinear(lum, mh, mw)
    py = ((np.arange(gh) + 0.5) * (mh / gh) - 0.5)[:, None]
    px = ((np.arange(gw) + 0.5) * (mw / gw) - 0.5)[None, :]
    base_y = np.rint(py).astype(np.intp)
    base_x = np.rint(px).astype(np.intp)
    num = np.zeros((gh, gw))
    den = np.zeros((gh, gw))
    inv_s = 1.0 / (2.0 * sigma_s * sigma_s)
    inv_r = 1.0 / (2.0 * sigma_r * sigma_r)
    for dy in range(-radius, radius + 1):
        qy = base_y + dy
        ok_y = (qy >= 0) & (qy < mh)
        cy = np.clip(qy, 0, mh - 1)
        for dx in range(-radius, radius + 1):
            qx = base_x + dx
            ok = ok_y & (qx >= 0) & (qx < mw)
            cx = np.clip(qx, 0, mw - 1)
            dist2 = (py - qy) ** 2 + (px - qx) ** 2
            delta = lum - lum_cells[cy, cx]
            w = np.exp(-dist2 * inv_s - delta * delta * inv_r) * ok
            num += w * m[cy, cx]
            den += w
    return num / den


# --- mask application ---------------------------------------------------------

def apply_mask(
    img: RasterImage,
    mask,
    brighten_amount: float = DEFAULT_BRIGHTEN_AMOUNT,
    method: str = "bilinear",
    sigma_s: float = DEFAULT_JBU_SIGMA_S,
    sigma_r: float = DEFAULT_JBU_SIGMA_R,
) -> RasterImage:
    """Blend the photo toward its brightened copy under the upscaled mask."""
    m = validate_mask(mask)
    if method == "bilinear":
        full = resample_bilinear(m, img.height, img.width)
    elif method == "jbu":
        full = jbu_upsample(m, img, sigma_s=sigma_s, sigma_r=sigma_r)
    else:
        raise ValueError(f"unknown mask upsampling method {method!r}")
    bright = brighten(img, brighten_amount)
    out = img.pixels + full[:, :, None] * (bright.pixels - img.pixels)
    return clamped(out)


# --- the filter bank for adversarial negatives --------------------------------

# Sub-ranges are in signed parameter space; negative values apply the filter
# through the inverse-effect construction.
_NEGATIVE_BANK: tuple[tuple[FilterId, tuple[tuple[float, float], ...]], ...] = (
    (FilterId.TUNE_BRIGHTNESS, ((0.10, 0.45), (0.55, 0.90))),
    (FilterId.TUNE_CONTRAST, ((0.10, 0.45), (0.55, 0.90))),
    (FilterId.HDR, ((0.10, 1.00), (-1.00, -0.10))),
    (FilterId.VIGNETTE, ((0.00, 0.35), (0.60, 0.70))),
    (FilterId.CURVE, ()),
    (FilterId.FLATTEN_BRIGHTNESS, ((0.10, 1.00), (-1.00, -0.10))),
)


def _draw_from_union(rng: np.random.Generator, subranges) -> float:
    widths = [hi - lo for lo, hi in subranges]
    t = rng.uniform(0.0, sum(widths))
    for (lo, hi), width in zip(subranges, widths):
        if t <= width:
            return lo + t
        t -= width
    return subranges[-1][1]


def sample_negative(img: RasterImage, seed: int) -> tuple[RasterImage, str]:
    """One filter from the bank, chosen uniformly, applied with a parameter
    drawn from its quoted sub-ranges.  Returns the image and the effect
    signature; a negative strength in the signature marks an inverse-effect
    application."""
    rng = stream(seed, "negative")
    filter_id, subranges = _NEGATIVE_BANK[int(rng.integers(len(_NEGATIVE_BANK)))]
    if filter_id is FilterId.CURVE:
        values = tuple(rng.uniform(-0.15, 0.15, size=6))
        negated = False
    else:
        v = _draw_from_union(rng, subranges)
        negated = v < 0
        values = (abs(v),)
    out = apply_effect(img, filter_id, values, negated)
    return out, effect_signature(filter_id, values, negated)


# --- networks ------------------------------------------------------------------

def _image_to_chw(img: RasterImage, size: int = GAN_IMAGE_SIZE) -> np.ndarray:
    resized = img if img.width == size and img.height == size else resize_bilinear(img, size, size)
    return resized.pixels.transpose(2, 0, 1)


def images_to_batch(images, size: int = GAN_IMAGE_SIZE) -> np.ndarray:
    return np.stack([_image_to_chw(img, size) for img in images])


class MaskGenerator:
    """Conditional generator: 32x32 RGB in, 8x8 sigmoid mask out."""

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.layers = [
            Conv2d(3, 8, stride=2, rng=rng),
            Tanh(),
            Conv2d(8, 16, stride=2, rng=rng),
            Tanh(),
            Conv2d(16, 32, stride=2, rng=rng),
            Tanh(),
            Flatten(),
            Dense(32 * 4 * 4, MASK_SIZE * MASK_SIZE, rng=rng),
        ]
        self.seed = seed
        self.step = 0
        self._mask_flat = None

    def forward(self, batch: np.ndarray) -> np.ndarray:
        z = convnet.forward(self.layers, batch)
        self._mask_flat = sigmoid(z)
        return self._mask_flat.reshape(-1, MASK_SIZE, MASK_SIZE)

    def backward(self, dmask: np.ndarray) -> None:
        m = self._mask_flat
        dz = dmask.reshape(m.shape) * m * (1.0 - m)
        convnet.backward(self.layers, dz)

    def masks(self, batch: np.ndarray) -> np.ndarray:
        return self.forward(batch)

    def mask_for(self, img: RasterImage) -> np.ndarray:
        return self.masks(_image_to_chw(img)[None])[0]

    def params(self):
        return convnet.parameters(self.layers)

    def copy(self) -> "MaskGenerator":
        clone = MaskGenerator(self.seed)
        for dst, src in zip(clone.params(), self.params()):
            dst[...] = src
        clone.step = self.step
        return clone


class Discriminator:
    """32x32 RGB in, real-probability out (always strictly inside (0, 1))."""

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.layers = [
            Conv2d(3, 8, stride=2, rng=rng),
            Tanh(),
            Conv2d(8, 16, stride=2, rng=rng),
            Tanh(),
            Conv2d(16, 32, stride=2, rng=rng),
            Tanh(),
            Flatten(),
            Dense(32 * 4 * 4, 1, rng=rng),
        ]
        self.seed = seed

    def forward_logits(self, batch: np.ndarray) -> np.ndarray:
        return convnet.forward(self.layers, batch)[:, 0]

    def prob(self, batch: np.ndarray) -> np.ndarray:
        return sigmoid(self.forward_logits(batch))

    def backward(self, dz: np.ndarray) -> np.ndarray:
        return convnet.backward(self.layers, dz[:, None])

    def params(self):
        return convnet.parameters(self.layers)


def _log_sigmoid(z: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -z)


def _fake_batch(gen: MaskGenerator, neg: np.ndarray, brighten_amount: float):
    """Masked-brighten outputs for a conditioning batch, plus backprop context.

    The blend of an image with its screen-brightened copy stays in [0, 1], so
    no clamp is needed (or differentiated) here.
    """
    masks = gen.forward(neg)
    up = _upsample_batch(masks, neg.shape[2], neg.shape[3])
    bright = 1.0 - (1.0 - neg) * (1.0 - brighten_amount)
    fake = neg + up[:, None] * (bright - neg)
    return fake, (bright - neg)


def _fake_backward(gen: MaskGenerator, dfake: np.ndarray, residual: np.ndarray) -> None:
    d_up = (dfake * residual).sum(axis=1)
    dmask = _upsample_batch_adjoint(d_up, MASK_SIZE, MASK_SIZE)
    gen.backward(dmask)


def discriminator_loss(disc: Discriminator, real: np.ndarray, fake: np.ndarray) -> float:
    z_real = disc.forward_logits(real)
    z_fake = disc.forward_logits(fake)
    return float(-np.mean(_log_sigmoid(z_real)) - np.mean(_log_sigmoid(-z_fake)))


def discriminator_grads(disc: Discriminator, real: np.ndarray, fake: np.ndarray):
    """(loss, gradient arrays) of the real/fake separation objective."""
    convnet.zero_grads(disc.layers)
    both = np.concatenate([real, fake])
    z = disc.forward_logits(both)
    n_r, n_f = real.shape[0], fake.shape[0]
    d = sigmoid(z)
    dz = np.concatenate([(d[:n_r] - 1.0) / n_r, d[n_r:] / n_f])
    disc.backward(dz)
    loss = float(-np.mean(_log_sigmoid(z[:n_r])) - np.mean(_log_sigmoid(-z[n_r:])))
    grads = [g.copy() for g in convnet.gradients(disc.layers)]
    convnet.zero_grads(disc.layers)
    return loss, grads


def generator_loss(
    gen: MaskGenerator, disc: Discriminator, neg: np.ndarray, brighten_amount: float
) -> float:
    fake, _ = _fake_batch(gen, neg, brighten_amount)
    return float(-np.mean(_log_sigmoid(disc.forward_logits(fake))))


def generator_grads(
    gen: MaskGenerator, disc: Discriminator, neg: np.ndarray, brighten_amount: float
):
    """(loss, gradient arrays) of the non-saturating generator objective;
    the discriminator is used but left untouched."""
    convnet.zero_grads(gen.layers)
    convnet.zero_grads(disc.layers)
    fake, residual = _fake_batch(gen, neg, brighten_amount)
    z = disc.forward_logits(fake)
    d = sigmoid(z)
    dz = (d - 1.0) / fake.shape[0]
    dfake = disc.backward(dz)
    convnet.zero_grads(disc.layers)
    _fake_backward(gen, dfake, residual)
    loss = float(-np.mean(_log_sigmoid(z)))
    grads = [g.copy() for g in convnet.gradients(gen.layers)]
    convnet.zero_grads(gen.layers)
    return loss, grads


@dataclass(frozen=True)
class GanConfig:
    batch_size: int = 8
    lr_generator: float = 0.01
    # Discriminator learns at twice the generator rate, a common stabilizer.
    lr_discriminator: float = 0.02
    brighten_amount: float = DEFAULT_BRIGHTEN_AMOUNT
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if self.lr_generator <= 0 or self.lr_discriminator <= 0:
            raise ValueError("learning rates must be positive")


def gan_train_step(
    gen: MaskGenerator,
    disc: Discriminator,
    real: np.ndarray,
    neg: np.ndarray,
    cfg: GanConfig,
) -> tuple[MaskGenerator, Discriminator, dict[str, float]]:
    """One adversarial update: discriminator first, then the generator against
    the updated discriminator.  There is intentionally no pixel-reconstruction
    term, so the generator is free to invent lighting."""
    if real.size == 0 or neg.size == 0:
        raise ValueError("training batches must be nonempty")
    fake, _ = _fake_batch(gen, neg, cfg.brighten_amount)
    d_loss, d_grads = discriminator_grads(disc, real, fake)
    for p, g in zip(disc.params(), d_grads):
        p -= cfg.lr_discriminator * g
    g_loss, g_grads = generator_grads(gen, disc, neg, cfg.brighten_amount)
    for p, g in zip(gen.params(), g_grads):
        p -= cfg.lr_generator * g
    gen.step += 1
    if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
        raise ArithmeticError(
            f"adversarial training diverged (d={d_loss}, g={g_loss}); lower the learning rates"
        )
    return gen, disc, {"discriminator": d_loss, "generator": g_loss}


# --- snapshot ensembles ----------------------------------------------------------

@dataclass
class MaskSnapshot:
    generator: MaskGenerator
    model_id: int
    step: int
    contribution: int = 0

    @property
    def snapshot_id(self) -> str:
        return f"m{self.model_id}s{self.step}"


@dataclass
class MaskEnsemble:
    snapshots: list[MaskSnapshot] = field(default_factory=list)

    def require_nonempty(self) -> "MaskEnsemble":
        if not self.snapshots:
            raise ValueError("mask ensemble is empty")
        return self


def _snapshot_votes(snapshots, validation, overall_scorer, brighten_amount):
    """Contribution counts: each validation image votes for the snapshot whose
    output it scores highest.  Also returns each snapshot's mean mask variance."""
    votes = [0] * len(snapshots)
    variances = np.zeros(len(snapshots))
    for img in validation:
        batch = _image_to_chw(img)[None]
        best_idx, best_score = 0, -np.inf
        for i, snap in enumerate(snapshots):
            mask = snap.generator.masks(batch)[0]
            variances[i] += float(mask.var()) / len(validation)
            out = apply_mask(img, mask, brighten_amount, method="bilinear")
            score = overall_scorer.score(out)
            if score > best_score:
                best_idx, best_score = i, score
        votes[best_idx] += 1
    return votes, variances


def train_ensemble(
    corpus: Corpus,
    n_models: int,
    steps: int,
    snapshot_interval: int,
    cfg: GanConfig,
    overall_scorer,
    keep_top: int = 5,
    validation=None,
) -> MaskEnsemble:
    """Train `n_models` generators from distinct seeds, snapshotting every
    `snapshot_interval` steps, then prune to the snapshots that win the most
    validation votes.  Snapshots whose masks are nearly constant are dropped
    as degenerate unless nothing else survives."""
    corpus.require_nonempty()
    if n_models < 1 or steps < 1 or snapshot_interval < 1:
        raise ValueError("model count, steps and snapshot interval must be positive")
    entries32 = [resize_bilinear(e.image, GAN_IMAGE_SIZE, GAN_IMAGE_SIZE) for e in corpus.entries]
    real_all = images_to_batch(entries32)
    snapshots: list[MaskSnapshot] = []
    for model_id in range(n_models):
        gen = MaskGenerator(seed=int(stream(cfg.seed, "gen-init", model_id).integers(2**32)))
        disc = Discriminator(seed=int(stream(cfg.seed, "disc-init", model_id).integers(2**32)))
        for step_i in range(1, steps + 1):
            rng = stream(cfg.seed, "gan-batch", model_id, step_i)
            real_idx = rng.integers(0, len(entries32), size=cfg.batch_size)
            neg_idx = rng.integers(0, len(entries32), size=cfg.batch_size)
            neg_images = [
                sample_negative(
                    entries32[j], int(rng.integers(2**32))
                )[0]
                for j in neg_idx
            ]
            gan_train_step(gen, disc, real_all[real_idx], images_to_batch(neg_images), cfg)
            if step_i % snapshot_interval == 0:
                snap = gen.copy()
                snapshots.append(MaskSnapshot(snap, model_id, step_i))
    if validation is None:
        validation = [e.image for e in corpus.entries[: min(12, len(corpus.entries))]]
    votes, variances = _snapshot_votes(snapshots, validation, overall_scorer, cfg.brighten_amount)
    for snap, v in zip(snapshots, votes):
        snap.contribution = v
    alive = [s for s, var in zip(snapshots, variances) if var >= DEGENERATE_MASK_VARIANCE]
    if not alive:
        log.warning("every snapshot produced near-constant masks; keeping the liveliest one")
        alive = [snapshots[int(np.argmax(variances))]]
    alive.sort(key=lambda s: (-s.contribution, s.model_id, s.step))
    return MaskEnsemble(alive[:keep_top])


@dataclass(frozen=True)
class DramaticResult:
    image: RasterImage
    snapshot_id: str
    overall_score: float


def best_dramatic(
    img: RasterImage,
    ensemble: MaskEnsemble,
    overall_scorer,
    brighten_amount: float = DEFAULT_BRIGHTEN_AMOUNT,
    sigma_s: float = DEFAULT_JBU_SIGMA_S,
    sigma_r: float = DEFAULT_JBU_SIGMA_R,
) -> DramaticResult:
    """Apply every snapshot's mask (upsampled against the photo) and keep the
    output the overall scorer likes best; ties go to the earlier snapshot."""
    ensemble.require_nonempty()
    batch = _image_to_chw(img)[None]
    best: DramaticResult | None = None
    for snap in ensemble.snapshots:
        mask = snap.generator.masks(batch)[0]
        out = apply_mask(img, mask, brighten_amount, method="jbu", sigma_s=sigma_s, sigma_r=sigma_r)
        score = overall_scorer.score(out)
        if best is None or score > best.overall_score:
            best = DramaticResult(out, snap.snapshot_id, score)
    return best


# --- persistence --------------------------------------------------------------

def _load_params_into(net, arrays, path, kind: str) -> None:
    params = net.params()
    if len(params) != len(arrays):
        raise modelio.ModelFormatError(f"{path}: wrong parameter count for a {kind}")
    for dst, src in zip(params, arrays):
        if dst.shape != src.shape:
            raise modelio.ModelFormatError(f"{path}: parameter shape mismatch")
        dst[...] = src


def save_snapshot(snap: MaskSnapshot, path) -> None:
    modelio.save_arrays(
        path,
        list(snap.generator.params()),
        extractor_version=0,
        activation="tanh",
        metadata={
            "kind": "generator",
            "model_id": snap.model_id,
            "step": snap.step,
            "contribution": snap.contribution,
        },
    )


def load_snapshot(path) -> MaskSnapshot:
    arrays, _, _ = modelio.load_arrays(path)
    meta = modelio.load_metadata(path)
    if meta.get("kind") != "generator":
        raise modelio.ModelFormatError(f"{path}: not a generator snapshot")
    gen = MaskGenerator(seed=0)
    _load_params_into(gen, arrays, path, "generator")
    snap = MaskSnapshot(gen, int(meta.get("model_id", 0)), int(meta.get("step", 0)))
    snap.contribution = int(meta.get("contribution", 0))
    snap.generator.step = snap.step
    return snap


def save_discriminator(disc: Discriminator, path, metadata: dict | None = None) -> None:
    meta = {"kind": "discriminator"}
    if metadata:
        meta.update(metadata)
    modelio.save_arrays(
        path, list(disc.params()), extractor_version=0, activation="tanh", metadata=meta
    )


def load_discriminator(path) -> Discriminator:
    arrays, _, _ = modelio.load_arrays(path)
    meta = modelio.load_metadata(path)
    if meta.get("kind") != "discriminator":
        raise modelio.ModelFormatError(f"{path}: not a discriminator snapshot")
    disc = Discriminator(seed=0)
    _load_params_into(disc, arrays, path, "discriminator")
    return disc


ENSEMBLE_MANIFEST = "ensemble.json"


def save_ensemble(ensemble: MaskEnsemble, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for snap in ensemble.snapshots:
        name = f"gen_{snap.snapshot_id}.crtm"
        save_snapshot(snap, out / name)
        records.append(
            {
                "file": name,
                "model_id": snap.model_id,
                "step": snap.step,
                "contribution": snap.contribution,
            }
        )
    manifest = out / ENSEMBLE_MANIFEST
    manifest.write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
    return manifest


def load_ensemble(path) -> MaskEnsemble:
    base = Path(path)
    manifest = base / ENSEMBLE_MANIFEST if base.is_dir() else base
    if not manifest.exists():
        raise FileNotFoundError(f"ensemble manifest not found: {manifest}")
    records = json.loads(manifest.read_text())
    snapshots = [load_snapshot(manifest.parent / rec["file"]) for rec in records]
    return MaskEnsemble(snapshots)
