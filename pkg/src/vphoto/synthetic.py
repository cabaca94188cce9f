"""Procedural stand-ins for the photo corpus and the panorama collection.

Real corpora (curated professional photos, street-level panoramas) are not
bundled; these generators produce colorful landscape-like rasters and
seamless equirectangular panoramas deterministically from a seed, which is
enough to train and exercise every stage at desk scale.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import Corpus, build_corpus
from .panorama import Panorama
from .raster import RasterImage, save_png
from .seeding import stream


def _unit(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def _ridge(xs: np.ndarray, rng: np.random.Generator, base: float, amp: float, periodic: bool) -> np.ndarray:
    """Smooth mountain silhouette as a sum of sinusoids; integer frequencies
    keep it seamless when the x axis wraps."""
    out = np.full_like(xs, base)
    for k in range(1, 4):
        freq = k if periodic else rng.uniform(0.5, 3.0) * k
        out += amp / k * np.sin(2.0 * np.pi * (freq * xs + rng.uniform(0.0, 1.0)))
    return out


def _saturated_color(rng: np.random.Generator, hue_range: tuple[float, float]) -> np.ndarray:
    """A bright, strongly saturated RGB color with hue in the given range."""
    h = rng.uniform(*hue_range) % 1.0
    s = rng.uniform(0.75, 1.0)
    v = rng.uniform(0.8, 1.0)
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return np.array(rgb)


def _paint_scene(width: int, height: int, rng: np.random.Generator, periodic: bool) -> np.ndarray:
    """Sky gradient, sun disc, mountain band and foreground, all vectorized."""
    ys = (np.arange(height) + 0.5) / height
    xs = (np.arange(width) + 0.5) / width
    yy = ys[:, None]
    xx = xs[None, :]

    sky_top = _saturated_color(rng, (0.5, 0.68))  # blues
    sky_low = _saturated_color(rng, (0.02, 0.16))  # warm horizon
    ground_hi = _saturated_color(rng, (0.2, 0.42))  # greens
    ground_lo = ground_hi * rng.uniform(0.3, 0.6)

    horizon = rng.uniform(0.45, 0.62)
    ridge = _ridge(xs, rng, base=horizon, amp=rng.uniform(0.03, 0.10), periodic=periodic)

    t_sky = np.clip(yy / horizon, 0.0, 1.0)[:, :, None]
    img = sky_top * (1.0 - t_sky) + sky_low * t_sky

    # Sun disc with a soft halo, kept in the upper sky.
    sun_x = rng.uniform(0.1, 0.9)
    sun_y = rng.uniform(0.08, min(0.35, horizon - 0.1))
    sun_r = rng.uniform(0.04, 0.09)
    dx = xx - sun_x
    if periodic:
        dx = (dx + 0.5) % 1.0 - 0.5
    d2 = dx**2 + (yy - sun_y) ** 2
    halo = np.exp(-d2 / (2.0 * sun_r**2))[:, :, None]
    img = img + halo * (np.array([1.0, 0.95, 0.75]) - img) * 0.9

    below = yy >= ridge[None, :]
    t_ground = np.clip((yy - ridge[None, :]) / np.maximum(1.0 - ridge[None, :], 1e-6), 0.0, 1.0)
    ground = ground_hi * (1.0 - t_ground[:, :, None]) + ground_lo * t_ground[:, :, None]
    img = np.where(below[:, :, None], ground, img)

    # Gentle texture so gradients are not degenerate.
    img += rng.normal(0.0, 0.012, size=img.shape)
    return _unit(img)


def synth_landscape(seed: int, size: int = 64) -> RasterImage:
    """A colorful landscape-like square image, deterministic in the seed."""
    rng = stream(seed, "landscape")
    return RasterImage(_paint_scene(size, size, rng, periodic=False))


def synth_corpus(n: int, seed: int, size: int = 64, manifest_id: str = "synthetic") -> Corpus:
    images = [
        (f"synthetic://{manifest_id}/{i:04d}", synth_landscape(seed + i, size))
        for i in range(n)
    ]
    return build_corpus(images, manifest_id, size)


def synth_panorama(seed: int, height: int = 256) -> Panorama:
    """A seamless 2:1 equirectangular environment, deterministic in the seed."""
    rng = stream(seed, "panorama")
    return Panorama(RasterImage(_paint_scene(2 * height, height, rng, periodic=True)))


def write_fixture_tree(out_dir, n_corpus: int = 20, n_panoramas: int = 3, seed: int = 7,
                       size: int = 64, pano_height: int = 256) -> dict[str, Path]:
    """Write corpus PNGs, a corpus manifest, panorama PNGs and a panorama
    manifest under `out_dir`; returns the manifest paths."""
    out = Path(out_dir)
    corpus_dir = out / "corpus"
    pano_dir = out / "panoramas"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    pano_dir.mkdir(parents=True, exist_ok=True)

    corpus_lines = ["# vphoto corpus manifest", f"# id=fixtures size={size}"]
    for i in range(n_corpus):
        name = f"corpus/{i:04d}.png"
        save_png(synth_landscape(seed + i, size), out / name)
        corpus_lines.append(name)
    corpus_manifest = out / "corpus.txt"
    corpus_manifest.write_text("\n".join(corpus_lines) + "\n")

    pano_lines = ["# fixture panoramas"]
    for i in range(n_panoramas):
        name = f"panoramas/pano_{i:02d}.png"
        save_png(synth_panorama(seed + 1000 + i, pano_height).image, out / name)
        pano_lines.append(name)
    pano_manifest = out / "panoramas.txt"
    pano_manifest.write_text("\n".join(pano_lines) + "\n")

    return {"corpus": corpus_manifest, "panoramas": pano_manifest}
