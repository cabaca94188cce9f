"""Float RGB rasters and the shared pixel arithmetic.

An image is an immutable (height, width, 3) float64 array with every channel
in [0, 1].  Filters, scorers and projections all consume and produce these
rasters.  Clamping back into [0, 1] is always the final step of a public
operation, never an intermediate one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# Rec. 601 luminance weights, the most common fixed convention.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """RGB raster with float64 channels in [0, 1], immutable once built."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected a (height, width, 3) pixel array, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(px)):
            raise ValueError("pixel values must be finite")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def size(self) -> tuple[int, int]:
        return (self.width, self.height)

    def is_square(self) -> bool:
        return self.width == self.height

    @staticmethod
    def constant(width: int, height: int, rgb=(0.0, 0.0, 0.0)) -> "RasterImage":
        if width < 1 or height < 1:
            raise ValueError("dimensions must be positive")
        px = np.empty((height, width, 3), dtype=np.float64)
        px[:] = np.asarray(rgb, dtype=np.float64)
        return RasterImage(px)


def clamped(pixels: np.ndarray) -> RasterImage:
    """Wrap an unclamped float array as an image, clipping into [0, 1]."""
    return RasterImage(np.clip(pixels, 0.0, 1.0))


def luminance(img: RasterImage | np.ndarray) -> np.ndarray:
    """Per-pixel Rec. 601 luminance as a 2-d array."""
    px = img.pixels if isinstance(img, RasterImage) else np.asarray(img, dtype=np.float64)
    return px @ LUMA_WEIGHTS


def hsv_saturation(img: RasterImage | np.ndarray) -> np.ndarray:
    """Per-pixel HSV saturation, 0 where the pixel is black."""
    px = img.pixels if isinstance(img, RasterImage) else np.asarray(img, dtype=np.float64)
    mx = px.max(axis=2)
    mn = px.min(axis=2)
    out = np.zeros_like(mx)
    np.divide(mx - mn, mx, out=out, where=mx > 0)
    return out


def to_grayscale(img: RasterImage) -> RasterImage:
    lum = luminance(img)
    return RasterImage(np.repeat(lum[:, :, None], 3, axis=2))


def _bilinear_coords(n_out: int, n_in: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices and fractional weights for a pixel-center aligned resample."""
    x = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1.0)
    x0 = np.floor(x).astype(np.intp)
    x1 = np.minimum(x0 + 1, n_in - 1)
    return x0, x1, x - x0


def resample_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of a 2-d or (h, w, c) array; weights sum to 1 per output pixel."""
    if out_h < 1 or out_w < 1:
        raise ValueError("target dimensions must be positive")
    h, w = arr.shape[:2]
    y0, y1, fy = _bilinear_coords(out_h, h)
    x0, x1, fx = _bilinear_coords(out_w, w)
    squeeze = arr.ndim == 2
    a = arr[:, :, None] if squeeze else arr
    fx = fx[None, :, None]
    fy = fy[:, None, None]
    top = a[y0][:, x0] * (1.0 - fx) + a[y0][:, x1] * fx
    bot = a[y1][:, x0] * (1.0 - fx) + a[y1][:, x1] * fx
    out = top * (1.0 - fy) + bot * fy
    return out[:, :, 0] if squeeze else out


def resize_bilinear(img: RasterImage, out_w: int, out_h: int) -> RasterImage:
    """Resize with pixel-center aligned bilinear interpolation.

    Resizing to the source dimensions is an exact copy; resizing a constant
    image yields the same constant at any target size.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("target dimensions must be positive")
    return clamped(resample_bilinear(img.pixels, out_h, out_w))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Discrete Gaussian taps truncated at 3 sigma and renormalized to sum 1."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = max(1, math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def _correlate_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="edge")
    out = np.zeros_like(arr)
    index = [slice(None)] * arr.ndim
    for i, weight in enumerate(kernel):
        index[axis] = slice(i, i + arr.shape[axis])
        out += weight * padded[tuple(index)]
    return out


def gaussian_blur_array(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with clamp-to-edge boundaries, on a raw array."""
    kernel = gaussian_kernel(sigma)
    out = _correlate_axis(arr, kernel, axis=0)
    return _correlate_axis(out, kernel, axis=1)


def gaussian_blur(img: RasterImage, sigma: float) -> RasterImage:
    """Gaussian blur; constant images are exactly invariant for any sigma."""
    return clamped(gaussian_blur_array(img.pixels, sigma))


def crop(img: RasterImage, x: int, y: int, w: int, h: int) -> RasterImage:
    if w < 1 or h < 1:
        raise ValueError("crop dimensions must be positive")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise ValueError(
            f"crop ({x},{y},{w},{h}) exceeds image bounds {img.width}x{img.height}"
        )
    return RasterImage(img.pixels[y : y + h, x : x + w])


def mean_abs_diff(a: RasterImage, b: RasterImage) -> float:
    """Mean absolute per-pixel-channel difference, in [0, 1]."""
    if a.pixels.shape != b.pixels.shape:
        raise ValueError(f"dimension mismatch: {a.pixels.shape} vs {b.pixels.shape}")
    return float(np.mean(np.abs(a.pixels - b.pixels)))


def perturbation_score(delta: float, cap: float) -> float:
    """Similarity score for a perturbed image: 1 at delta 0, 0 at and past the cap."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return max(0.0, 1.0 - delta / cap)


def load_image(path) -> RasterImage:
    """Read an 8-bit PNG or JPEG file into a [0, 1] float raster."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
    return RasterImage(arr)


def save_png(img: RasterImage, path) -> None:
    """Write as 8-bit PNG, rounding each channel to the nearest of 256 levels."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    data = np.rint(img.pixels * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")
