"""Parametric image filters and the inverse-effect trick.

Every filter has one concrete formula, a declared parameter domain, and a
neutral parameter at which it is exactly the identity.  Filters compute in
unclamped float space and clamp once on exit; the unclamped intermediate is
what feeds the inverse-effect construction 2*M - F(M), which synthesizes the
"negative" of a filter that only goes one way.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .raster import LUMA_WEIGHTS, RasterImage, clamped, gaussian_blur_array

# Detail gain for the local-contrast filter; chosen so strength 1 is a strong
# but not absurd boost.
HDR_DETAIL_GAIN = 1.5
# Blur scale factors, expressed as a fraction of (width + height).
HDR_SIGMA_FRACTION = 0.03
FLATTEN_SIGMA_FRACTION = 0.05
# Brightness / contrast travel of the tune filters.
TUNE_BRIGHTNESS_RANGE = 0.5
TUNE_CONTRAST_RANGE = 1.0
# Corner-multiplier law for the vignette, neutral at 0.5.
VIGNETTE_GAIN = 1.2
VIGNETTE_MULT_MIN = 0.0
VIGNETTE_MULT_MAX = 1.1

CURVE_POINTS = 6
CURVE_OFFSET_LIMIT = 0.15


class FilterId(Enum):
    SATURATION = "saturation"
    HDR = "hdr"
    BRIGHTEN = "brighten"
    VIGNETTE = "vignette"
    TUNE_BRIGHTNESS = "tune_brightness"
    TUNE_CONTRAST = "tune_contrast"
    CURVE = "curve"
    FLATTEN_BRIGHTNESS = "flatten_brightness"


@dataclass(frozen=True)
class ParameterDomain:
    """Per-dimension closed bounds plus the identity (neutral) parameter."""

    bounds: tuple[tuple[float, float], ...]
    neutral: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def contains(self, values) -> bool:
        if len(values) != self.dim:
            return False
        return all(lo <= v <= hi for v, (lo, hi) in zip(values, self.bounds))


_UNIT = ((0.0, 1.0),)

_DOMAINS: dict[FilterId, ParameterDomain] = {
    FilterId.SATURATION: ParameterDomain(_UNIT, (0.5,)),
    FilterId.HDR: ParameterDomain(_UNIT, (0.0,)),
    FilterId.BRIGHTEN: ParameterDomain(_UNIT, (0.0,)),
    FilterId.VIGNETTE: ParameterDomain(_UNIT, (0.5,)),
    FilterId.TUNE_BRIGHTNESS: ParameterDomain(_UNIT, (0.5,)),
    FilterId.TUNE_CONTRAST: ParameterDomain(_UNIT, (0.5,)),
    FilterId.CURVE: ParameterDomain(
        ((-CURVE_OFFSET_LIMIT, CURVE_OFFSET_LIMIT),) * CURVE_POINTS,
        (0.0,) * CURVE_POINTS,
    ),
    FilterId.FLATTEN_BRIGHTNESS: ParameterDomain(_UNIT, (0.0,)),
}


def parameter_domain(filter_id: FilterId) -> ParameterDomain:
    return _DOMAINS[filter_id]


def neutral_params(filter_id: FilterId) -> tuple[float, ...]:
    return _DOMAINS[filter_id].neutral


@dataclass(frozen=True)
class FilterParams:
    """A filter reference with an in-domain parameter vector."""

    filter: FilterId
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        domain = parameter_domain(self.filter)
        if not domain.contains(values):
            raise ValueError(
                f"parameters {values} outside the {self.filter.value} domain {domain.bounds}"
            )


def _check_param(filter_id: FilterId, values) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    domain = parameter_domain(filter_id)
    if not domain.contains(values):
        raise ValueError(
            f"parameters {values} outside the {filter_id.value} domain {domain.bounds}"
        )
    return values


# --- raw (unclamped) filter kernels -------------------------------------

def _saturation_raw(px: np.ndarray, p: float) -> np.ndarray:
    # m = 2p: 0 is grayscale, 0.5 identity, 1 doubles chroma.
    gray = (px @ LUMA_WEIGHTS)[:, :, None]
    return gray + (2.0 * p) * (px - gray)


def _hdr_raw(px: np.ndarray, s: float) -> np.ndarray:
    if s == 0.0:
        return px.copy()
    h, w = px.shape[:2]
    sigma = HDR_SIGMA_FRACTION * (w + h)
    base = gaussian_blur_array(px, sigma)
    return px + s * HDR_DETAIL_GAIN * (px - base)


def _brighten_raw(px: np.ndarray, amount: float) -> np.ndarray:
    return 1.0 - (1.0 - px) * (1.0 - amount)


def _vignette_corner_multiplier(outer: float) -> float:
    g = 1.0 + (outer - 0.5) * VIGNETTE_GAIN
    return float(np.clip(g, VIGNETTE_MULT_MIN, VIGNETTE_MULT_MAX))


def _vignette_raw(px: np.ndarray, outer: float) -> np.ndarray:
    h, w = px.shape[:2]
    g = _vignette_corner_multiplier(outer)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    corner = np.hypot(cx, cy)
    if corner == 0.0:
        return px.copy()
    ys = np.arange(h, dtype=np.float64)[:, None] - cy
    xs = np.arange(w, dtype=np.float64)[None, :] - cx
    r = np.hypot(xs, ys) / corner
    # Cosine-squared window from 1 at the center to g at the corner.
    mult = 1.0 + (g - 1.0) * np.sin(0.5 * np.pi * np.minimum(r, 1.0)) ** 2
    return px * mult[:, :, None]


def _tune_brightness_raw(px: np.ndarray, p: float) -> np.ndarray:
    return px + (p - 0.5) * TUNE_BRIGHTNESS_RANGE


def _tune_contrast_raw(px: np.ndarray, p: float) -> np.ndarray:
    return 0.5 + (px - 0.5) * (1.0 + (p - 0.5) * TUNE_CONTRAST_RANGE)


def _curve_raw(px: np.ndarray, offsets) -> np.ndarray:
    xs = np.linspace(0.0, 1.0, CURVE_POINTS)
    ys = xs + np.asarray(offsets, dtype=np.float64)
    return np.interp(px, xs, ys)


def _flatten_raw(px: np.ndarray, s: float) -> np.ndarray:
    if s == 0.0:
        return px.copy()
    h, w = px.shape[:2]
    b = px @ LUMA_WEIGHTS
    b_avg = gaussian_blur_array(b, FLATTEN_SIGMA_FRACTION * (w + h))
    b_new = b_avg * s + b * (1.0 - s)
    # Preserve chroma by scaling channels with the brightness ratio; fall back
    # to an additive shift where the pixel is too dark to carry a ratio.
    tiny = 1e-8
    scale = np.where(b > tiny, b_new / np.where(b > tiny, b, 1.0), 1.0)
    scaled = px * scale[:, :, None]
    additive = px + (b_new - b)[:, :, None]
    return np.where((b > tiny)[:, :, None], scaled, additive)


_RAW_KERNELS = {
    FilterId.SATURATION: lambda px, v: _saturation_raw(px, v[0]),
    FilterId.HDR: lambda px, v: _hdr_raw(px, v[0]),
    FilterId.BRIGHTEN: lambda px, v: _brighten_raw(px, v[0]),
    FilterId.VIGNETTE: lambda px, v: _vignette_raw(px, v[0]),
    FilterId.TUNE_BRIGHTNESS: lambda px, v: _tune_brightness_raw(px, v[0]),
    FilterId.TUNE_CONTRAST: lambda px, v: _tune_contrast_raw(px, v[0]),
    FilterId.CURVE: _curve_raw,
    FilterId.FLATTEN_BRIGHTNESS: lambda px, v: _flatten_raw(px, v[0]),
}


def apply_filter_raw(img: RasterImage, filter_id: FilterId, values) -> np.ndarray:
    """Unclamped filter output; internal building block for negate_effect."""
    values = _check_param(filter_id, values)
    # The neutral parameter is the identity exactly, not merely to rounding.
    if values == parameter_domain(filter_id).neutral:
        return img.pixels.copy()
    return _RAW_KERNELS[filter_id](img.pixels, values)


def apply_filter(img: RasterImage, filter_id: FilterId, values) -> RasterImage:
    return clamped(apply_filter_raw(img, filter_id, values))


def apply_params(img: RasterImage, params: FilterParams) -> RasterImage:
    return apply_filter(img, params.filter, params.values)


def negate_effect(filter_id: FilterId, values, img: RasterImage) -> RasterImage:
    """Mirror a filter's effect around the input: clamp(2*M - F(M)).

    Uses the filter's unclamped intermediate so the mirroring is exact where
    no channel saturates.
    """
    raw = apply_filter_raw(img, filter_id, values)
    return clamped(2.0 * img.pixels - raw)


# --- public single-filter entry points -----------------------------------

def saturation(img: RasterImage, p: float) -> RasterImage:
    """Chroma scale: 0 gives grayscale, 0.5 is the identity, 1 doubles chroma."""
    return apply_filter(img, FilterId.SATURATION, (p,))


def hdr(img: RasterImage, s: float) -> RasterImage:
    """Local-contrast boost of the detail layer above a Gaussian base; 0 is identity."""
    return apply_filter(img, FilterId.HDR, (s,))


def brighten(img: RasterImage, amount: float) -> RasterImage:
    """Monotone screen-blend brightening; white is a fixed point."""
    return apply_filter(img, FilterId.BRIGHTEN, (amount,))


def vignette(img: RasterImage, outer: float) -> RasterImage:
    """Radial brightness falloff; 0.5 is neutral, below darkens corners, above brightens."""
    return apply_filter(img, FilterId.VIGNETTE, (outer,))


def tune_brightness(img: RasterImage, p: float) -> RasterImage:
    return apply_filter(img, FilterId.TUNE_BRIGHTNESS, (p,))


def tune_contrast(img: RasterImage, p: float) -> RasterImage:
    return apply_filter(img, FilterId.TUNE_CONTRAST, (p,))


def curve_filter(img: RasterImage, offsets) -> RasterImage:
    """Piecewise-linear tone curve through 6 evenly spaced, offset control points."""
    return apply_filter(img, FilterId.CURVE, tuple(offsets))


def flatten_brightness(img: RasterImage, s: float) -> RasterImage:
    """Pull per-pixel brightness toward its Gaussian neighborhood average."""
    return apply_filter(img, FilterId.FLATTEN_BRIGHTNESS, (s,))


# --- provenance text form -------------------------------------------------

def effect_signature(filter_id: FilterId, values, negated: bool = False) -> str:
    """Text form `filter=name;p=v1,v2,...`; a leading '-' on a single value
    marks an inverse-effect application."""
    vals = list(float(v) for v in values)
    if negated:
        if len(vals) != 1:
            raise ValueError("inverse effect is only defined for 1-d filters")
        vals = [-vals[0]]
    joined = ",".join(repr(v) for v in vals)
    return f"filter={filter_id.value};p={joined}"


def parse_effect(text: str) -> tuple[FilterId, tuple[float, ...], bool]:
    """Inverse of effect_signature; returns (filter, values, negated)."""
    try:
        filter_part, param_part = text.split(";", 1)
        _, name = filter_part.split("=", 1)
        _, raw = param_part.split("=", 1)
        values = tuple(float(v) for v in raw.split(","))
    except ValueError as exc:
        raise ValueError(f"malformed effect signature: {text!r}") from exc
    filter_id = FilterId(name)
    negated = len(values) == 1 and values[0] < 0
    if negated:
        values = (-values[0],)
    return filter_id, values, negated


def apply_effect(img: RasterImage, filter_id: FilterId, values, negated: bool) -> RasterImage:
    if negated:
        return negate_effect(filter_id, values, img)
    return apply_filter(img, filter_id, values)


__all__ = [
    "FilterId",
    "FilterParams",
    "ParameterDomain",
    "parameter_domain",
    "neutral_params",
    "apply_filter",
    "apply_filter_raw",
    "apply_params",
    "apply_effect",
    "negate_effect",
    "saturation",
    "hdr",
    "brighten",
    "vignette",
    "tune_brightness",
    "tune_contrast",
    "curve_filter",
    "flatten_brightness",
    "effect_signature",
    "parse_effect",
]
