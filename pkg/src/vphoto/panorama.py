"""Equirectangular panoramas and perspective view extraction.

World frame: +y points up, yaw turns the forward axis +z toward +x, pitch
tilts it upward.  The horizontal center column of a panorama is yaw 0, the
top row is latitude +90.  Views are square gnomonic (rectilinear) projections
sampled bilinearly from the panorama with horizontal wraparound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import RasterImage, clamped, load_image

STANDARD_VIEW_COUNT = 6
STANDARD_VIEW_SEPARATION_DEG = 60.0
STANDARD_VIEW_PITCH_DEG = 10.0
STANDARD_VIEW_FOV_DEG = 90.0


@dataclass(frozen=True)
class ViewSpec:
    """A camera orientation plus field of view for a square output."""

    yaw: float
    pitch: float
    fov: float = STANDARD_VIEW_FOV_DEG
    out_size: int = 512

    def __post_init__(self) -> None:
        if not 0.0 <= self.yaw < 360.0:
            raise ValueError("yaw must lie in [0, 360)")
        if not -90.0 <= self.pitch <= 90.0:
            raise ValueError("pitch must lie in [-90, 90]")
        if not 0.0 < self.fov < 180.0:
            raise ValueError("fov must lie strictly between 0 and 180")
        if self.out_size < 1:
            raise ValueError("out_size must be positive")


@dataclass(frozen=True)
class Panorama:
    """Full 360x180 equirectangular environment image."""

    image: RasterImage

    def __post_init__(self) -> None:
        if self.image.width != 2 * self.image.height:
            raise ValueError(
                f"equirectangular panorama requires width == 2*height, "
                f"got {self.image.width}x{self.image.height}"
            )


def _rotation(spec: ViewSpec) -> np.ndarray:
    """World-from-camera rotation for a view."""
    y = math.radians(spec.yaw)
    p = math.radians(spec.pitch)
    r_yaw = np.array(
        [[math.cos(y), 0.0, math.sin(y)], [0.0, 1.0, 0.0], [-math.sin(y), 0.0, math.cos(y)]]
    )
    r_pitch = np.array(
        [[1.0, 0.0, 0.0], [0.0, math.cos(p), math.sin(p)], [0.0, -math.sin(p), math.cos(p)]]
    )
    return r_yaw @ r_pitch


def _camera_dirs(spec: ViewSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    half = math.tan(math.radians(spec.fov) / 2.0)
    x = (2.0 * u - 1.0) * half
    y = (1.0 - 2.0 * v) * half
    z = np.ones_like(x)
    d = np.stack([x, y, z], axis=-1)
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def pixel_to_ray(spec: ViewSpec, u: float, v: float) -> np.ndarray:
    """Unit world direction of the normalized view coordinate (u, v).

    (0.5, 0.5) maps exactly to the (yaw, pitch) axis.
    """
    d = _camera_dirs(spec, np.asarray(float(u)), np.asarray(float(v)))
    return _rotation(spec) @ d


def ray_to_pixel(spec: ViewSpec, direction) -> tuple[float, float] | None:
    """Normalized view coordinate seeing `direction`, or None if behind the camera.

    Coordinates outside [0, 1] mean the ray falls outside the frustum.
    """
    d = np.asarray(direction, dtype=np.float64)
    cam = _rotation(spec).T @ d
    if cam[2] <= 1e-12:
        return None
    half = math.tan(math.radians(spec.fov) / 2.0)
    u = (cam[0] / (cam[2] * half) + 1.0) / 2.0
    v = (1.0 - cam[1] / (cam[2] * half)) / 2.0
    return float(u), float(v)


def view_contains(spec: ViewSpec, direction) -> bool:
    uv = ray_to_pixel(spec, direction)
    return uv is not None and 0.0 <= uv[0] <= 1.0 and 0.0 <= uv[1] <= 1.0


def direction_from_angles(yaw_deg: float, pitch_deg: float) -> np.ndarray:
    y = math.radians(yaw_deg)
    p = math.radians(pitch_deg)
    return np.array([math.cos(p) * math.sin(y), math.sin(p), math.cos(p) * math.cos(y)])


def angles_from_direction(direction) -> tuple[float, float]:
    """(yaw in [0, 360), pitch in [-90, 90]) of a world direction."""
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    pitch = math.degrees(math.asin(np.clip(d[1], -1.0, 1.0)))
    yaw = math.degrees(math.atan2(d[0], d[2])) % 360.0
    return yaw, pitch


def sample_equirect(pano: Panorama, lon_deg: np.ndarray, lat_deg: np.ndarray) -> np.ndarray:
    """Bilinear panorama lookup with horizontal wraparound and vertical clamp."""
    px = pano.image.pixels
    h, w = px.shape[:2]
    u = (lon_deg / 360.0 + 0.5) % 1.0
    v = (90.0 - lat_deg) / 180.0
    x = u * w - 0.5
    y = np.clip(v * h - 0.5, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    fx = x - x0
    x0 %= w
    x1 = (x0 + 1) % w
    y0 = np.floor(y).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    fy = (y - y0)[..., None]
    fx = fx[..., None]
    top = px[y0, x0] * (1.0 - fx) + px[y0, x1] * fx
    bot = px[y1, x0] * (1.0 - fx) + px[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def project(pano: Panorama, spec: ViewSpec) -> RasterImage:
    """Square perspective projection of the panorama along the view axis."""
    n = spec.out_size
    coords = (np.arange(n, dtype=np.float64) + 0.5) / n
    u, v = np.meshgrid(coords, coords)
    dirs = _camera_dirs(spec, u, v) @ _rotation(spec).T
    lat = np.degrees(np.arcsin(np.clip(dirs[..., 1], -1.0, 1.0)))
    lon = np.degrees(np.arctan2(dirs[..., 0], dirs[..., 2]))
    return clamped(sample_equirect(pano, lon, lat))


def standard_views(pano: Panorama, out_size: int = 512) -> list[RasterImage]:
    """The six overlapping views that seed the pipeline.

    Yaw steps of 60 degrees with a 90 degree field of view give roughly 30
    degrees of overlap between neighbors, all looking 10 degrees up.
    """
    return [
        project(pano, standard_view_spec(k, out_size))
        for k in range(STANDARD_VIEW_COUNT)
    ]


def standard_view_spec(index: int, out_size: int = 512) -> ViewSpec:
    if not 0 <= index < STANDARD_VIEW_COUNT:
        raise ValueError(f"view index must be in [0, {STANDARD_VIEW_COUNT})")
    return ViewSpec(
        yaw=index * STANDARD_VIEW_SEPARATION_DEG,
        pitch=STANDARD_VIEW_PITCH_DEG,
        fov=STANDARD_VIEW_FOV_DEG,
        out_size=out_size,
    )


def load_panorama(path) -> Panorama:
    return Panorama(load_image(path))


def load_manifest(path) -> list[Path]:
    """Panorama collection file: one path per line, `#` starts a comment."""
    base = Path(path).parent
    entries: list[Path] = []
    for line in Path(path).read_text().splitlines():
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        p = Path(text)
        entries.append(p if p.is_absolute() else base / p)
    return entries
