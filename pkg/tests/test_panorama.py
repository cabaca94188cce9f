"""Projection geometry: rays, gnomonic views and panorama sampling."""

import math

import numpy as np
import pytest

from vphoto.panorama import (
    Panorama,
    ViewSpec,
    angles_from_direction,
    direction_from_angles,
    load_manifest,
    pixel_to_ray,
    project,
    ray_to_pixel,
    standard_view_spec,
    standard_views,
    view_contains,
)
from vphoto.raster import RasterImage, mean_abs_diff
from vphoto.synthetic import synth_panorama


class TestTypes:
    def test_panorama_requires_two_to_one(self):
        with pytest.raises(ValueError):
            Panorama(RasterImage.constant(10, 6))
        Panorama(RasterImage.constant(12, 6))

    def test_view_spec_validation(self):
        with pytest.raises(ValueError):
            ViewSpec(yaw=0, pitch=0, fov=180)
        with pytest.raises(ValueError):
            ViewSpec(yaw=360, pitch=0, fov=90)
        with pytest.raises(ValueError):
            ViewSpec(yaw=0, pitch=91, fov=90)


class TestPixelToRay:
    def test_center_is_forward_axis(self):
        spec = ViewSpec(yaw=0, pitch=0, fov=90, out_size=8)
        ray = pixel_to_ray(spec, 0.5, 0.5)
        assert np.allclose(ray, [0.0, 0.0, 1.0], atol=1e-12)

    def test_center_elevation_matches_pitch(self):
        spec = ViewSpec(yaw=0, pitch=10, fov=90, out_size=8)
        ray = pixel_to_ray(spec, 0.5, 0.5)
        _, pitch = angles_from_direction(ray)
        assert pitch == pytest.approx(10.0, abs=1e-9)

    def test_left_edge_is_45_degrees_off_axis(self):
        # Tangent-plane geometry: at fov 90 the u=0 column sits at atan(1)=45
        # degrees from the view axis, on the left.
        spec = ViewSpec(yaw=0, pitch=0, fov=90, out_size=8)
        ray = pixel_to_ray(spec, 0.0, 0.5)
        center = pixel_to_ray(spec, 0.5, 0.5)
        angle = math.degrees(math.acos(float(np.dot(ray, center))))
        assert angle == pytest.approx(45.0, abs=1e-9)
        yaw, _ = angles_from_direction(ray)
        assert yaw == pytest.approx(315.0, abs=1e-9)  # toward -x

    def test_rays_are_unit_norm(self):
        rng = np.random.default_rng(30)
        spec = ViewSpec(yaw=123, pitch=-20, fov=75, out_size=8)
        for _ in range(100):
            ray = pixel_to_ray(spec, rng.uniform(), rng.uniform())
            assert abs(np.linalg.norm(ray) - 1.0) < 1e-9

    def test_round_trip_with_ray_to_pixel(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            spec = ViewSpec(
                yaw=float(rng.uniform(0, 360)),
                pitch=float(rng.uniform(-60, 60)),
                fov=float(rng.uniform(40, 120)),
                out_size=16,
            )
            u, v = rng.uniform(), rng.uniform()
            uv = ray_to_pixel(spec, pixel_to_ray(spec, u, v))
            assert uv is not None
            assert uv[0] == pytest.approx(u, abs=1e-9)
            assert uv[1] == pytest.approx(v, abs=1e-9)

    def test_behind_camera_is_none(self):
        spec = ViewSpec(yaw=0, pitch=0, fov=90)
        assert ray_to_pixel(spec, [0.0, 0.0, -1.0]) is None


def test_direction_angle_round_trip():
    rng = np.random.default_rng(32)
    for _ in range(50):
        yaw = float(rng.uniform(0, 360))
        pitch = float(rng.uniform(-89, 89))
        got_yaw, got_pitch = angles_from_direction(direction_from_angles(yaw, pitch))
        assert got_yaw == pytest.approx(yaw, abs=1e-9)
        assert got_pitch == pytest.approx(pitch, abs=1e-9)


class TestProject:
    def test_constant_panorama_projects_constant(self):
        pano = Panorama(RasterImage.constant(64, 32, (0.2, 0.6, 0.4)))
        out = project(pano, ViewSpec(yaw=45, pitch=10, fov=90, out_size=16))
        assert np.allclose(out.pixels, [0.2, 0.6, 0.4], atol=1e-12)

    def test_bright_column_lands_at_view_center(self):
        w, h = 128, 64
        px = np.zeros((h, w, 3))
        px[:, w // 2 - 1 : w // 2 + 1] = 1.0  # longitude ~0
        pano = Panorama(RasterImage(px))
        spec = ViewSpec(yaw=0, pitch=0, fov=90, out_size=65)
        view = project(pano, spec)
        col_energy = view.pixels.sum(axis=(0, 2))
        bright_cols = np.nonzero(col_energy > 0)[0]
        # Ray-trace oracle: output column j is bright iff its source x
        # coordinate falls within bilinear reach (one pixel) of a lit column.
        lit = {w // 2 - 1, w // 2}
        expected = []
        for j in range(65):
            ray = pixel_to_ray(spec, (j + 0.5) / 65, 0.5)
            lon = math.degrees(math.atan2(ray[0], ray[2]))
            x = (lon / 360.0 + 0.5) * w - 0.5
            if any(abs(x - c) < 1.0 for c in lit):
                expected.append(j)
        assert set(bright_cols) == set(expected)
        assert 32 in bright_cols  # horizontal center

    def test_rotation_equivariance(self):
        pano = synth_panorama(5, height=64)
        shift = 16
        rolled = Panorama(RasterImage(np.roll(pano.image.pixels, shift, axis=1)))
        delta = shift * 360.0 / pano.image.width
        a = project(pano, ViewSpec(yaw=40.0, pitch=10, fov=90, out_size=64))
        b = project(rolled, ViewSpec(yaw=(40.0 + delta) % 360.0, pitch=10, fov=90, out_size=64))
        assert mean_abs_diff(a, b) < 1e-3

    def test_malformed_panorama_rejected(self):
        with pytest.raises(ValueError):
            Panorama(RasterImage.constant(63, 32))


class TestStandardViews:
    def test_six_square_views(self):
        pano = synth_panorama(6, height=32)
        views = standard_views(pano, out_size=24)
        assert len(views) == 6
        assert all(v.size == (24, 24) for v in views)

    def test_constant_panorama_gives_identical_views(self):
        pano = Panorama(RasterImage.constant(64, 32, (0.3, 0.4, 0.5)))
        views = standard_views(pano, out_size=16)
        for v in views[1:]:
            assert np.array_equal(v.pixels, views[0].pixels)

    def test_adjacent_views_share_a_feature(self):
        # A direction between view axes 0 and 1 is visible in both frusta.
        d = direction_from_angles(30.0, 10.0)
        assert view_contains(standard_view_spec(0), d)
        assert view_contains(standard_view_spec(1), d)

    def test_full_yaw_coverage_at_low_pitch(self):
        specs = [standard_view_spec(k) for k in range(6)]
        for yaw in np.arange(0.0, 360.0, 1.0):
            for pitch in (0.0, 10.0, 20.0):
                d = direction_from_angles(float(yaw), pitch)
                assert any(view_contains(s, d) for s in specs), (yaw, pitch)


def test_manifest_parsing(tmp_path):
    (tmp_path / "a.png").write_bytes(b"")
    manifest = tmp_path / "panos.txt"
    manifest.write_text("# comment\na.png\n\n/abs/b.png  # trailing comment\n")
    paths = load_manifest(manifest)
    assert paths[0] == tmp_path / "a.png"
    assert str(paths[1]) == "/abs/b.png"
