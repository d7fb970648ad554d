"""Pinhole camera, plumb-bob distortion and the camera JSON format."""

import numpy as np
import pytest

from evflow import CameraModel, DataError, FormatError, dump_camera_json, load_camera_json

MVSEC_LIKE = CameraModel(fx=223.5, fy=223.2, cx=170.1, cy=128.6,
                         k1=-0.21, k2=0.07, p1=1e-4, p2=-2e-4, k3=0.002)


class TestDistortion:
    def test_zero_coefficients_identity(self, rng):
        cam = CameraModel(100.0, 100.0, 50.0, 50.0)
        x = rng.uniform(-0.5, 0.5, 40)
        y = rng.uniform(-0.5, 0.5, 40)
        xd, yd = cam.distort(x, y)
        assert np.array_equal(xd, x) and np.array_equal(yd, y)
        xu, yu, ok = cam.undistort(x, y)
        assert ok.all() and np.array_equal(xu, x) and np.array_equal(yu, y)

    def test_undistort_distort_roundtrip(self, rng):
        for _ in range(20):
            x = rng.uniform(-0.45, 0.45, 50)
            y = rng.uniform(-0.45, 0.45, 50)
            xd, yd = MVSEC_LIKE.distort(x, y)
            xu, yu, ok = MVSEC_LIKE.undistort(xd, yd)
            assert ok.all()
            assert np.max(np.abs(xu - x)) < 1e-9
            assert np.max(np.abs(yu - y)) < 1e-9

    def test_pixel_mapping_consistency(self):
        px, py = MVSEC_LIKE.normalized_to_pixel(*MVSEC_LIKE.pixel_to_normalized(34.0, 77.0))
        assert px == pytest.approx(34.0) and py == pytest.approx(77.0)

    def test_divergent_points_flagged(self):
        # far outside the calibrated field of view the fixed point may not
        # converge; it must be reported, not silently returned
        cam = CameraModel(100.0, 100.0, 50.0, 50.0, k1=-0.9)
        _, _, ok = cam.undistort(np.array([5.0]), np.array([5.0]))
        assert not ok.all()

    def test_focal_validation(self):
        with pytest.raises(DataError):
            CameraModel(0.0, 1.0, 0.0, 0.0)


class TestCameraJson:
    def test_roundtrip(self):
        back = load_camera_json(dump_camera_json(MVSEC_LIKE))
        assert back == MVSEC_LIKE

    def test_missing_field(self):
        with pytest.raises(FormatError, match="k3"):
            load_camera_json('{"fx": 1, "fy": 1, "cx": 0, "cy": 0, '
                             '"k1": 0, "k2": 0, "p1": 0, "p2": 0}')

    def test_invalid_json(self):
        with pytest.raises(FormatError):
            load_camera_json(b"{nope")

    def test_non_numeric_field(self):
        with pytest.raises(FormatError, match="numbers"):
            load_camera_json('{"fx": "wide", "fy": 1, "cx": 0, "cy": 0, '
                             '"k1": 0, "k2": 0, "p1": 0, "p2": 0, "k3": 0}')
