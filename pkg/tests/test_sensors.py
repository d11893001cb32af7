import numpy as np
import pytest

from magslam.geometry import exp_rot
from magslam.sensors import (
    BOARD_SIZE_X,
    BOARD_SIZE_Y,
    ArrayLayout,
    Calibration,
    correct_measurement,
    default_layout_30,
    load_layout,
    measure_forward,
    save_layout,
)


class TestArrayLayout:
    def test_default_layout_counts(self):
        layout = default_layout_30()
        assert layout.n_mag == 30
        assert layout.positions.shape == (30, 3)

    def test_default_layout_envelope(self):
        layout = default_layout_30()
        assert layout.positions[:, 0].max() == pytest.approx(BOARD_SIZE_X / 2)
        assert layout.positions[:, 0].min() == pytest.approx(-BOARD_SIZE_X / 2)
        assert layout.positions[:, 1].max() == pytest.approx(BOARD_SIZE_Y / 2)
        assert layout.positions[:, 1].min() == pytest.approx(-BOARD_SIZE_Y / 2)
        assert np.allclose(layout.positions[:, 2], 0.0)

    def test_default_layout_centred(self):
        layout = default_layout_30()
        assert np.allclose(layout.positions.mean(axis=0), 0.0, atol=1e-15)

    def test_single(self):
        layout = default_layout_30()
        one = layout.single(7)
        assert one.n_mag == 1
        assert np.array_equal(one.positions[0], layout.positions[7])

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            ArrayLayout(np.zeros((3, 2)))


class TestCalibration:
    def test_identity(self):
        calib = Calibration.identity(4)
        assert np.array_equal(calib.scale, np.ones((4, 3)))
        assert np.array_equal(calib.bias, np.zeros((4, 3)))

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            Calibration(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            Calibration(np.ones((2, 3)), np.zeros((3, 3)))


class TestMeasureForward:
    def test_uniform_field_identity_pose(self):
        # A uniform field with identity calibration reads the same on all sensors.
        layout = default_layout_30()
        field = np.array([19.2, 0.8, 45.5])
        y = measure_forward(
            lambda pts: np.tile(field, (len(pts), 1)),
            np.zeros(3),
            np.eye(3),
            layout,
            Calibration.identity(30),
        )
        assert np.allclose(y, field, atol=1e-14)

    def test_rotation_maps_field_to_body(self):
        layout = ArrayLayout(np.zeros((1, 3)))
        rot = exp_rot([0.0, 0.0, np.pi / 2])  # body-from-nav
        field = np.array([1.0, 0.0, 0.0])
        y = measure_forward(
            lambda pts: np.tile(field, (len(pts), 1)),
            np.zeros(3),
            rot,
            layout,
            Calibration.identity(1),
        )
        assert np.allclose(y[0], rot @ field, atol=1e-14)

    def test_position_dependence_samples_sensor_site(self):
        # Linear field: each sensor must read the field at its own location.
        layout = default_layout_30()
        grad = np.diag([2.0, -1.0, 0.5])
        y = measure_forward(
            lambda pts: pts @ grad.T,
            np.array([0.5, 0.2, -0.1]),
            np.eye(3),
            layout,
            Calibration.identity(30),
        )
        expected = (np.array([0.5, 0.2, -0.1]) + layout.positions) @ grad.T
        assert np.allclose(y, expected, atol=1e-12)

    def test_calibration_round_trip(self):
        # (d * y - b) recovers the body field exactly in the absence of noise.
        rng = np.random.default_rng(11)
        layout = default_layout_30()
        calib = Calibration(
            rng.uniform(0.9, 1.1, size=(30, 3)), rng.uniform(-1.5, 1.5, size=(30, 3))
        )
        field = np.array([19.2, 0.8, 45.5])
        rot = exp_rot([0.2, -0.1, 0.4])
        y = measure_forward(
            lambda pts: np.tile(field, (len(pts), 1)), np.zeros(3), rot, layout, calib
        )
        recovered = calib.scale * y - calib.bias
        assert np.allclose(recovered, rot @ field, atol=1e-12)

    def test_noise_requires_rng(self):
        layout = default_layout_30()
        with pytest.raises(ValueError):
            measure_forward(
                lambda pts: np.zeros((len(pts), 3)),
                np.zeros(3),
                np.eye(3),
                layout,
                Calibration.identity(30),
                noise_std=0.1,
            )

    def test_noise_statistics(self):
        layout = default_layout_30()
        rng = np.random.default_rng(12)
        ys = np.stack(
            [
                measure_forward(
                    lambda pts: np.zeros((len(pts), 3)),
                    np.zeros(3),
                    np.eye(3),
                    layout,
                    Calibration.identity(30),
                    noise_std=0.1,
                    rng=rng,
                )
                for _ in range(200)
            ]
        )
        assert ys.std() == pytest.approx(0.1, rel=0.05)


class TestCorrectMeasurement:
    def test_identity_scale_passthrough(self):
        y = np.arange(6.0).reshape(2, 3)
        z, var = correct_measurement(y, np.ones((2, 3)), sigma_y=0.1)
        assert np.array_equal(z, y.reshape(-1))
        assert np.allclose(var, 0.01)

    def test_scale_amplifies_noise_variance(self):
        y = np.ones((1, 3))
        scale = np.array([[2.0, 0.5, 1.0]])
        z, var = correct_measurement(y, scale, sigma_y=0.1)
        assert np.allclose(z, [2.0, 0.5, 1.0])
        assert np.allclose(var, [0.04, 0.0025, 0.01])

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            correct_measurement(np.ones((1, 3)), np.array([[1.0, -1.0, 1.0]]), 0.1)


class TestLayoutIo:
    def test_round_trip(self, tmp_path):
        layout = default_layout_30()
        path = tmp_path / "layout.csv"
        save_layout(path, layout)
        loaded = load_layout(path)
        assert np.allclose(loaded.positions, layout.positions, atol=1e-15)

    def test_header(self, tmp_path):
        path = tmp_path / "layout.csv"
        save_layout(path, default_layout_30())
        assert path.read_text().splitlines()[0] == "sensor_id,sx,sy,sz"
