import numpy as np
import pytest

from magslam.geometry import exp_rot
from magslam.metrics import (
    TrajError,
    calib_mae_std,
    consistency_stats,
    drift_reduction,
    traj_errors,
)


def brute_force_mae_std(estimates, truths):
    """Reference aggregation by explicit loops."""
    n_mc, k, n_mag, _ = estimates.shape
    mae = np.zeros((k, 3))
    std = np.zeros(k)
    for step in range(k):
        acc_abs = np.zeros(3)
        acc_sq = 0.0
        for mc in range(n_mc):
            for i in range(n_mag):
                dev = estimates[mc, step, i] - truths[mc, i]
                acc_abs += np.abs(dev)
                acc_sq += float(dev @ dev)
        mae[step] = acc_abs / (n_mc * n_mag)
        std[step] = np.sqrt(acc_sq / (n_mc * n_mag))
    return mae, std


class TestCalibMaeStd:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(13)
        est = rng.normal(size=(3, 4, 5, 3))
        true = rng.normal(size=(3, 5, 3))
        curve = calib_mae_std(est, true)
        mae, std = brute_force_mae_std(est, true)
        assert np.allclose(curve.mae, mae, rtol=1e-12)
        assert np.allclose(curve.std, std, rtol=1e-12)

    def test_zero_error(self):
        true = np.ones((2, 3, 3))
        est = np.repeat(true[:, None], 5, axis=1)
        curve = calib_mae_std(est, true)
        assert np.allclose(curve.mae, 0.0)
        assert np.allclose(curve.std, 0.0)

    def test_constant_offset(self):
        # Every estimate off by (1, 0, 0): MAE is (1, 0, 0), std is 1.
        true = np.zeros((2, 4, 3))
        est = np.zeros((2, 6, 4, 3))
        est[..., 0] = 1.0
        curve = calib_mae_std(est, true)
        assert np.allclose(curve.mae, [1.0, 0.0, 0.0])
        assert np.allclose(curve.std, 1.0)

    def test_pythagorean_deviation(self):
        # Deviation (3, 4, 0) gives Euclidean magnitude 5.
        true = np.zeros((1, 1, 3))
        est = np.zeros((1, 1, 1, 3))
        est[0, 0, 0] = [3.0, 4.0, 0.0]
        curve = calib_mae_std(est, true)
        assert curve.std[0] == pytest.approx(5.0)
        assert np.allclose(curve.mae[0], [3.0, 4.0, 0.0])

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            calib_mae_std(np.zeros((2, 3, 4, 3)), np.zeros((3, 4, 3)))


class TestTrajErrors:
    def test_position_norm(self):
        gt_p = np.zeros((2, 3))
        est_p = np.array([[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]])
        eye = np.tile(np.eye(3), (2, 1, 1))
        err = traj_errors(est_p, eye, gt_p, eye)
        assert np.allclose(err.pos, [0.0, 5.0])
        assert err.final_pos == pytest.approx(5.0)

    def test_rotation_angle_degrees(self):
        eye = np.tile(np.eye(3), (1, 1, 1))
        rot = exp_rot([0.0, 0.0, np.deg2rad(10.0)])[None]
        err = traj_errors(np.zeros((1, 3)), rot, np.zeros((1, 3)), eye)
        assert err.rot_deg[0] == pytest.approx(10.0, abs=1e-9)

    def test_rmse(self):
        eye = np.tile(np.eye(3), (2, 1, 1))
        err = traj_errors(
            np.array([[3.0, 0, 0], [4.0, 0, 0]]), eye, np.zeros((2, 3)), eye
        )
        assert err.rmse_pos == pytest.approx(np.sqrt((9 + 16) / 2))

    def test_length_mismatch(self):
        eye = np.tile(np.eye(3), (2, 1, 1))
        with pytest.raises(ValueError):
            traj_errors(np.zeros((3, 3)), eye, np.zeros((2, 3)), eye)


class TestDriftReduction:
    def _err(self, series):
        return TrajError(pos=np.asarray(series, dtype=float), rot_deg=np.zeros(len(series)))

    def test_eighty_percent(self):
        est = self._err([0.0, 0.2])
        base = self._err([0.0, 1.0])
        out = drift_reduction(est, base)
        assert out["final"] == pytest.approx(80.0)

    def test_scale_invariance(self):
        est = self._err([0.1, 0.3])
        base = self._err([0.4, 0.9])
        a = drift_reduction(est, base)
        b = drift_reduction(self._err([0.5, 1.5]), self._err([2.0, 4.5]))
        assert a["final"] == pytest.approx(b["final"])
        assert a["rmse"] == pytest.approx(b["rmse"])

    def test_negative_when_worse(self):
        out = drift_reduction(self._err([0, 2.0]), self._err([0, 1.0]))
        assert out["final"] == pytest.approx(-100.0)

    def test_zero_baseline_rejected(self):
        with pytest.raises(ValueError):
            drift_reduction(self._err([0.0]), self._err([0.0]))


class TestConsistencyStats:
    def test_known_range(self):
        norms = np.array([[1.0, 2.0, 4.0], [3.0, 3.0, 3.0]])
        out = consistency_stats(norms)
        assert np.allclose(out["range"], [3.0, 0.0])
        assert out["median_range"] == pytest.approx(1.5)

    def test_std_matches_numpy(self):
        rng = np.random.default_rng(14)
        norms = rng.uniform(40, 50, size=(10, 30))
        out = consistency_stats(norms)
        assert np.allclose(out["std"], norms.std(axis=1))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(15)
        norms = rng.uniform(0, 1, size=(5, 8))
        perm = rng.permutation(8)
        a = consistency_stats(norms)
        b = consistency_stats(norms[:, perm])
        assert np.allclose(a["range"], b["range"])
        assert a["median_range"] == pytest.approx(b["median_range"])

    def test_needs_two_sensors(self):
        with pytest.raises(ValueError):
            consistency_stats(np.ones((5, 1)))
