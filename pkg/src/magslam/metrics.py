"""Evaluation: calibration error curves, trajectory errors, drift reduction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import rotation_angle


@dataclass
class CalibErrorCurve:
    """Per-step aggregate calibration errors over sensors and replicates.

    `mae` has shape (K, 3): per-axis mean absolute error.  `std` has shape
    (K,): the root-mean-square of the Euclidean deviation, normalised by
    the replicate and sensor counts.  Despite the name it is not a centred
    standard deviation.
    """

    mae: np.ndarray
    std: np.ndarray


def calib_mae_std(estimates, truths):
    """Aggregate parameter errors.

    estimates: (n_mc, K, n_mag, 3) per-step estimates of one parameter
    (scale or bias); truths: (n_mc, n_mag, 3) matching true values.
    """
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.ndim != 4 or truths.ndim != 3:
        raise ValueError("estimates must be (n_mc, K, n_mag, 3) and truths (n_mc, n_mag, 3)")
    if estimates.shape[0] != truths.shape[0] or estimates.shape[2:] != truths.shape[1:]:
        raise ValueError("estimate and truth shapes do not match")
    deviation = estimates - truths[:, None, :, :]
    mae = np.mean(np.abs(deviation), axis=(0, 2))
    std = np.sqrt(np.mean(np.sum(deviation**2, axis=3), axis=(0, 2)))
    return CalibErrorCurve(mae=mae, std=std)


@dataclass
class TrajError:
    """Per-step position (m) and rotation (deg) errors plus summaries."""

    pos: np.ndarray
    rot_deg: np.ndarray

    @property
    def final_pos(self):
        return float(self.pos[-1])

    @property
    def final_rot_deg(self):
        return float(self.rot_deg[-1])

    @property
    def rmse_pos(self):
        return float(np.sqrt(np.mean(self.pos**2)))

    @property
    def rmse_rot_deg(self):
        return float(np.sqrt(np.mean(self.rot_deg**2)))


def traj_errors(est_p, est_rot, gt_p, gt_rot):
    est_p = np.asarray(est_p, dtype=float)
    gt_p = np.asarray(gt_p, dtype=float)
    if len(est_p) != len(gt_p) or len(est_rot) != len(gt_rot):
        raise ValueError("estimate and ground-truth sequences differ in length")
    pos = np.linalg.norm(est_p - gt_p, axis=1)
    rot_deg = np.array(
        [np.rad2deg(rotation_angle(re @ rg.T)) for re, rg in zip(est_rot, gt_rot)]
    )
    return TrajError(pos=pos, rot_deg=rot_deg)


def drift_reduction(est, baseline):
    """Percent reduction of final (and RMSE) error relative to a baseline run."""
    if baseline.final_pos == 0:
        raise ValueError("baseline final error is zero; reduction undefined")
    final = 100.0 * (1.0 - est.final_pos / baseline.final_pos)
    rmse = 100.0 * (1.0 - est.rmse_pos / baseline.rmse_pos)
    return {"final": final, "rmse": rmse}


def consistency_stats(norms):
    """Per-step inter-sensor spread of measurement norms.

    norms: (K, n_sensors).  Returns per-step range and std plus the
    temporal median of the range as summary.
    """
    norms = np.atleast_2d(np.asarray(norms, dtype=float))
    if norms.shape[1] < 2:
        raise ValueError("need at least two sensors")
    rng = norms.max(axis=1) - norms.min(axis=1)
    std = norms.std(axis=1)
    return {"range": rng, "std": std, "median_range": float(np.median(rng))}
