"""Dataset container and on-disk format.

A dataset directory holds one `metadata.json` plus CSV tables:
`odometry.csv` (k, dpx, dpy, dpz, dR row-major), `measurements.csv`
(k, sensor_id, yx, yy, yz), `groundtruth.csv` (k, px, py, pz, R row-major)
and optionally `calibration_true.csv` (sensor_id, dx, dy, dz, bx, by, bz).
Units are metres, microtesla and radians throughout.  The same format is
the ingestion path for recorded data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sensors import Calibration


@dataclass
class Dataset:
    """Time-indexed array measurements, odometry increments and ground truth.

    With K time steps: `odom_dp`/`odom_rot` hold the K body-frame
    increments, `measurements` the K array snapshots taken after each
    increment, and the ground-truth pose arrays have length K + 1 with the
    initial pose first.
    """

    odom_dp: np.ndarray  # (K, 3)
    odom_rot: np.ndarray  # (K, 3, 3)
    measurements: np.ndarray  # (K, n_mag, 3)
    gt_p: np.ndarray  # (K + 1, 3)
    gt_rot: np.ndarray  # (K + 1, 3, 3)
    rate: float
    true_calib: Calibration | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        k = len(self.odom_dp)
        if (
            len(self.odom_rot) != k
            or len(self.measurements) != k
            or len(self.gt_p) != k + 1
            or len(self.gt_rot) != k + 1
        ):
            raise ValueError("dataset sequence lengths are inconsistent")

    @property
    def n_steps(self):
        return len(self.odom_dp)

    @property
    def n_mag(self):
        return self.measurements.shape[1]

    @property
    def times(self):
        return np.arange(self.n_steps + 1) / self.rate

    def select_sensor(self, index):
        """Restrict measurements to a single sensor (baseline runs)."""
        calib = self.true_calib.single(index) if self.true_calib is not None else None
        return Dataset(
            self.odom_dp,
            self.odom_rot,
            self.measurements[:, index : index + 1, :],
            self.gt_p,
            self.gt_rot,
            self.rate,
            true_calib=calib,
            metadata=dict(self.metadata, selected_sensor=int(index)),
        )


def save_dataset(directory, dataset):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    k = dataset.n_steps
    n_mag = dataset.n_mag

    odom = np.column_stack(
        [np.arange(k), dataset.odom_dp, dataset.odom_rot.reshape(k, 9)]
    )
    np.savetxt(
        directory / "odometry.csv",
        odom,
        delimiter=",",
        comments="",
        fmt="%.17g",
        header="k,dpx,dpy,dpz," + ",".join(f"dR{i}{j}" for i in range(3) for j in range(3)),
    )

    ks = np.repeat(np.arange(1, k + 1), n_mag)
    sensors = np.tile(np.arange(n_mag), k)
    meas = np.column_stack([ks, sensors, dataset.measurements.reshape(k * n_mag, 3)])
    np.savetxt(
        directory / "measurements.csv",
        meas,
        delimiter=",",
        comments="",
        fmt="%.17g",
        header="k,sensor_id,yx,yy,yz",
    )

    gt = np.column_stack(
        [np.arange(k + 1), dataset.gt_p, dataset.gt_rot.reshape(k + 1, 9)]
    )
    np.savetxt(
        directory / "groundtruth.csv",
        gt,
        delimiter=",",
        comments="",
        fmt="%.17g",
        header="k,px,py,pz," + ",".join(f"R{i}{j}" for i in range(3) for j in range(3)),
    )

    if dataset.true_calib is not None:
        calib = np.column_stack(
            [np.arange(n_mag), dataset.true_calib.scale, dataset.true_calib.bias]
        )
        np.savetxt(
            directory / "calibration_true.csv",
            calib,
            delimiter=",",
            comments="",
            fmt="%.17g",
            header="sensor_id,dx,dy,dz,bx,by,bz",
        )

    meta = dict(dataset.metadata)
    meta["rate"] = dataset.rate
    meta["n_steps"] = k
    meta["n_mag"] = n_mag
    with open(directory / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(directory):
    directory = Path(directory)
    with open(directory / "metadata.json") as fh:
        meta = json.load(fh)
    rate = float(meta.pop("rate"))
    k = int(meta.pop("n_steps"))
    n_mag = int(meta.pop("n_mag"))

    odom = np.loadtxt(directory / "odometry.csv", delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(odom[:, 0])
    odom = odom[order]
    odom_dp = odom[:, 1:4]
    odom_rot = odom[:, 4:13].reshape(-1, 3, 3)

    meas = np.loadtxt(directory / "measurements.csv", delimiter=",", skiprows=1, ndmin=2)
    measurements = np.zeros((k, n_mag, 3))
    measurements[meas[:, 0].astype(int) - 1, meas[:, 1].astype(int)] = meas[:, 2:5]

    gt = np.loadtxt(directory / "groundtruth.csv", delimiter=",", skiprows=1, ndmin=2)
    gt = gt[np.argsort(gt[:, 0])]
    gt_p = gt[:, 1:4]
    gt_rot = gt[:, 4:13].reshape(-1, 3, 3)

    calib = None
    calib_path = directory / "calibration_true.csv"
    if calib_path.exists():
        rows = np.loadtxt(calib_path, delimiter=",", skiprows=1, ndmin=2)
        rows = rows[np.argsort(rows[:, 0])]
        calib = Calibration(rows[:, 1:4], rows[:, 4:7])

    return Dataset(
        odom_dp, odom_rot, measurements, gt_p, gt_rot, rate, true_calib=calib, metadata=meta
    )
