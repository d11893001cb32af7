"""Readers for the CSV/JSON artifacts written by the estimation pipeline.

All figure code consumes runs exclusively through these file formats:

- ``map_grid.csv``: x, y, z, mean_x, mean_y, mean_z, norm, std_norm
- ``trajectory.csv``: k, t, px, py, pz, qw, qx, qy, qz, iterations, diverged
- ``traj_errors.csv`` (per run): k, t, pos_err, rot_err_deg, dr_pos_err, dr_rot_err_deg
- ``traj_errors.csv`` (report): run, mode, k, t, pos_err, rot_err_deg
- ``calib_errors.csv``: k, param, axis, mae, std
- ``summary.json``: run metadata, including the map domain bounds
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ArtifactError(ValueError):
    """Missing, empty or malformed run artifact."""


def _read_table(path, required):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"missing artifact: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ArtifactError(f"empty artifact: {path}") from None
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise ArtifactError(f"{path} lacks columns {missing}; found {header}")
        rows = list(reader)
    if not rows:
        raise ArtifactError(f"no data rows in {path}")
    return header, rows


@dataclass
class MapGrid:
    """A rectilinear z-slice of the predicted field norm and its uncertainty."""

    x: np.ndarray  # (nx,)
    y: np.ndarray  # (ny,)
    z: float
    norm: np.ndarray  # (ny, nx)
    std_norm: np.ndarray  # (ny, nx)


def read_map_grid(path):
    header, rows = _read_table(path, ["x", "y", "z", "norm", "std_norm"])
    idx = {name: header.index(name) for name in header}
    data = np.array([[float(v) for v in row] for row in rows])
    x = np.unique(data[:, idx["x"]])
    y = np.unique(data[:, idx["y"]])
    if len(x) * len(y) != len(data):
        raise ArtifactError(f"{path} is not a full rectilinear grid")
    order = np.lexsort((data[:, idx["x"]], data[:, idx["y"]]))
    data = data[order]
    norm = data[:, idx["norm"]].reshape(len(y), len(x))
    std = data[:, idx["std_norm"]].reshape(len(y), len(x))
    return MapGrid(x=x, y=y, z=float(data[0, idx["z"]]), norm=norm, std_norm=std)


@dataclass
class Trajectory:
    t: np.ndarray
    p: np.ndarray  # (k, 3)


def read_trajectory(path):
    header, rows = _read_table(path, ["t", "px", "py", "pz"])
    idx = {name: header.index(name) for name in header}
    data = np.array([[float(v) for v in row] for row in rows])
    return Trajectory(
        t=data[:, idx["t"]],
        p=data[:, [idx["px"], idx["py"], idx["pz"]]],
    )


@dataclass
class ErrorSeries:
    mode: str
    run: str
    t: np.ndarray
    pos_err: np.ndarray
    rot_err_deg: np.ndarray


def read_traj_errors(path):
    """Error curves from either the per-run or the aggregated report format."""
    header, rows = _read_table(path, ["t", "pos_err"])
    idx = {name: header.index(name) for name in header}
    if "mode" in idx:  # report format: one series per (run, mode)
        series = {}
        for row in rows:
            key = (row[idx["run"]], row[idx["mode"]])
            series.setdefault(key, []).append(
                (float(row[idx["t"]]), float(row[idx["pos_err"]]), float(row[idx["rot_err_deg"]]))
            )
        out = []
        for (run, mode), vals in series.items():
            arr = np.array(vals)
            out.append(ErrorSeries(mode=mode, run=run, t=arr[:, 0], pos_err=arr[:, 1], rot_err_deg=arr[:, 2]))
        return out
    if "rot_err_deg" not in idx:
        raise ArtifactError(f"{path} lacks columns ['rot_err_deg']; found {header}")
    data = np.array([[float(v) for v in row] for row in rows])
    out = [
        ErrorSeries(
            mode="filter",
            run=str(path),
            t=data[:, idx["t"]],
            pos_err=data[:, idx["pos_err"]],
            rot_err_deg=data[:, idx["rot_err_deg"]],
        )
    ]
    if "dr_pos_err" in idx:
        out.append(
            ErrorSeries(
                mode="dead reckoning",
                run=str(path),
                t=data[:, idx["t"]],
                pos_err=data[:, idx["dr_pos_err"]],
                rot_err_deg=data[:, idx["dr_rot_err_deg"]],
            )
        )
    return out


@dataclass
class CalibCurves:
    k: np.ndarray
    mae: dict  # param -> (len(k), 3)
    std: dict  # param -> (len(k), 3)


def read_calib_errors(path):
    header, rows = _read_table(path, ["k", "param", "axis", "mae", "std"])
    idx = {name: header.index(name) for name in header}
    by_param = {}
    for row in rows:
        by_param.setdefault(row[idx["param"]], []).append(
            (int(row[idx["k"]]), int(row[idx["axis"]]), float(row[idx["mae"]]), float(row[idx["std"]]))
        )
    ks = None
    mae, std = {}, {}
    for param, vals in by_param.items():
        arr = np.array(vals)
        k = np.unique(arr[:, 0]).astype(int)
        if ks is None:
            ks = k
        m = np.full((len(k), 3), np.nan)
        s = np.full((len(k), 3), np.nan)
        pos = {kk: i for i, kk in enumerate(k)}
        for kk, axis, v_mae, v_std in vals:
            m[pos[kk], axis] = v_mae
            s[pos[kk], axis] = v_std
        mae[param], std[param] = m, s
    return CalibCurves(k=ks, mae=mae, std=std)


def read_summary(run_dir):
    path = Path(run_dir) / "summary.json"
    if not path.exists():
        return {}
    with open(path) as fh:
        return json.load(fh)
