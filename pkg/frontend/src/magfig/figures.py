"""Figure generation from run/report artifacts.

Every renderer is read-only over its inputs and deterministic: rendering
the same artifacts twice produces byte-identical PNG files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    ArtifactError,
    read_calib_errors,
    read_map_grid,
    read_summary,
    read_traj_errors,
    read_trajectory,
)

DPI = 150
# Stable PNG text chunk so repeated renders are byte-identical even
# across matplotlib versions that would otherwise stamp their own.
_METADATA = {"Software": "magfig"}

_MODE_COLORS = {
    "ground truth": "black",
    "dead reckoning": "tab:gray",
    "slamma": "tab:blue",
    "slcamma": "tab:orange",
    "single_mag": "tab:green",
    "filter": "tab:blue",
}


@dataclass
class FigureJob:
    """One figure request: where to read, where to write, style options."""

    input_dir: str
    out: str | None = None
    kind: str = "map_trajectory"
    options: dict = field(default_factory=dict)

    @property
    def directory(self):
        return Path(self.input_dir)

    def out_path(self, default_name):
        if self.out is not None:
            return Path(self.out)
        return self.directory / default_name


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=DPI, metadata=_METADATA)
    plt.close(fig)
    return path


def norm_alpha(std_norm):
    """Opacity map: transparency proportional to uncertainty, normalised per figure."""
    std = np.asarray(std_norm, dtype=float)
    span = std.max() - std.min()
    if span <= 0:
        return np.ones_like(std)
    scaled = (std - std.min()) / span
    return 1.0 - 0.8 * scaled  # keep the most uncertain cells faintly visible


def _color_for(label, fallback_index):
    key = label.lower()
    if key in _MODE_COLORS:
        return _MODE_COLORS[key]
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    return cycle[fallback_index % len(cycle)]


def build_map_trajectory(job):
    grid = read_map_grid(job.directory / job.options.get("grid", "map_grid.csv"))
    summary = read_summary(job.directory)

    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    extent = [grid.x.min(), grid.x.max(), grid.y.min(), grid.y.max()]
    cmap = plt.get_cmap(job.options.get("cmap", "viridis"))
    span = grid.norm.max() - grid.norm.min()
    scaled = (grid.norm - grid.norm.min()) / span if span > 0 else np.zeros_like(grid.norm)
    rgba = cmap(scaled)
    rgba[..., 3] = norm_alpha(grid.std_norm)
    image = ax.imshow(rgba, origin="lower", extent=extent, aspect="equal")
    mappable = plt.cm.ScalarMappable(
        cmap=cmap, norm=plt.Normalize(grid.norm.min(), grid.norm.max())
    )
    fig.colorbar(mappable, ax=ax, label="field norm (uT)")

    trajectories = job.options.get("trajectories")
    if trajectories is None:
        default = job.directory / "trajectory.csv"
        trajectories = {summary.get("mode", "trajectory"): default} if default.exists() else {}
    for i, (label, path) in enumerate(sorted(trajectories.items())):
        traj = read_trajectory(path)
        ax.plot(traj.p[:, 0], traj.p[:, 1], label=label, color=_color_for(label, i), lw=1.2)
    if trajectories:
        ax.legend(loc="upper right", fontsize=8)

    # Frame the axes on the mapped domain when the run recorded it.
    if "domain_lower" in summary and "domain_upper" in summary:
        ax.set_xlim(summary["domain_lower"][0], summary["domain_upper"][0])
        ax.set_ylim(summary["domain_lower"][1], summary["domain_upper"][1])
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"Predicted field norm at z = {grid.z:g} m")
    fig.tight_layout()
    return fig, image


def render_map_trajectory(job):
    """Field-norm heatmap (alpha from std) with trajectory overlays."""
    fig, _ = build_map_trajectory(job)
    return _save(fig, job.out_path("map_trajectory.png"))


def build_error_curves(job):
    series = read_traj_errors(job.directory / job.options.get("errors", "traj_errors.csv"))
    fig, (ax_pos, ax_rot) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True)

    by_mode = {}
    for s in series:
        by_mode.setdefault(s.mode, []).append(s)
    for i, (mode, group) in enumerate(sorted(by_mode.items())):
        color = _color_for(mode, i)
        if len(group) == 1:
            s = group[0]
            ax_pos.plot(s.t, s.pos_err, label=mode, color=color)
            ax_rot.plot(s.t, s.rot_err_deg, color=color)
        else:  # Monte-Carlo aggregate: median line and interquartile band
            t = group[0].t
            pos = np.stack([s.pos_err for s in group])
            rot = np.stack([s.rot_err_deg for s in group])
            ax_pos.plot(t, np.median(pos, axis=0), label=mode, color=color)
            ax_pos.fill_between(
                t, np.quantile(pos, 0.25, axis=0), np.quantile(pos, 0.75, axis=0),
                color=color, alpha=0.25, lw=0,
            )
            ax_rot.plot(t, np.median(rot, axis=0), color=color)
            ax_rot.fill_between(
                t, np.quantile(rot, 0.25, axis=0), np.quantile(rot, 0.75, axis=0),
                color=color, alpha=0.25, lw=0,
            )
    ax_pos.set_ylabel("position error (m)")
    ax_rot.set_ylabel("rotation error (deg)")
    ax_rot.set_xlabel("time (s)")
    ax_pos.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    return fig


def render_error_curves(job):
    """Stacked position/rotation error panels, one line (or band) per mode."""
    fig = build_error_curves(job)
    return _save(fig, job.out_path("error_curves.png"))


_PARAM_LABELS = {"d": "scale MAE", "b": "bias MAE (uT)"}


def build_calib_curves(job):
    motions = job.options.get("motions")
    if motions is None:
        motions = {job.options.get("label", "run"): job.directory / "calib_errors.csv"}
    if not motions:
        raise ArtifactError("calibration figure needs at least one motion")
    curves = {name: read_calib_errors(path) for name, path in sorted(motions.items())}
    params = sorted({p for c in curves.values() for p in c.mae})

    fig, axes = plt.subplots(
        len(params), len(curves),
        figsize=(3.0 * len(curves), 2.4 * len(params)),
        sharex="col", squeeze=False,
    )
    for col, (name, curve) in enumerate(curves.items()):
        for row, param in enumerate(params):
            ax = axes[row][col]
            if param not in curve.mae:
                ax.set_axis_off()
                continue
            mae, std = curve.mae[param], curve.std[param]
            for axis in range(mae.shape[1]):
                line, = ax.plot(curve.k, mae[:, axis], label=f"axis {axis + 1}")
                ax.fill_between(
                    curve.k,
                    np.clip(mae[:, axis] - std[:, axis], 0.0, None),
                    mae[:, axis] + std[:, axis],
                    color=line.get_color(), alpha=0.2, lw=0,
                )
            if row == 0:
                ax.set_title(name, fontsize=9)
            if col == 0:
                ax.set_ylabel(_PARAM_LABELS.get(param, param))
            if row == len(params) - 1:
                ax.set_xlabel("step")
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    return fig


def render_calib_curves(job):
    """Panel grid (motion x parameter) of calibration MAE with a +/- STD band."""
    fig = build_calib_curves(job)
    return _save(fig, job.out_path("calib_curves.png"))
