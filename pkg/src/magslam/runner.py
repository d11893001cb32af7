"""Pipeline orchestration shared by the CLI: simulate, slam, report, map export."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import fieldmap, filtering, metrics, simulate
from .config import RunConfig, save_config, subseed
from .datasets import load_dataset, save_dataset
from .fieldmap import DomainBox, build_basis, build_domain, export_map_grid
from .sensors import Calibration, default_layout_30, load_layout


class DataError(RuntimeError):
    """Missing or inconsistent run/dataset artifacts."""


def resolve_layout(cfg):
    if cfg.layout == "default_30":
        return default_layout_30()
    path = Path(cfg.layout)
    if not path.exists():
        raise DataError(f"layout file not found: {path}")
    return load_layout(path)


def _motion_spec(cfg, replicate=0):
    if cfg.motion is None:
        raise DataError("config has no motion specification")
    motion = dict(cfg.motion)
    motion.setdefault("rate", cfg.rate)
    motion.setdefault("seed", subseed(cfg.seed, "replicate", replicate))
    return simulate.MotionSpec(**motion)


def simulate_dataset(cfg, replicate=0):
    """Generate one synthetic dataset from a config (deterministic per seed)."""
    layout = resolve_layout(cfg)
    spec = _motion_spec(cfg, replicate)
    gt_p, gt_rot = simulate.gen_motion(spec)

    extent = np.linalg.norm(layout.positions, axis=1).max()
    region = build_domain(gt_p, extent + cfg.length_scale)
    field = simulate.sample_field(
        cfg.sigma_cf,
        cfg.length_scale,
        cfg.earth_field,
        region,
        subseed(cfg.seed, "field", replicate),
        method=cfg.field_method,
        sigma_lin=cfg.sigma_lin,
    )
    if cfg.sample_calibration:
        calib = simulate.sample_calibration(
            layout.n_mag, subseed(cfg.seed, "calibration", replicate)
        )
    else:
        calib = Calibration.identity(layout.n_mag)
    o_pos, o_rot = cfg.drift()
    return simulate.make_dataset(
        field,
        gt_p,
        gt_rot,
        layout,
        calib,
        cfg.rate,
        subseed(cfg.seed, "dataset", replicate),
        sigma_pos_per_s=np.asarray(cfg.sigma_pos_per_s, dtype=float),
        sigma_rot_per_s=np.deg2rad(np.asarray(cfg.sigma_rot_deg_per_s, dtype=float)),
        sigma_y=cfg.sigma_y,
        o_pos=o_pos,
        o_rot=o_rot,
        metadata={
            "motion": dict(cfg.motion),
            "length_scale": cfg.length_scale,
            "sigma_se": cfg.sigma_se,
            "master_seed": cfg.seed,
            "replicate": replicate,
        },
    )


def cmd_simulate(cfg, outdir, mc=1):
    """Write `mc` replicate dataset directories plus a manifest; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for rep in range(mc):
        dest = outdir if mc == 1 else outdir / f"rep_{rep:03d}"
        dataset = simulate_dataset(cfg, replicate=rep)
        save_dataset(dest, dataset)
        paths.append(dest)
    manifest = {
        "replicates": [str(p.name) for p in paths],
        "mc": mc,
        "seed": cfg.seed,
        "mode": "simulate",
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_config(outdir / "config.json", cfg)
    return paths


def build_run_basis(cfg, dataset, layout):
    """Basis over the area the array sweeps: sensor world positions plus margin."""
    sensor_world = dataset.gt_p[:, None, :] + np.einsum(
        "kji,sj->ksi", dataset.gt_rot, layout.positions
    )
    points = sensor_world.reshape(-1, 3)
    domain = build_domain(points, cfg.margin)
    return build_basis(domain, cfg.n_se_modes, cfg.hyper())


def run_filter(cfg, dataset):
    """Run the configured estimator mode on a dataset."""
    layout = resolve_layout(cfg)
    if layout.n_mag != dataset.n_mag:
        raise DataError(
            f"layout has {layout.n_mag} sensors but dataset has {dataset.n_mag}"
        )
    if cfg.mode == "dead_reckoning":
        return filtering.dead_reckoning_result(dataset), None
    if cfg.mode == "single_mag":
        dataset = dataset.select_sensor(cfg.single_mag_index)
        layout = layout.single(cfg.single_mag_index)
        mode = filtering.MODE_SLAMMA
    else:
        mode = cfg.mode
    basis = build_run_basis(cfg, dataset, layout)
    noise = cfg.noise()
    result = filtering.run_slam(
        dataset, basis, layout, noise, cfg.hyper(), mode, vertical=cfg.vertical_update
    )
    return result, basis


def cmd_slam(cfg, dataset_dir, outdir):
    """Run the filter on a stored dataset and export all run artifacts."""
    dataset_dir = Path(dataset_dir)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if not (dataset_dir / "metadata.json").exists():
        raise DataError(f"no dataset at {dataset_dir}")
    dataset = load_dataset(dataset_dir)
    result, basis = run_filter(cfg, dataset)

    filtering.write_trajectory_csv(outdir / "trajectory.csv", result)
    if result.calib_scale is not None:
        filtering.write_calibration_csv(outdir / "calibration.csv", result)
    if basis is not None:
        filtering.write_map_files(outdir, result)

    err = metrics.traj_errors(result.p, result.rot, dataset.gt_p, dataset.gt_rot)
    baseline = metrics.traj_errors(
        *filtering.dead_reckoning(dataset), dataset.gt_p, dataset.gt_rot
    )
    summary = {
        "mode": cfg.mode,
        "dataset": str(dataset_dir),
        "diverged_step": result.diverged_step,
        "iterations_max": int(result.iterations.max()) if len(result.iterations) else 0,
        "final_pos_error": err.final_pos,
        "final_rot_error_deg": err.final_rot_deg,
        "rmse_pos_error": err.rmse_pos,
        "dead_reckoning_final_pos_error": baseline.final_pos,
        "n_se_modes": cfg.n_se_modes,
    }
    if baseline.final_pos > 0:
        summary["drift_reduction"] = metrics.drift_reduction(err, baseline)
    if basis is not None:
        summary["domain_lower"] = list(basis.domain.lower)
        summary["domain_upper"] = list(basis.domain.upper)
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_config(outdir / "config.json", cfg)

    errs = np.column_stack(
        [np.arange(len(err.pos)), dataset.times, err.pos, err.rot_deg, baseline.pos, baseline.rot_deg]
    )
    np.savetxt(
        outdir / "traj_errors.csv",
        errs,
        delimiter=",",
        comments="",
        fmt="%.17g",
        header="k,t,pos_err,rot_err_deg,dr_pos_err,dr_rot_err_deg",
    )
    return summary


def _load_run(run_dir):
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise DataError(f"missing run summary: {summary_path}")
    with open(summary_path) as fh:
        return json.load(fh)


def cmd_report(run_dirs, outdir):
    """Merge per-run outputs into aggregate figure-feed files."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    run_dirs = [Path(d) for d in run_dirs]
    if not run_dirs:
        raise DataError("report needs at least one run directory")
    summaries = [_load_run(d) for d in run_dirs]

    with open(outdir / "traj_errors.csv", "w") as fh:
        fh.write("run,mode,k,t,pos_err,rot_err_deg\n")
        for d, s in zip(run_dirs, summaries):
            errs = np.loadtxt(d / "traj_errors.csv", delimiter=",", skiprows=1, ndmin=2)
            for row in errs:
                fh.write(
                    f"{d.name},{s['mode']},{int(row[0])},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g}\n"
                )

    # Calibration error aggregation over the slcamma runs that have truth.
    est_scale, est_bias, true_scale, true_bias = [], [], [], []
    for d, s in zip(run_dirs, summaries):
        calib_path = d / "calibration.csv"
        truth_path = Path(s["dataset"]) / "calibration_true.csv"
        if not (calib_path.exists() and truth_path.exists()):
            continue
        hist = np.loadtxt(calib_path, delimiter=",", skiprows=1, ndmin=2)
        n_mag = int(hist[:, 1].max()) + 1
        k1 = len(hist) // n_mag
        hist = hist.reshape(k1, n_mag, 8)
        est_scale.append(hist[:, :, 2:5])
        est_bias.append(hist[:, :, 5:8])
        truth = np.loadtxt(truth_path, delimiter=",", skiprows=1, ndmin=2)
        truth = truth[np.argsort(truth[:, 0])]
        true_scale.append(truth[:, 1:4])
        true_bias.append(truth[:, 4:7])

    if est_scale:
        curve_d = metrics.calib_mae_std(np.stack(est_scale), np.stack(true_scale))
        curve_b = metrics.calib_mae_std(np.stack(est_bias), np.stack(true_bias))
        with open(outdir / "calib_errors.csv", "w") as fh:
            fh.write("k,param,axis,mae,std\n")
            for name, curve in (("d", curve_d), ("b", curve_b)):
                for k in range(len(curve.mae)):
                    for axis in range(3):
                        fh.write(
                            f"{k},{name},{axis},{curve.mae[k, axis]:.17g},{curve.std[k]:.17g}\n"
                        )

    by_mode = {}
    for d, s in zip(run_dirs, summaries):
        by_mode.setdefault(s["mode"], []).append(
            {
                "run": str(d),
                "final_pos_error": s["final_pos_error"],
                "final_rot_error_deg": s["final_rot_error_deg"],
                "drift_reduction": s.get("drift_reduction"),
                "diverged_step": s["diverged_step"],
            }
        )
    report = {"modes": by_mode, "n_runs": len(run_dirs)}
    with open(outdir / "summary.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def cmd_map_export(run_dir, out_path=None, n_xy=40, z=0.0):
    """Rebuild the run's basis and export the predicted-field grid CSV."""
    run_dir = Path(run_dir)
    summary = _load_run(run_dir)
    if "domain_lower" not in summary:
        raise DataError("run has no field map (dead-reckoning run?)")
    cfg_path = run_dir / "config.json"
    from .config import load_config

    cfg = load_config(cfg_path)
    domain = DomainBox(np.array(summary["domain_lower"]), np.array(summary["domain_upper"]))
    basis = build_basis(domain, summary["n_se_modes"], cfg.hyper())
    weights = np.loadtxt(run_dir / "map_weights.csv", delimiter=",", skiprows=1, ndmin=2)
    weights = weights[np.argsort(weights[:, 0]), 1]
    cov_path = run_dir / "map_covariance.npy"
    cov = np.load(cov_path) if cov_path.exists() else None
    if out_path is None:
        out_path = run_dir / "map_grid.csv"
    export_map_grid(out_path, basis, weights, cov, n_xy=n_xy, z=z)
    return Path(out_path)
