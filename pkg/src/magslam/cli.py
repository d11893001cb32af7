"""Command-line interface: simulate, slam, report, map-export, presets."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, RunConfig, config_from_dict, load_config
from .filtering import FilterDivergence
from .runner import DataError, cmd_map_export, cmd_report, cmd_simulate, cmd_slam

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

OUTPUT_ROOT_ENV = "MAGSLAM_OUTPUT_ROOT"


def _default_root():
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


def _load_cfg(args):
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig()
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "motion", None):
        overrides["motion"] = {"kind": args.motion}
    if getattr(args, "preset", None):
        overrides["preset"] = args.preset
    if overrides:
        merged = {k: v for k, v in cfg.__dict__.items()}
        merged.update(overrides)
        cfg = config_from_dict(merged)
    return cfg


def build_parser():
    parser = argparse.ArgumentParser(
        prog="magslam",
        description="Magnetic-field SLAM with a magnetometer array: simulation, "
        "estimation and reporting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic dataset(s)")
    p_sim.add_argument("--config", help="JSON run configuration")
    p_sim.add_argument("--motion", help="motion kind shortcut (overrides config)")
    p_sim.add_argument("--preset", help="scenario preset name")
    p_sim.add_argument("--seed", type=int, help="master seed override")
    p_sim.add_argument("--mc", type=int, default=1, help="number of Monte-Carlo replicates")
    p_sim.add_argument("--out", required=True, help="output directory")

    p_slam = sub.add_parser("slam", help="run the filter on a dataset")
    p_slam.add_argument("--config", help="JSON run configuration")
    p_slam.add_argument("--mode", choices=["slamma", "slcamma", "single_mag", "dead_reckoning"])
    p_slam.add_argument("--seed", type=int)
    p_slam.add_argument("--dataset", required=True, help="dataset directory")
    p_slam.add_argument("--out", required=True, help="run output directory")

    p_rep = sub.add_parser("report", help="aggregate completed run directories")
    p_rep.add_argument("runs", nargs="+", help="run directories")
    p_rep.add_argument("--out", required=True, help="report output directory")

    p_map = sub.add_parser("map-export", help="export the predicted field map grid")
    p_map.add_argument("run", help="completed run directory")
    p_map.add_argument("--out", help="output CSV path (default: <run>/map_grid.csv)")
    p_map.add_argument("--n", type=int, default=40, help="grid points per axis")
    p_map.add_argument("--z", type=float, default=0.0, help="height of the exported slice")

    p_presets = sub.add_parser("presets", help="preset utilities")
    p_presets.add_argument("action", choices=["list"])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            cfg = _load_cfg(args)
            if cfg.motion is None:
                raise ConfigError("motion: required for simulate (config or --motion)")
            paths = cmd_simulate(cfg, _default_root() / args.out, mc=args.mc)
            for p in paths:
                print(p)
        elif args.command == "slam":
            cfg = _load_cfg(args)
            summary = cmd_slam(cfg, args.dataset, _default_root() / args.out)
            print(json.dumps(summary, indent=2, sort_keys=True))
            if summary["diverged_step"] is not None:
                return EXIT_DIVERGED
        elif args.command == "report":
            report = cmd_report(args.runs, _default_root() / args.out)
            print(json.dumps({"n_runs": report["n_runs"]}, indent=2))
        elif args.command == "map-export":
            out = cmd_map_export(args.run, args.out, n_xy=args.n, z=args.z)
            print(out)
        elif args.command == "presets":
            for name in sorted(PRESETS):
                row = PRESETS[name]
                print(f"{name}: ell={row['ell']} sigma_se/ell={row['sigma_se_over_ell']}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FilterDivergence as exc:
        print(f"filter diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
