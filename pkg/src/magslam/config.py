"""Run configuration: JSON schema, defaults and named scenario presets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fieldmap import GpHyper
from .filtering import NoiseConfig

SCHEMA_VERSION = 1

MODES = ("slamma", "slcamma", "single_mag", "dead_reckoning")

# Named experiment presets: field hyperparameters, odometry noise and the
# injected drift offsets per scenario.  sigma values are per second;
# drift offsets in mm/s and deg/s.
PRESETS = {
    "tiny_no_rot": dict(time=40.5, length=6.15, ell=0.15, sigma_se_over_ell=5.0, o_pos=[50, -50, 0], o_rot=[0, 0, -1]),
    "tiny_yaw_rot": dict(time=96.6, length=6.23, ell=0.15, sigma_se_over_ell=5.0, o_pos=[50, -50, 0], o_rot=[0, 0, -1]),
    "snake_wide_1": dict(time=82.3, length=52.0, ell=0.5, sigma_se_over_ell=1.25, o_pos=[-50, 50, 0], o_rot=[0, 0, 1]),
    "snake_wide_2": dict(time=70.7, length=50.5, ell=0.85, sigma_se_over_ell=1.78, o_pos=[-25, 25, 0], o_rot=[0, 0, 0.5]),
    "squares_short": dict(time=67.1, length=45.4, ell=0.912, sigma_se_over_ell=1.88, o_pos=[-50, 50, 0], o_rot=[0, 0, 1]),
    "squares_long": dict(time=98.2, length=63.8, ell=0.975, sigma_se_over_ell=2.19, o_pos=[25, -25, 0], o_rot=[0, 0, -0.5]),
    "snake_long": dict(time=164.0, length=133.0, ell=0.712, sigma_se_over_ell=2.4, o_pos=[-50, 50, 0], o_rot=[0, 0, 1]),
    "snake_thin_1": dict(time=88.5, length=62.4, ell=0.9, sigma_se_over_ell=0.9, o_pos=[25, -25, 0], o_rot=[0, 0, -0.5]),
    "snake_thin_2": dict(time=82.1, length=63.4, ell=0.9, sigma_se_over_ell=0.9, o_pos=[-25, 25, 0], o_rot=[0, 0, 0.5]),
    "infinity_symbol": dict(time=57.2, length=68.2, ell=1.07, sigma_se_over_ell=3.36, o_pos=[50, -50, 0], o_rot=[0, 0, -1]),
}
# Common per-second noise columns shared by every preset row.
PRESET_SIGMA_POS_MM_S = [10.0, 10.0, 10.0]
PRESET_SIGMA_ROT_DEG_S = [0.1, 0.1, 1.0]


class ConfigError(ValueError):
    """Configuration schema violation; message names the offending field."""


@dataclass
class RunConfig:
    mode: str = "slamma"
    seed: int = 0
    rate: float = 10.0
    length_scale: float = 1.0
    sigma_se: float = 1.0
    sigma_lin: float = 15.0
    sigma_y: float = 0.1
    n_se_modes: int = 500
    domain_margin: float | None = None  # defaults to 2 * length_scale
    sigma_pos_per_s: list = field(default_factory=lambda: [0.01, 0.01, 0.01])
    sigma_rot_deg_per_s: list = field(default_factory=lambda: [0.1, 0.1, 0.1])
    sigma_ver: float = 1e-4
    lam_d_std: float = 0.0032
    lam_b_std: float = 0.1
    o_pos_mm_per_s: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    o_rot_deg_per_s: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    motion: dict | None = None
    dataset_path: str | None = None
    layout: str = "default_30"
    single_mag_index: int = 0
    vertical_update: bool = True
    field_method: str = "dense"
    sigma_cf: float = 1.0
    earth_field: list = field(default_factory=lambda: [19.2, 0.8, 45.5])
    sample_calibration: bool = True
    preset: str | None = None
    output_dir: str | None = None

    @property
    def margin(self):
        return 2.0 * self.length_scale if self.domain_margin is None else self.domain_margin

    def hyper(self):
        return GpHyper(
            length_scale=self.length_scale,
            sigma_se=self.sigma_se,
            sigma_lin=self.sigma_lin,
            sigma_y=self.sigma_y,
        )

    def noise(self):
        pos_step = np.asarray(self.sigma_pos_per_s, dtype=float) / self.rate
        rot_step = np.deg2rad(np.asarray(self.sigma_rot_deg_per_s, dtype=float)) / self.rate
        return NoiseConfig(
            sigma_pos=np.diag(pos_step**2),
            sigma_rot=np.diag(rot_step**2),
            sigma_ver=self.sigma_ver,
            sigma_y=self.sigma_y,
            lam_d=self.lam_d_std**2,
            lam_b=self.lam_b_std**2,
        )

    def drift(self):
        o_pos = np.asarray(self.o_pos_mm_per_s, dtype=float) / 1000.0
        o_rot = np.deg2rad(np.asarray(self.o_rot_deg_per_s, dtype=float))
        return o_pos, o_rot


_FIELD_TYPES = {
    "schema_version": int,
    "mode": str,
    "seed": int,
    "rate": (int, float),
    "length_scale": (int, float),
    "sigma_se": (int, float),
    "sigma_se_over_ell": (int, float),
    "sigma_lin": (int, float),
    "sigma_y": (int, float),
    "n_se_modes": int,
    "domain_margin": (int, float, type(None)),
    "sigma_pos_per_s": (list, int, float),
    "sigma_rot_deg_per_s": (list, int, float),
    "sigma_ver": (int, float),
    "lam_d_std": (int, float),
    "lam_b_std": (int, float),
    "o_pos_mm_per_s": list,
    "o_rot_deg_per_s": list,
    "motion": (dict, type(None)),
    "dataset_path": (str, type(None)),
    "layout": str,
    "single_mag_index": int,
    "vertical_update": bool,
    "field_method": str,
    "sigma_cf": (int, float),
    "earth_field": list,
    "sample_calibration": bool,
    "preset": (str, type(None)),
    "output_dir": (str, type(None)),
}

_MOTION_KEYS = {
    "kind",
    "duration",
    "rate",
    "radius",
    "side",
    "wiggle_amplitude_deg",
    "yaw_amplitude_deg",
    "laps",
    "seed",
}


def config_from_dict(raw):
    """Validate a raw config dict (fail-fast on unknown keys) into a RunConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    raw = dict(raw)
    version = raw.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported value {version!r}")

    unknown = set(raw) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in raw.items():
        expected = _FIELD_TYPES[key]
        if (isinstance(value, bool) and expected is not bool) or not isinstance(value, expected):
            raise ConfigError(f"{key}: expected {expected}, got {type(value).__name__}")

    preset = raw.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown name {preset!r}")
        row = PRESETS[preset]
        raw.setdefault("length_scale", row["ell"])
        raw.setdefault("sigma_se", row["sigma_se_over_ell"] * row["ell"])
        raw.setdefault("sigma_pos_per_s", [v / 1000.0 for v in PRESET_SIGMA_POS_MM_S])
        raw.setdefault("sigma_rot_deg_per_s", list(PRESET_SIGMA_ROT_DEG_S))
        raw.setdefault("o_pos_mm_per_s", list(row["o_pos"]))
        raw.setdefault("o_rot_deg_per_s", list(row["o_rot"]))

    if "sigma_se_over_ell" in raw:
        ratio = raw.pop("sigma_se_over_ell")
        raw.setdefault("sigma_se", ratio * raw.get("length_scale", 1.0))

    motion = raw.get("motion")
    if motion is not None:
        bad = set(motion) - _MOTION_KEYS
        if bad:
            raise ConfigError(f"motion: unknown keys {sorted(bad)}")
        if "kind" not in motion:
            raise ConfigError("motion.kind: required")

    cfg = RunConfig(**raw)
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}, got {cfg.mode!r}")
    for name in ("length_scale", "sigma_se", "sigma_lin", "sigma_y", "rate"):
        if getattr(cfg, name) <= 0:
            raise ConfigError(f"{name}: must be strictly positive")
    if cfg.n_se_modes < 1:
        raise ConfigError("n_se_modes: must be at least 1")
    if len(cfg.earth_field) != 3:
        raise ConfigError("earth_field: expected 3 components")
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw)


def save_config(path, cfg):
    data = {"schema_version": SCHEMA_VERSION}
    data.update({k: v for k, v in cfg.__dict__.items()})
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def subseed(master, stream, index=0):
    """Deterministic child seed: fixed (stream, index) spawn key off the master seed."""
    streams = {"field": 0, "calibration": 1, "dataset": 2, "replicate": 3, "consistency": 4}
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(streams[stream], int(index)))
    return int(ss.generate_state(1)[0])
