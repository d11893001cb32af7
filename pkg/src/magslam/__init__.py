"""Magnetic-field SLAM with a magnetometer array and online sensor calibration."""

from .datasets import Dataset, load_dataset, save_dataset
from .estimator import MagneticFieldSlam
from .fieldmap import (
    BasisSet,
    DomainBox,
    GpHyper,
    build_basis,
    build_domain,
    predict_field,
    prior_weight_cov,
    spectral_density_se,
)
from .filtering import (
    FilterDivergence,
    FilterState,
    InfoForm,
    NoiseConfig,
    RunResult,
    dead_reckoning,
    init_filter,
    run_slam,
)
from .geometry import exp_rot, project_to_so3, skew
from .sensors import ArrayLayout, Calibration, default_layout_30, measure_forward
from .simulate import MotionSpec, gen_motion, make_dataset, sample_calibration, sample_field

__all__ = [
    "ArrayLayout",
    "BasisSet",
    "Calibration",
    "Dataset",
    "DomainBox",
    "FilterDivergence",
    "FilterState",
    "GpHyper",
    "InfoForm",
    "MagneticFieldSlam",
    "MotionSpec",
    "NoiseConfig",
    "RunResult",
    "build_basis",
    "build_domain",
    "dead_reckoning",
    "default_layout_30",
    "exp_rot",
    "gen_motion",
    "init_filter",
    "load_dataset",
    "make_dataset",
    "measure_forward",
    "predict_field",
    "prior_weight_cov",
    "project_to_so3",
    "run_slam",
    "sample_calibration",
    "sample_field",
    "save_dataset",
    "skew",
    "spectral_density_se",
]

__version__ = "0.1.0"
