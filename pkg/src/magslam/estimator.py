"""Scikit-learn style estimator facade over the SLAM filter.

`MagneticFieldSlam.fit` consumes a Dataset and learns the trajectory, the
field map and (optionally) the sensor calibration; `predict` evaluates
the learned field at query positions.  Hyperparameters follow the
sklearn get_params/set_params protocol so the estimator composes with
the wider ecosystem (cloning, grid search over field hyperparameters).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import filtering
from .datasets import Dataset
from .fieldmap import GpHyper, build_basis, build_domain, predict_field
from .filtering import NoiseConfig
from .sensors import default_layout_30


class MagneticFieldSlam(BaseEstimator):
    """Joint pose / field-map (/ calibration) estimator for magnetometer arrays.

    Parameters mirror the run configuration: `mode` is "slamma" for
    pre-calibrated sensors or "slcamma" for online calibration.
    """

    def __init__(
        self,
        mode="slamma",
        n_se_modes=300,
        length_scale=1.0,
        sigma_se=1.0,
        sigma_lin=15.0,
        sigma_y=0.1,
        domain_margin=None,
        sigma_pos_per_s=0.01,
        sigma_rot_deg_per_s=0.1,
        sigma_ver=1e-4,
        lam_d_std=0.0032,
        lam_b_std=0.1,
        vertical_update=False,
        layout=None,
    ):
        self.mode = mode
        self.n_se_modes = n_se_modes
        self.length_scale = length_scale
        self.sigma_se = sigma_se
        self.sigma_lin = sigma_lin
        self.sigma_y = sigma_y
        self.domain_margin = domain_margin
        self.sigma_pos_per_s = sigma_pos_per_s
        self.sigma_rot_deg_per_s = sigma_rot_deg_per_s
        self.sigma_ver = sigma_ver
        self.lam_d_std = lam_d_std
        self.lam_b_std = lam_b_std
        self.vertical_update = vertical_update
        self.layout = layout

    def _hyper(self):
        return GpHyper(
            length_scale=self.length_scale,
            sigma_se=self.sigma_se,
            sigma_lin=self.sigma_lin,
            sigma_y=self.sigma_y,
        )

    def fit(self, X, y=None):
        """Run the filter over a Dataset `X`."""
        if not isinstance(X, Dataset):
            raise TypeError("fit expects a magslam.datasets.Dataset")
        layout = self.layout if self.layout is not None else default_layout_30()
        if layout.n_mag != X.n_mag:
            raise ValueError("layout sensor count does not match the dataset")
        margin = 2.0 * self.length_scale if self.domain_margin is None else self.domain_margin
        sensor_world = X.gt_p[:, None, :] + np.einsum(
            "kji,sj->ksi", X.gt_rot, layout.positions
        )
        domain = build_domain(sensor_world.reshape(-1, 3), margin)
        basis = build_basis(domain, self.n_se_modes, self._hyper())
        pos_step = np.asarray(self.sigma_pos_per_s, dtype=float) / X.rate
        rot_step = np.deg2rad(np.asarray(self.sigma_rot_deg_per_s, dtype=float)) / X.rate
        noise = NoiseConfig(
            sigma_pos=np.diag(np.broadcast_to(pos_step**2, (3,))),
            sigma_rot=np.diag(np.broadcast_to(rot_step**2, (3,))),
            sigma_ver=self.sigma_ver,
            sigma_y=self.sigma_y,
            lam_d=self.lam_d_std**2,
            lam_b=self.lam_b_std**2,
        )
        result = filtering.run_slam(
            X, basis, layout, noise, self._hyper(), self.mode, vertical=self.vertical_update
        )
        self.basis_ = basis
        self.result_ = result
        self.trajectory_ = result.p
        self.rotations_ = result.rot
        self.map_weights_ = result.map_weights
        self.map_cov_ = result.map_cov
        self.calibration_ = result.final_calibration
        self.n_features_in_ = 3
        return self

    def predict(self, X, return_std=False):
        """Field mean (n, 3) at query positions; optionally per-point std of the norm."""
        check_is_fitted(self, "basis_")
        X = check_array(X, ensure_min_features=3)
        means = np.zeros((len(X), 3))
        stds = np.zeros(len(X))
        for i, point in enumerate(X):
            mean, var = predict_field(self.basis_, self.map_weights_, self.map_cov_, point)
            means[i] = mean
            stds[i] = np.sqrt(max(np.trace(var), 0.0))
        if return_std:
            return means, stds
        return means
