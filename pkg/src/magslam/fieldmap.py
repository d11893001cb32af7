"""Reduced-rank GP model of the ambient magnetic field.

The field is modelled as the gradient of a scalar potential so that it is
curl-free by construction.  The potential is expanded in the Dirichlet
sine eigenbasis of the Laplacian on a cuboid domain plus three linear
columns; the field map then becomes a finite weight vector with a
diagonal Gaussian prior.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class OutOfDomainWarning(UserWarning):
    """Query point outside the basis domain: prediction unreliable."""


@dataclass(frozen=True)
class DomainBox:
    """Axis-aligned cuboid on which the eigenbasis is defined."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(3)
        upper = np.asarray(self.upper, dtype=float).reshape(3)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("domain bounds must be finite")
        if np.any(upper <= lower):
            raise ValueError("domain box is degenerate: upper must exceed lower on every axis")

    @property
    def sides(self):
        return self.upper - self.lower

    def contains(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)


@dataclass(frozen=True)
class GpHyper:
    """Field-model hyperparameters.

    length_scale in metres, sigma_se at potential scale (uT*m), sigma_lin
    in uT and sigma_y in uT (measurement noise std).
    """

    length_scale: float
    sigma_se: float
    sigma_lin: float
    sigma_y: float

    def __post_init__(self):
        for name in ("length_scale", "sigma_se", "sigma_lin", "sigma_y"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")


def build_domain(positions, margin):
    """Bounding box of `positions` inflated by `margin` on every face."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if positions.size == 0:
        raise ValueError("cannot build a domain from an empty position list")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    lower = positions.min(axis=0) - margin
    upper = positions.max(axis=0) + margin
    return DomainBox(lower, upper)


def spectral_density_se(omega, hyper):
    """Spectral density of the 3-D squared-exponential kernel."""
    omega = np.asarray(omega, dtype=float)
    ell = hyper.length_scale
    return hyper.sigma_se**2 * (2.0 * np.pi * ell**2) ** 1.5 * np.exp(-0.5 * omega**2 * ell**2)


class BasisSet:
    """Laplace eigenbasis on a cuboid plus linear-kernel columns.

    Weight slot 0..2 hold the linear columns (constant-gradient potential),
    slot 3+j holds sine mode j.  Modes are ordered by decreasing spectral
    density, i.e. by increasing eigenvalue.
    """

    def __init__(self, domain, modes, eigenvalues):
        self.domain = domain
        self.modes = np.asarray(modes, dtype=int).reshape(-1, 3)
        self.eigenvalues = np.asarray(eigenvalues, dtype=float).reshape(-1)
        if len(self.modes) != len(self.eigenvalues):
            raise ValueError("modes and eigenvalues length mismatch")
        # Per-axis spatial frequencies pi*j_d/L_d and normalisation constant.
        self._freq = np.pi * self.modes / domain.sides
        self._norm = float(np.prod(np.sqrt(2.0 / domain.sides)))

    @property
    def n_modes(self):
        return len(self.modes)

    @property
    def n_weights(self):
        return 3 + len(self.modes)

    def _check_inside(self, points):
        inside = self.domain.contains(points)
        if not np.all(inside):
            warnings.warn(
                "basis evaluated outside its domain; returning the analytic continuation",
                OutOfDomainWarning,
                stacklevel=3,
            )

    def _trig(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        arg = (points - self.domain.lower)[:, None, :] * self._freq[None, :, :]
        return np.sin(arg), np.cos(arg)

    def phi(self, points):
        """Scalar sine eigenfunctions, shape (n_points, n_modes)."""
        s, _ = self._trig(points)
        return self._norm * s[:, :, 0] * s[:, :, 1] * s[:, :, 2]

    def grad(self, points):
        """Gradient of every basis potential, shape (n_points, 3, n_weights)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self._check_inside(points)
        s, c = self._trig(points)
        n = len(points)
        out = np.zeros((n, 3, self.n_weights))
        out[:, :, :3] = np.eye(3)
        w = self._freq
        out[:, 0, 3:] = self._norm * w[:, 0] * c[:, :, 0] * s[:, :, 1] * s[:, :, 2]
        out[:, 1, 3:] = self._norm * w[:, 1] * s[:, :, 0] * c[:, :, 1] * s[:, :, 2]
        out[:, 2, 3:] = self._norm * w[:, 2] * s[:, :, 0] * s[:, :, 1] * c[:, :, 2]
        return out

    def hess(self, point):
        """Position Hessian of every basis potential at one point.

        Returns shape (n_weights, 3, 3); the linear columns are zero and
        each sine-mode Hessian is symmetric with trace -lambda_j * phi_j.
        """
        point = np.asarray(point, dtype=float).reshape(1, 3)
        self._check_inside(point)
        s, c = self._trig(point)
        s, c = s[0], c[0]
        w = self._freq
        out = np.zeros((self.n_weights, 3, 3))
        h = out[3:]
        h[:, 0, 0] = -(w[:, 0] ** 2) * s[:, 0] * s[:, 1] * s[:, 2]
        h[:, 1, 1] = -(w[:, 1] ** 2) * s[:, 0] * s[:, 1] * s[:, 2]
        h[:, 2, 2] = -(w[:, 2] ** 2) * s[:, 0] * s[:, 1] * s[:, 2]
        h[:, 0, 1] = h[:, 1, 0] = w[:, 0] * w[:, 1] * c[:, 0] * c[:, 1] * s[:, 2]
        h[:, 0, 2] = h[:, 2, 0] = w[:, 0] * w[:, 2] * c[:, 0] * s[:, 1] * c[:, 2]
        h[:, 1, 2] = h[:, 2, 1] = w[:, 1] * w[:, 2] * s[:, 0] * c[:, 1] * c[:, 2]
        out[3:] *= self._norm
        return out

    def field_jacobian(self, points, weights):
        """Weighted Hessian sum: Jacobian of the predicted field, (n_points, 3, 3)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self._check_inside(points)
        s, c = self._trig(points)
        m = np.asarray(weights, dtype=float)[3:]
        w = self._freq
        n = len(points)
        out = np.zeros((n, 3, 3))
        sss = s[:, :, 0] * s[:, :, 1] * s[:, :, 2]
        out[:, 0, 0] = -sss @ (m * w[:, 0] ** 2)
        out[:, 1, 1] = -sss @ (m * w[:, 1] ** 2)
        out[:, 2, 2] = -sss @ (m * w[:, 2] ** 2)
        out[:, 0, 1] = out[:, 1, 0] = (c[:, :, 0] * c[:, :, 1] * s[:, :, 2]) @ (m * w[:, 0] * w[:, 1])
        out[:, 0, 2] = out[:, 2, 0] = (c[:, :, 0] * s[:, :, 1] * c[:, :, 2]) @ (m * w[:, 0] * w[:, 2])
        out[:, 1, 2] = out[:, 2, 1] = (s[:, :, 0] * c[:, :, 1] * c[:, :, 2]) @ (m * w[:, 1] * w[:, 2])
        return self._norm * out


def build_basis(domain, n_se_modes, hyper, max_modes_per_axis=80):
    """Enumerate candidate sine modes and keep the `n_se_modes` strongest.

    Candidates are enumerated on a per-axis index grid that is enlarged
    until the kept set is strictly interior, so the truncation is
    independent of the enumeration bound.
    """
    if n_se_modes < 1:
        raise ValueError("n_se_modes must be at least 1")
    sides = domain.sides
    jmax = int(np.ceil(n_se_modes ** (1.0 / 3.0))) + 3
    while True:
        axes = np.arange(1, jmax + 1)
        modes = np.stack(np.meshgrid(axes, axes, axes, indexing="ij"), axis=-1).reshape(-1, 3)
        lam = np.sum((np.pi * modes / sides) ** 2, axis=1)
        density = spectral_density_se(np.sqrt(lam), hyper)
        if n_se_modes > len(modes):
            raise ValueError("n_se_modes exceeds the candidate mode set")
        # Primary key: density descending; ties broken by eigenvalue then index.
        order = np.lexsort((modes[:, 2], modes[:, 1], modes[:, 0], lam, -density))
        keep = order[:n_se_modes]
        if np.max(modes[keep]) < jmax:
            return BasisSet(domain, modes[keep], lam[keep])
        jmax += 2
        if jmax > max_modes_per_axis:
            raise ValueError("candidate mode enumeration cap exceeded")


def prior_weight_cov(basis, hyper):
    """Diagonal of the prior weight covariance, length n_weights."""
    diag = np.empty(basis.n_weights)
    diag[:3] = hyper.sigma_lin**2
    diag[3:] = spectral_density_se(np.sqrt(basis.eigenvalues), hyper)
    return diag


def predict_field(basis, weights, err_cov_block, point):
    """Field mean and 3x3 covariance at `point` from weights and their covariance."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (basis.n_weights,):
        raise ValueError("weight vector length does not match the basis")
    g = basis.grad(point)[0]
    mean = g @ weights
    if err_cov_block is None:
        return mean, np.zeros((3, 3))
    err_cov_block = np.asarray(err_cov_block, dtype=float)
    if err_cov_block.shape != (basis.n_weights, basis.n_weights):
        raise ValueError("covariance block shape does not match the basis")
    var = g @ err_cov_block @ g.T
    return mean, var


def export_map_grid(path, basis, weights, err_cov_block, n_xy=40, z=0.0):
    """Write a CSV grid (x, y, z, mean_*, norm, std_norm) over the domain at height z."""
    xs = np.linspace(basis.domain.lower[0], basis.domain.upper[0], n_xy)
    ys = np.linspace(basis.domain.lower[1], basis.domain.upper[1], n_xy)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)])
    g = basis.grad(points)
    mean = g @ np.asarray(weights, dtype=float)
    if err_cov_block is None:
        trace_var = np.zeros(len(points))
    else:
        flat = g.reshape(-1, basis.n_weights)
        trace_var = np.sum((flat @ err_cov_block) * flat, axis=1).reshape(-1, 3).sum(axis=1)
    rows = np.column_stack(
        [
            points,
            mean,
            np.linalg.norm(mean, axis=1),
            np.sqrt(np.maximum(trace_var, 0.0)),
        ]
    )
    header = "x,y,z,mean_x,mean_y,mean_z,norm,std_norm"
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
