"""Error-state iterated extended information filter for array SLAM.

Two modes: "slamma" (pre-calibrated sensors) estimates pose and map
weights; "slcamma" additionally estimates per-sensor axis scales and
biases online.  The error state is ordered (position, orientation, map
weights[, scales, biases]) and the filter carries the inverse covariance
(information matrix), which stays well conditioned where the innovation
covariance of a dense array does not.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import fieldmap
from .geometry import exp_rot, project_to_so3, rot_to_quat, skew
from .sensors import Calibration

MODE_SLAMMA = "slamma"
MODE_SLCAMMA = "slcamma"

MAX_ITERATIONS = 5
POS_TOL = 1e-4  # metres
ROT_TOL = np.deg2rad(0.1)
DIVERGENCE_STEP_LIMIT = 10.0  # metres; a larger single correction flags divergence


class FilterDivergence(RuntimeError):
    """Numerically broken information matrix or unbounded correction."""


@dataclass
class NoiseConfig:
    """Per-step process noise, pseudo-measurement variance and priors.

    sigma_pos / sigma_rot are 3x3 per-step covariances (m^2, rad^2),
    sigma_ver the vertical pseudo-measurement variance (m^2), sigma_y the
    magnetometer noise std (uT), lam_d / lam_b the prior variances of the
    scale and bias errors.
    """

    sigma_pos: np.ndarray
    sigma_rot: np.ndarray
    sigma_ver: float = 1e-4
    sigma_y: float = 0.1
    lam_d: float = 0.0032**2
    lam_b: float = 0.1**2

    def __post_init__(self):
        self.sigma_pos = np.asarray(self.sigma_pos, dtype=float).reshape(3, 3)
        self.sigma_rot = np.asarray(self.sigma_rot, dtype=float).reshape(3, 3)
        if self.sigma_ver <= 0:
            raise ValueError("sigma_ver must be positive")


class StateBlocks:
    """Index layout of the error state."""

    def __init__(self, n_weights, n_mag, calibrated):
        self.n_weights = n_weights
        self.n_mag = n_mag
        self.calibrated = calibrated
        self.pos = slice(0, 3)
        self.rot = slice(3, 6)
        self.map = slice(6, 6 + n_weights)
        if calibrated:
            self.scale = slice(6 + n_weights, 6 + n_weights + 3 * n_mag)
            self.bias = slice(6 + n_weights + 3 * n_mag, 6 + n_weights + 6 * n_mag)
            self.dim = 6 + n_weights + 6 * n_mag
        else:
            self.scale = None
            self.bias = None
            self.dim = 6 + n_weights


@dataclass
class FilterState:
    """Pose, map weights and (in slcamma mode) calibration estimates."""

    p: np.ndarray
    rot: np.ndarray
    m: np.ndarray
    calib: Calibration | None = None

    def copy(self):
        calib = None
        if self.calib is not None:
            calib = Calibration(self.calib.scale.copy(), self.calib.bias.copy())
        return FilterState(self.p.copy(), self.rot.copy(), self.m.copy(), calib)


@dataclass
class InfoForm:
    """Information matrix and vector over the error state."""

    mat: np.ndarray
    vec: np.ndarray


def _solve_spd(a, b):
    """Solve a symmetric positive-definite system with jitter escalation."""
    scale = np.trace(a) / len(a)
    for jitter in (0.0, 1e-12, 1e-9, 1e-6):
        try:
            cf = scipy.linalg.cho_factor(
                a + jitter * scale * np.eye(len(a)), lower=True, check_finite=False
            )
            return scipy.linalg.cho_solve(cf, b, check_finite=False)
        except scipy.linalg.LinAlgError:
            continue
    raise FilterDivergence("information matrix factorisation failed")


def _symmetrise(mat):
    return 0.5 * (mat + mat.T)


def blocks_for(basis, layout, mode):
    if mode not in (MODE_SLAMMA, MODE_SLCAMMA):
        raise ValueError(f"unknown mode {mode!r}")
    return StateBlocks(basis.n_weights, layout.n_mag, mode == MODE_SLCAMMA)


def init_filter(basis, layout, noise, hyper, mode):
    """Initial state (known start pose, zero map) and its information matrix."""
    blocks = blocks_for(basis, layout, mode)
    lam_w = fieldmap.prior_weight_cov(basis, hyper)
    if np.any(lam_w <= 0):
        raise ValueError("prior weight covariance must be positive definite")
    diag = np.empty(blocks.dim)
    diag[:6] = 1e12
    diag[blocks.map] = 1.0 / lam_w
    calib = None
    if blocks.calibrated:
        diag[blocks.scale] = 1.0 / noise.lam_d
        diag[blocks.bias] = 1.0 / noise.lam_b
        calib = Calibration.identity(layout.n_mag)
    state = FilterState(np.zeros(3), np.eye(3), np.zeros(basis.n_weights), calib)
    return state, InfoForm(np.diag(diag), np.zeros(blocks.dim))


def dynamic_update(state, info, dp_b, d_rot, noise):
    """Propagate the state with an odometry increment and downdate the information.

    The transition is block-triangular in the (position, orientation)
    blocks, with the orientation error rotating by the odometry increment,
    so its inverse is applied analytically; the process-noise downdate
    uses the matrix-inversion lemma so only a 6x6 system is solved.
    """
    dim = len(info.mat)
    rot_nb = state.rot.T
    d_rot = np.asarray(d_rot, dtype=float)
    coupling = rot_nb @ skew(dp_b)

    new_state = state.copy()
    new_state.p = state.p + rot_nb @ np.asarray(dp_b, dtype=float)
    new_state.rot = project_to_so3(d_rot @ state.rot)

    tilde = info.mat.copy()
    tilde[:, 3:6] = (tilde[:, 3:6] - tilde[:, 0:3] @ coupling) @ d_rot.T
    tilde[3:6, :] = d_rot @ (tilde[3:6, :] - coupling.T @ tilde[0:3, :])

    # G maps the 6-dim process noise into the error state.
    ig = np.empty((dim, 6))
    ig[:, :3] = tilde[:, 0:3] @ rot_nb
    ig[:, 3:6] = tilde[:, 3:6]
    q = np.zeros((6, 6))
    q[:3, :3] = noise.sigma_pos
    q[3:, 3:] = noise.sigma_rot
    inner = np.linalg.inv(q)
    inner[:3, :3] += rot_nb.T @ ig[0:3, :3]
    inner[:3, 3:] += rot_nb.T @ ig[0:3, 3:6]
    inner[3:, :3] += ig[3:6, :3]
    inner[3:, 3:] += ig[3:6, 3:6]
    try:
        correction = ig @ np.linalg.solve(_symmetrise(inner), ig.T)
    except np.linalg.LinAlgError as exc:
        raise FilterDivergence("dynamic-update noise system is singular") from exc
    new_mat = _symmetrise(tilde - correction)
    return new_state, InfoForm(new_mat, np.zeros(dim))


def vertical_update(state, info, y_ver, sigma_ver):
    """Scalar information update of the vertical position against y_ver."""
    if sigma_ver <= 0:
        raise ValueError("sigma_ver must be positive")
    residual = float(y_ver) - state.p[2]
    new_mat = info.mat.copy()
    new_mat[2, 2] += 1.0 / sigma_ver
    rhs = np.zeros(len(new_mat))
    rhs[2] = residual / sigma_ver
    delta = _solve_spd(new_mat, rhs)
    blocks = _blocks_from_state(state, len(new_mat))
    new_state = apply_error(state, delta, blocks)
    return new_state, InfoForm(_symmetrise(new_mat), np.zeros(len(new_mat)))


def _blocks_from_state(state, dim):
    n_weights = len(state.m)
    if state.calib is None:
        blocks = StateBlocks(n_weights, 0, False)
    else:
        blocks = StateBlocks(n_weights, state.calib.n_mag, True)
    if blocks.dim != dim:
        raise ValueError("state and information dimensions disagree")
    return blocks


def apply_error(state, delta, blocks):
    """Retraction: additive for position/map/calibration, multiplicative for rotation."""
    new_state = state.copy()
    new_state.p = state.p + delta[blocks.pos]
    new_state.rot = project_to_so3(exp_rot(delta[blocks.rot]) @ state.rot)
    new_state.m = state.m + delta[blocks.map]
    if blocks.calibrated:
        new_state.calib = Calibration(
            state.calib.scale + delta[blocks.scale].reshape(-1, 3),
            state.calib.bias + delta[blocks.bias].reshape(-1, 3),
        )
    return new_state


def _estimated_calib(state, n_mag):
    if state.calib is not None:
        return state.calib.scale, state.calib.bias
    return np.ones((n_mag, 3)), np.zeros((n_mag, 3))


def mag_residual(state, basis, layout, y):
    """Scale-corrected measurement minus predicted body-frame field, stacked (3 n_mag,)."""
    scale, bias = _estimated_calib(state, layout.n_mag)
    q = state.p + layout.positions @ state.rot
    predicted = (basis.grad(q) @ state.m) @ state.rot.T + bias
    return (scale * np.atleast_2d(y) - predicted).reshape(-1)


def mag_jacobian(state, basis, layout, y, mode):
    """Jacobian of the stacked residual w.r.t. the error state.

    Rows are d(residual)/d(error) through the retraction, so the
    Gauss-Newton correction is the negated information solve.
    """
    blocks = blocks_for(basis, layout, mode)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    rot = state.rot
    q = state.p + layout.positions @ rot
    grads = basis.grad(q)  # (n_mag, 3, n_weights)
    field_jac = basis.field_jacobian(q, state.m)  # (n_mag, 3, 3)

    h = np.zeros((3 * layout.n_mag, blocks.dim))
    for i in range(layout.n_mag):
        rows = slice(3 * i, 3 * i + 3)
        body_jac = rot @ field_jac[i]
        h[rows, blocks.pos] = -body_jac
        h[rows, blocks.rot] = -body_jac @ rot.T @ skew(layout.positions[i]) + skew(
            rot @ (grads[i] @ state.m)
        )
        h[rows, blocks.map] = -rot @ grads[i]
        if blocks.calibrated:
            h[rows, 6 + blocks.n_weights + 3 * i : 6 + blocks.n_weights + 3 * i + 3] = np.diag(y[i])
            off = 6 + blocks.n_weights + 3 * blocks.n_mag
            h[rows, off + 3 * i : off + 3 * i + 3] = -np.eye(3)
    return h


def mag_update_iterated(state, info, y, basis, layout, sigma_y, mode, max_iterations=MAX_ITERATIONS):
    """Iterated (re-linearised Gauss-Newton) magnetic-field measurement update.

    Each iteration re-forms the posterior information from the same prior
    and the Jacobian at the current iterate, solves for the error and
    retracts.  The right-hand side keeps the prior pull term through the
    accumulated error so the Gauss-Newton sequence contracts onto the
    maximum-a-posteriori point instead of sliding towards the
    measurement-only fit.  Stops once the position/rotation increments
    fall below the convergence thresholds or after `max_iterations`
    iterations.
    """
    blocks = blocks_for(basis, layout, mode)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    iterate = state
    new_mat = info.mat
    iterations = 0
    accumulated = np.zeros(blocks.dim)
    for _ in range(max_iterations):
        iterations += 1
        scale, _ = _estimated_calib(iterate, layout.n_mag)
        weights = 1.0 / (sigma_y**2 * scale.reshape(-1) ** 2)
        residual = mag_residual(iterate, basis, layout, y)
        if not np.all(np.isfinite(residual)):
            raise FilterDivergence("non-finite magnetic-field residual")
        h = mag_jacobian(iterate, basis, layout, y, mode)
        hw = h * weights[:, None]
        new_mat = _symmetrise(info.mat + h.T @ hw)
        delta = -_solve_spd(new_mat, h.T @ (weights * residual) + info.mat @ accumulated)
        if not np.all(np.isfinite(delta)) or np.linalg.norm(delta[blocks.pos]) > DIVERGENCE_STEP_LIMIT:
            raise FilterDivergence("unbounded correction in magnetic-field update")
        accumulated += delta
        iterate = apply_error(iterate, delta, blocks)
        if (
            np.linalg.norm(delta[blocks.pos]) < POS_TOL
            and np.linalg.norm(delta[blocks.rot]) < ROT_TOL
        ):
            break
    return iterate, InfoForm(new_mat, np.zeros(blocks.dim)), iterations


@dataclass
class RunResult:
    """Full filter run output: trajectory, map, calibration history, diagnostics."""

    times: np.ndarray
    p: np.ndarray  # (K + 1, 3)
    rot: np.ndarray  # (K + 1, 3, 3)
    iterations: np.ndarray  # (K,)
    map_weights: np.ndarray
    map_cov: np.ndarray | None = None
    calib_scale: np.ndarray | None = None  # (K + 1, n_mag, 3)
    calib_bias: np.ndarray | None = None
    diverged_step: int | None = None
    mode: str = MODE_SLAMMA

    @property
    def diverged(self):
        return self.diverged_step is not None

    @property
    def final_calibration(self):
        if self.calib_scale is None:
            return None
        return Calibration(self.calib_scale[-1], self.calib_bias[-1])


def run_slam(dataset, basis, layout, noise, hyper, mode, vertical=True):
    """Run the filter over a dataset: dynamic, vertical and iterated magnetic updates.

    On divergence the step index is recorded and the remaining steps fall
    back to dead reckoning so the diagnostics stay complete.
    """
    k_steps = dataset.n_steps
    state, info = init_filter(basis, layout, noise, hyper, mode)
    blocks = blocks_for(basis, layout, mode)

    p_hist = np.zeros((k_steps + 1, 3))
    rot_hist = np.zeros((k_steps + 1, 3, 3))
    rot_hist[0] = state.rot
    iterations = np.zeros(k_steps, dtype=int)
    calib_scale = calib_bias = None
    if blocks.calibrated:
        calib_scale = np.zeros((k_steps + 1, layout.n_mag, 3))
        calib_bias = np.zeros((k_steps + 1, layout.n_mag, 3))
        calib_scale[0] = state.calib.scale
        calib_bias[0] = state.calib.bias

    diverged_step = None
    for k in range(k_steps):
        if diverged_step is None:
            try:
                state, info = dynamic_update(
                    state, info, dataset.odom_dp[k], dataset.odom_rot[k], noise
                )
                if vertical:
                    state, info = vertical_update(
                        state, info, dataset.gt_p[k + 1, 2], noise.sigma_ver
                    )
                state, info, iterations[k] = mag_update_iterated(
                    state, info, dataset.measurements[k], basis, layout, noise.sigma_y, mode
                )
            except FilterDivergence:
                diverged_step = k
        if diverged_step is not None:
            # Dead-reckoning fallback: propagate the pose only.
            rot_nb = state.rot.T
            state.p = state.p + rot_nb @ dataset.odom_dp[k]
            state.rot = project_to_so3(dataset.odom_rot[k] @ state.rot)
        p_hist[k + 1] = state.p
        rot_hist[k + 1] = state.rot
        if blocks.calibrated:
            calib_scale[k + 1] = state.calib.scale
            calib_bias[k + 1] = state.calib.bias

    map_cov = None
    if diverged_step is None:
        try:
            cov = _solve_spd(info.mat, np.eye(blocks.dim))
            map_cov = _symmetrise(cov[blocks.map, blocks.map])
        except FilterDivergence:
            map_cov = None
    return RunResult(
        dataset.times,
        p_hist,
        rot_hist,
        iterations,
        state.m.copy(),
        map_cov=map_cov,
        calib_scale=calib_scale,
        calib_bias=calib_bias,
        diverged_step=diverged_step,
        mode=mode,
    )


def dead_reckoning(dataset):
    """Integrate odometry increments only, from the known initial pose."""
    k_steps = dataset.n_steps
    p = np.zeros((k_steps + 1, 3))
    rot = np.zeros((k_steps + 1, 3, 3))
    rot[0] = np.eye(3)
    for k in range(k_steps):
        p[k + 1] = p[k] + rot[k].T @ dataset.odom_dp[k]
        rot[k + 1] = project_to_so3(dataset.odom_rot[k] @ rot[k])
    return p, rot


def dead_reckoning_result(dataset):
    p, rot = dead_reckoning(dataset)
    return RunResult(
        dataset.times,
        p,
        rot,
        np.zeros(dataset.n_steps, dtype=int),
        np.zeros(0),
        mode="dead_reckoning",
    )


def write_trajectory_csv(path, result):
    k = len(result.p)
    quats = np.array([rot_to_quat(r) for r in result.rot])
    iters = np.concatenate([[0], result.iterations]) if len(result.iterations) else np.zeros(k)
    diverged = np.zeros(k)
    if result.diverged_step is not None:
        diverged[result.diverged_step + 1 :] = 1
    rows = np.column_stack([np.arange(k), result.times, result.p, quats, iters, diverged])
    np.savetxt(
        path,
        rows,
        delimiter=",",
        comments="",
        fmt="%.17g",
        header="k,t,px,py,pz,qw,qx,qy,qz,iterations,diverged",
    )


def write_calibration_csv(path, result):
    if result.calib_scale is None:
        raise ValueError("run has no calibration history")
    k1, n_mag, _ = result.calib_scale.shape
    ks = np.repeat(np.arange(k1), n_mag)
    sensors = np.tile(np.arange(n_mag), k1)
    rows = np.column_stack(
        [
            ks,
            sensors,
            result.calib_scale.reshape(-1, 3),
            result.calib_bias.reshape(-1, 3),
        ]
    )
    np.savetxt(
        path,
        rows,
        delimiter=",",
        comments="",
        fmt="%.17g",
        header="k,sensor,dx,dy,dz,bx,by,bz",
    )


def write_map_files(directory, result):
    """Dump final map weights (CSV) and, when available, their covariance (binary)."""
    directory = Path(directory)
    idx = np.arange(len(result.map_weights))
    diag = (
        np.diag(result.map_cov)
        if result.map_cov is not None
        else np.full(len(result.map_weights), np.nan)
    )
    np.savetxt(
        directory / "map_weights.csv",
        np.column_stack([idx, result.map_weights, diag]),
        delimiter=",",
        comments="",
        fmt="%.17g",
        header="index,weight,variance",
    )
    if result.map_cov is not None:
        np.save(directory / "map_covariance.npy", result.map_cov)
