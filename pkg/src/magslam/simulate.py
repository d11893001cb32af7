"""Synthetic-world generation: curl-free field samples, motion types, datasets.

Fields are drawn either from a dense GP with the curl-free kernel
(the negative position-Hessian of the squared-exponential potential
kernel) conditioned on a lattice of anchors, or from the reduced-rank
basis itself.  Motions cover six canonical types used to probe
calibration identifiability, from full random rotation in place down to
planar translation without rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import fieldmap
from .geometry import exp_rot, project_to_so3
from .datasets import Dataset
from .sensors import Calibration, measure_forward

MOTION_KINDS = (
    "full_rotation_in_place",
    "wiggling_in_place",
    "yaw_rotation_in_place",
    "circle_no_rotation",
    "circle_yaw_rotation",
    "circle_wiggle",
    "square_loop",
    "square_loop_yaw",
)


@dataclass
class MotionSpec:
    kind: str
    duration: float = 40.0
    rate: float = 10.0
    radius: float = 0.1
    side: float = 0.5
    wiggle_amplitude_deg: float = 5.0
    yaw_amplitude_deg: float = 45.0
    laps: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MOTION_KINDS:
            raise ValueError(f"unknown motion kind {self.kind!r}")
        if self.rate <= 0 or self.radius < 0:
            raise ValueError("rate must be positive and radius non-negative")


def curl_free_kernel(pa, pb, sigma_cf, length_scale):
    """Curl-free matrix kernel between two point sets, shape (3 na, 3 nb)."""
    pa = np.atleast_2d(np.asarray(pa, dtype=float))
    pb = np.atleast_2d(np.asarray(pb, dtype=float))
    diff = pa[:, None, :] - pb[None, :, :]
    r2 = np.sum(diff**2, axis=2)
    base = (sigma_cf**2 / length_scale**2) * np.exp(-0.5 * r2 / length_scale**2)
    outer = diff[:, :, :, None] * diff[:, :, None, :] / length_scale**2
    block = base[:, :, None, None] * (np.eye(3)[None, None] - outer)
    return block.transpose(0, 2, 1, 3).reshape(3 * len(pa), 3 * len(pb))


class DenseGpField:
    """One joint GP sample of a curl-free field, evaluated by conditioning on anchors."""

    def __init__(self, anchors, earth_field, sigma_cf, length_scale, seed, jitter=1e-10):
        self.anchors = np.atleast_2d(np.asarray(anchors, dtype=float))
        self.earth_field = np.asarray(earth_field, dtype=float).reshape(3)
        self.sigma_cf = float(sigma_cf)
        self.length_scale = float(length_scale)
        self.seed = seed
        if self.sigma_cf > 0:
            kaa = curl_free_kernel(self.anchors, self.anchors, sigma_cf, length_scale)
            kaa[np.diag_indices_from(kaa)] += jitter
            try:
                chol = scipy.linalg.cholesky(kaa, lower=True)
            except scipy.linalg.LinAlgError as exc:
                raise ValueError("anchor covariance is not positive definite") from exc
            rng = np.random.default_rng(seed)
            self.anchor_values = chol @ rng.standard_normal(len(kaa))
            self._alpha = scipy.linalg.cho_solve((chol, True), self.anchor_values)
        else:
            self.anchor_values = np.zeros(3 * len(self.anchors))
            self._alpha = None

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.broadcast_to(self.earth_field, (len(points), 3)).copy()
        if self._alpha is not None:
            kpa = curl_free_kernel(points, self.anchors, self.sigma_cf, self.length_scale)
            out += (kpa @ self._alpha).reshape(-1, 3)
        return out

    def jacobian(self, points):
        """Spatial derivative of the field, shape (n, 3, 3); symmetric (curl-free)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((len(points), 3, 3))
        if self._alpha is None:
            return out
        ell2 = self.length_scale**2
        alpha = self._alpha.reshape(-1, 3)
        diff = points[:, None, :] - self.anchors[None, :, :]  # (n, a, 3)
        base = (self.sigma_cf**2 / ell2) * np.exp(
            -0.5 * np.sum(diff**2, axis=2) / ell2
        )  # (n, a)
        dot = np.einsum("nad,ad->na", diff, alpha)  # d . alpha
        eye = np.eye(3)
        # d/dp of base * (I - d d^T / ell^2) contracted with alpha; the
        # result is symmetric in the field and derivative indices.
        term = (
            np.einsum("nal,ai->nail", diff, alpha)
            + np.einsum("nai,al->nail", diff, alpha)
            + np.einsum("na,il->nail", dot, eye)
            - np.einsum("na,nai,nal->nail", dot / ell2, diff, diff)
        )
        out -= np.einsum("na,nail->nil", base / ell2, term)
        return out


class ReducedRankField:
    """Field drawn from the reduced-rank prior: earth field plus basis gradient."""

    def __init__(self, basis, weights, earth_field):
        self.basis = basis
        self.weights = np.asarray(weights, dtype=float)
        self.earth_field = np.asarray(earth_field, dtype=float).reshape(3)

    def __call__(self, points):
        return self.basis.grad(points) @ self.weights + self.earth_field

    def jacobian(self, points):
        """Spatial derivative of the field, shape (n, 3, 3); symmetric (curl-free)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.basis.field_jacobian(points, self.weights)


def anchor_lattice(region, spacing):
    axes = [
        np.arange(region.lower[d], region.upper[d] + spacing / 2, spacing) for d in range(3)
    ]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.ravel() for g in grid])


def sample_field(
    sigma_cf,
    length_scale,
    earth_field,
    region,
    seed,
    method="dense",
    sigma_lin=15.0,
    n_se_modes=350,
    anchor_spacing=None,
):
    """Draw one random curl-free field over `region` (a DomainBox)."""
    if method == "dense":
        spacing = anchor_spacing if anchor_spacing is not None else length_scale / 2.0
        anchors = anchor_lattice(region, spacing)
        return DenseGpField(anchors, earth_field, sigma_cf, length_scale, seed)
    if method == "reduced_rank":
        hyper = fieldmap.GpHyper(
            length_scale=length_scale,
            sigma_se=max(sigma_cf, 1e-12) * length_scale,
            sigma_lin=sigma_lin,
            sigma_y=1.0,
        )
        basis = fieldmap.build_basis(region, n_se_modes, hyper)
        lam = fieldmap.prior_weight_cov(basis, hyper)
        rng = np.random.default_rng(seed)
        weights = np.sqrt(lam) * rng.standard_normal(basis.n_weights)
        if sigma_cf == 0:
            weights[:] = 0.0
        return ReducedRankField(basis, weights, earth_field)
    raise ValueError(f"unknown field sampling method {method!r}")


def _normalise_start(p, rot):
    """Re-express poses in the navigation frame anchored at the first pose."""
    r0 = rot[0]
    p_out = (p - p[0]) @ r0.T  # row-wise R0^bn @ (p_k - p_0)
    rot_out = np.einsum("kij,lj->kil", rot, r0)
    rot_out = np.array([project_to_so3(r) for r in rot_out])
    return p_out, rot_out


def gen_motion(spec):
    """Deterministic pose sequence for a motion type, starting at the identity pose."""
    k_steps = int(round(spec.duration * spec.rate))
    t = np.arange(k_steps + 1) / spec.rate
    amp = np.deg2rad(spec.wiggle_amplitude_deg)
    p = np.zeros((k_steps + 1, 3))
    rot = np.tile(np.eye(3), (k_steps + 1, 1, 1))

    if spec.kind == "full_rotation_in_place":
        rng = np.random.default_rng(spec.seed)
        dt = 1.0 / spec.rate
        omega_cap = np.deg2rad(90.0)
        omega = rng.standard_normal(3)
        omega *= np.deg2rad(45.0) / np.linalg.norm(omega)
        sigma_accel = np.deg2rad(120.0)
        for k in range(k_steps):
            omega = omega + sigma_accel * dt * rng.standard_normal(3)
            speed = np.linalg.norm(omega)
            if speed > omega_cap:
                omega = omega * (omega_cap / speed)
            rot[k + 1] = project_to_so3(exp_rot(omega * dt) @ rot[k])
    elif spec.kind == "wiggling_in_place":
        angles = np.column_stack(
            [
                amp * np.sin(2 * np.pi * 0.50 * t),
                amp * np.sin(2 * np.pi * 0.35 * t + 1.0),
                amp * np.sin(2 * np.pi * 0.27 * t + 2.0),
            ]
        )
        rot = np.array([exp_rot(a) for a in angles])
    elif spec.kind == "yaw_rotation_in_place":
        yaw = np.deg2rad(spec.yaw_amplitude_deg) * np.sin(2 * np.pi * 0.25 * t)
        rot = np.array([exp_rot([0.0, 0.0, -y]) for y in yaw])
    elif spec.kind in ("circle_no_rotation", "circle_yaw_rotation", "circle_wiggle"):
        theta = 2 * np.pi * spec.laps * t / spec.duration
        p = spec.radius * np.column_stack(
            [np.cos(theta) - 1.0, np.sin(theta), np.zeros_like(theta)]
        )
        if spec.kind != "circle_no_rotation":
            yaw = theta + np.pi / 2  # heading along the path tangent
            rot = np.array([exp_rot([0.0, 0.0, -y]) for y in yaw])
        if spec.kind == "circle_wiggle":
            wig = np.column_stack(
                [
                    amp * np.sin(2 * np.pi * 0.50 * t),
                    amp * np.sin(2 * np.pi * 0.35 * t + 1.0),
                    np.zeros_like(t),
                ]
            )
            rot = np.array([exp_rot(w) @ r for w, r in zip(wig, rot)])
    elif spec.kind in ("square_loop", "square_loop_yaw"):
        # Constant-speed traversal of a square loop; fraction of the
        # perimeter covered grows linearly with time.  The yaw variant
        # adds a sinusoidal heading oscillation about the vertical.
        corners = spec.side * np.array(
            [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        )
        frac = (spec.laps * t / spec.duration) % 1.0
        seg = np.minimum((frac * 4).astype(int), 3)
        local = frac * 4 - seg
        nxt = (seg + 1) % 4
        xy = corners[seg] + local[:, None] * (corners[nxt] - corners[seg])
        p = np.column_stack([xy, np.zeros(len(t))])
        if spec.kind == "square_loop_yaw":
            # Heading oscillation plus a roll/pitch wiggle so that every
            # body axis sweeps through a range of directions.
            yaw = np.deg2rad(spec.yaw_amplitude_deg) * np.sin(2 * np.pi * 0.25 * t)
            rot = np.array([exp_rot([0.0, 0.0, -y]) for y in yaw])
            wig = np.column_stack(
                [
                    amp * np.sin(2 * np.pi * 0.50 * t),
                    amp * np.sin(2 * np.pi * 0.35 * t + 1.0),
                    np.zeros_like(t),
                ]
            )
            rot = np.array([exp_rot(w) @ r for w, r in zip(wig, rot)])
    return _normalise_start(p, rot)


def sample_calibration(n_mag, seed, scale_range=(0.9, 1.1), bias_range=(-1.5, 1.5)):
    """Per-axis uniform scale and bias draws for every sensor."""
    rng = np.random.default_rng(seed)
    scale = rng.uniform(*scale_range, size=(n_mag, 3))
    bias = rng.uniform(*bias_range, size=(n_mag, 3))
    return Calibration(scale, bias)


def make_dataset(
    field_fn,
    gt_p,
    gt_rot,
    layout,
    calib,
    rate,
    seed,
    sigma_pos_per_s=0.0,
    sigma_rot_per_s=0.0,
    sigma_y=0.0,
    o_pos=(0.0, 0.0, 0.0),
    o_rot=(0.0, 0.0, 0.0),
    metadata=None,
):
    """Assemble a dataset from ground-truth poses: noisy/drifting odometry + measurements.

    `sigma_pos_per_s` (m/s) and `sigma_rot_per_s` (rad/s) are per-second
    noise stds, scalar or per-axis; the per-step std divides by the rate.
    Drift offsets `o_pos` (m/s, body frame) and `o_rot` (rad/s) are added
    as constant per-step terms.
    """
    gt_p = np.asarray(gt_p, dtype=float)
    gt_rot = np.asarray(gt_rot, dtype=float)
    k_steps = len(gt_p) - 1
    rng = np.random.default_rng(seed)

    pos_std = np.broadcast_to(np.asarray(sigma_pos_per_s, dtype=float) / rate, (3,))
    rot_std = np.broadcast_to(np.asarray(sigma_rot_per_s, dtype=float) / rate, (3,))
    o_pos_step = np.asarray(o_pos, dtype=float) / rate
    o_rot_step = np.asarray(o_rot, dtype=float) / rate

    odom_dp = np.zeros((k_steps, 3))
    odom_rot = np.zeros((k_steps, 3, 3))
    for k in range(k_steps):
        dp_true = gt_rot[k] @ (gt_p[k + 1] - gt_p[k])
        drot_true = gt_rot[k + 1] @ gt_rot[k].T
        odom_dp[k] = dp_true + o_pos_step + pos_std * rng.standard_normal(3)
        nu = rot_std * rng.standard_normal(3)
        odom_rot[k] = project_to_so3(exp_rot(nu) @ exp_rot(o_rot_step) @ drot_true)

    measurements = np.zeros((k_steps, layout.n_mag, 3))
    for k in range(k_steps):
        measurements[k] = measure_forward(
            field_fn, gt_p[k + 1], gt_rot[k + 1], layout, calib, sigma_y, rng
        )

    meta = dict(metadata or {})
    meta.update(
        seed=int(seed),
        sigma_y=float(sigma_y),
        o_pos=list(np.asarray(o_pos, dtype=float)),
        o_rot=list(np.asarray(o_rot, dtype=float)),
    )
    return Dataset(
        odom_dp,
        odom_rot,
        measurements,
        gt_p,
        gt_rot,
        rate,
        true_calib=Calibration(calib.scale.copy(), calib.bias.copy()),
        metadata=meta,
    )


def consistency_experiment(
    calibrations, true_calib, field_fn, motion_spec, layout, seed, sigma_y=0.1
):
    """Inter-sensor norm comparison when every sensor sees the same reference field.

    Returns a dict with the reference norm series, the uncalibrated
    per-sensor norms, and corrected norms for each candidate calibration.
    """
    gt_p, gt_rot = gen_motion(motion_spec)
    rng = np.random.default_rng(seed)
    k1 = len(gt_p)
    n_mag = layout.n_mag

    reference_body = np.einsum("kij,kj->ki", gt_rot, field_fn(gt_p))
    uncal = (reference_body[:, None, :] + true_calib.bias[None]) / true_calib.scale[None]
    uncal = uncal + sigma_y * rng.standard_normal(uncal.shape)

    out = {
        "reference": np.linalg.norm(reference_body, axis=1),
        "uncalibrated": np.linalg.norm(uncal, axis=2),
        "corrected": {},
    }
    for name, calib in calibrations.items():
        corrected = calib.scale[None] * uncal - calib.bias[None]
        out["corrected"][name] = np.linalg.norm(corrected, axis=2)
    return out
