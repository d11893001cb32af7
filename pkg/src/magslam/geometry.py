"""Minimal SO(3) toolkit: skew operator, Rodrigues exponential, re-orthonormalisation."""

from __future__ import annotations

import numpy as np

# Below this angle the sin/cos terms of the Rodrigues formula are dominated by
# cancellation noise; switch to the second-order Taylor expansion.
SMALL_ANGLE = 1e-8


def skew(v):
    """Cross-product matrix: skew(v) @ w == cross(v, w)."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def exp_rot(v):
    """Map an axis-angle vector (radians) to a rotation matrix."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v)
    k = skew(v)
    if theta < SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * (k @ k)
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + a * k + b * (k @ k)


def project_to_so3(r):
    """Nearest rotation matrix in Frobenius norm (polar step via SVD).

    Applied after every multiplicative rotation update to contain
    orthonormality drift.
    """
    u, _, vt = np.linalg.svd(np.asarray(r, dtype=float))
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def is_rotation(r, tol=1e-9):
    r = np.asarray(r, dtype=float)
    return (
        np.linalg.norm(r.T @ r - np.eye(3)) < tol
        and abs(np.linalg.det(r) - 1.0) < tol
    )


def rotation_angle(r):
    """Rotation angle in radians of a rotation matrix, in [0, pi]."""
    c = (np.trace(np.asarray(r, dtype=float)) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def rot_to_quat(r):
    """Rotation matrix to unit quaternion (w, x, y, z), w >= 0."""
    r = np.asarray(r, dtype=float)
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(1.0 + r[i, i] - r[j, j] - r[k, k]) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)
