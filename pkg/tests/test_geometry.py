import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from magslam.geometry import (
    exp_rot,
    is_rotation,
    project_to_so3,
    rot_to_quat,
    rotation_angle,
    skew,
)


def matrix_exponential_series(v, terms=30):
    """Reference matrix exponential of [v x] by truncated power series."""
    a = skew(v)
    out = np.eye(3)
    term = np.eye(3)
    for n in range(1, terms):
        term = term @ a / n
        out = out + term
    return out


vec3 = st.lists(
    st.floats(min_value=-3.0, max_value=3.0, allow_nan=False), min_size=3, max_size=3
)


class TestSkew:
    def test_matches_cross_product(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = rng.normal(size=3), rng.normal(size=3)
            assert np.allclose(skew(a) @ b, np.cross(a, b), atol=1e-14)

    def test_antisymmetric(self):
        v = np.array([1.0, -2.0, 0.5])
        assert np.allclose(skew(v), -skew(v).T)

    def test_known_layout(self):
        m = skew([1.0, 2.0, 3.0])
        expected = np.array([[0.0, -3.0, 2.0], [3.0, 0.0, -1.0], [-2.0, 1.0, 0.0]])
        assert np.array_equal(m, expected)


class TestExpRot:
    def test_zero_gives_identity(self):
        assert np.array_equal(exp_rot(np.zeros(3)), np.eye(3))

    def test_matches_series_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            v = rng.uniform(-np.pi, np.pi, size=3)
            assert np.allclose(exp_rot(v), matrix_exponential_series(v), atol=1e-12)

    def test_quarter_turn_about_z(self):
        r = exp_rot([0.0, 0.0, np.pi / 2])
        assert np.allclose(r @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-14)

    def test_angle_recovered(self):
        v = np.array([0.3, -0.4, 1.2])
        angle = np.linalg.norm(v)
        assert rotation_angle(exp_rot(v)) == pytest.approx(angle, abs=1e-12)

    def test_small_angle_branch_continuity(self):
        # Values straddling the series switchover must agree smoothly.
        for mag in (1e-10, 1e-9, 1e-8, 1e-7, 1e-6):
            v = np.array([mag, 0.0, 0.0])
            assert np.allclose(exp_rot(v), matrix_exponential_series(v), atol=1e-15)

    @given(vec3)
    @settings(max_examples=50, deadline=None)
    def test_always_rotation(self, v):
        assert is_rotation(exp_rot(np.array(v)), tol=1e-9)

    @given(vec3)
    @settings(max_examples=50, deadline=None)
    def test_inverse_is_transpose(self, v):
        r = exp_rot(np.array(v))
        assert np.allclose(r @ exp_rot(-np.array(v)), np.eye(3), atol=1e-12)


class TestProjectToSo3:
    def test_fixes_scaled_rotation(self):
        r = exp_rot([0.1, 0.2, 0.3])
        assert np.allclose(project_to_so3(1.001 * r), r, atol=1e-10)

    def test_idempotent_on_rotation(self):
        r = exp_rot([1.0, -0.5, 0.2])
        assert np.allclose(project_to_so3(r), r, atol=1e-14)

    def test_determinant_positive(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            r = project_to_so3(np.eye(3) + 0.2 * rng.normal(size=(3, 3)))
            assert is_rotation(r, tol=1e-9)
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)

    def test_nearest_in_frobenius_norm(self):
        rng = np.random.default_rng(3)
        m = exp_rot([0.4, 0.1, -0.2]) + 0.05 * rng.normal(size=(3, 3))
        proj = project_to_so3(m)
        dist = np.linalg.norm(m - proj)
        for _ in range(200):
            other = exp_rot(rng.uniform(-np.pi, np.pi, size=3))
            assert np.linalg.norm(m - other) >= dist - 1e-12


class TestRotationAngle:
    def test_identity_is_zero(self):
        assert rotation_angle(np.eye(3)) == 0.0

    def test_half_turn(self):
        assert rotation_angle(exp_rot([np.pi, 0.0, 0.0])) == pytest.approx(np.pi)

    def test_clipping_near_identity(self):
        # Numerically trace can exceed 3 by rounding; must not produce NaN.
        r = exp_rot([1e-9, 0.0, 0.0])
        assert np.isfinite(rotation_angle(r @ r.T @ r))


class TestRotToQuat:
    def test_identity(self):
        assert np.allclose(rot_to_quat(np.eye(3)), [1.0, 0.0, 0.0, 0.0])

    def test_unit_norm_and_positive_w(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            q = rot_to_quat(exp_rot(rng.uniform(-np.pi, np.pi, size=3)))
            assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
            assert q[0] >= 0.0

    def test_axis_angle_round_trip(self):
        v = np.array([0.0, 0.0, np.pi / 2])
        q = rot_to_quat(exp_rot(v))
        expected = [np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)]
        assert np.allclose(q, expected, atol=1e-12)
