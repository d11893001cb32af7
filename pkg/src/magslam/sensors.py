"""Magnetometer-array geometry, per-sensor calibration and the forward model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Physical board envelope of the default 30-sensor array, metres.
BOARD_SIZE_X = 0.345
BOARD_SIZE_Y = 0.245


@dataclass(frozen=True)
class ArrayLayout:
    """Body-frame sensor positions, shape (n_mag, 3)."""

    positions: np.ndarray

    def __post_init__(self):
        positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if positions.ndim != 2 or positions.shape[1] != 3 or len(positions) < 1:
            raise ValueError("layout needs at least one 3-D sensor position")
        if not np.all(np.isfinite(positions)):
            raise ValueError("sensor positions must be finite")
        object.__setattr__(self, "positions", positions)

    @property
    def n_mag(self):
        return len(self.positions)

    def single(self, index):
        """Layout restricted to one sensor (single-magnetometer baseline)."""
        return ArrayLayout(self.positions[index : index + 1])


def default_layout_30():
    """6 x 5 sensor grid spanning the board envelope, centred on the body origin."""
    xs = np.linspace(-BOARD_SIZE_X / 2, BOARD_SIZE_X / 2, 6)
    ys = np.linspace(-BOARD_SIZE_Y / 2, BOARD_SIZE_Y / 2, 5)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return ArrayLayout(np.column_stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)]))


@dataclass
class Calibration:
    """Per-sensor axis scale (dimensionless) and bias (uT), each (n_mag, 3)."""

    scale: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.scale = np.atleast_2d(np.asarray(self.scale, dtype=float))
        self.bias = np.atleast_2d(np.asarray(self.bias, dtype=float))
        if self.scale.shape != self.bias.shape or self.scale.shape[1] != 3:
            raise ValueError("scale and bias must both be (n_mag, 3)")
        if np.any(self.scale <= 0):
            raise ValueError("scale components must be strictly positive")

    @classmethod
    def identity(cls, n_mag):
        return cls(np.ones((n_mag, 3)), np.zeros((n_mag, 3)))

    @property
    def n_mag(self):
        return len(self.scale)

    def single(self, index):
        return Calibration(self.scale[index : index + 1], self.bias[index : index + 1])


def measure_forward(field_fn, position, rotation, layout, calib, noise_std=0.0, rng=None):
    """Simulate one synchronous array measurement, shape (n_mag, 3).

    Each sensor reads (R^bn f(p + R^nb s) + b) / d plus isotropic Gaussian
    noise of std `noise_std`.
    """
    position = np.asarray(position, dtype=float).reshape(3)
    rotation = np.asarray(rotation, dtype=float)
    sensor_pos = position + layout.positions @ rotation  # row-wise R^nb @ s
    field = np.atleast_2d(field_fn(sensor_pos))
    if not np.all(np.isfinite(field)):
        raise ValueError("field evaluation produced non-finite values")
    y = (field @ rotation.T + calib.bias) / calib.scale
    if noise_std > 0.0:
        if rng is None:
            raise ValueError("rng required when noise_std > 0")
        y = y + noise_std * rng.standard_normal(y.shape)
    return y


def correct_measurement(y, scale_est, sigma_y):
    """Scale-corrected stacked measurement and its diagonal noise variance.

    Multiplying by the estimated scale undoes the sensor's inverse-scale
    gain; the noise is amplified by the same factor, hence the scaled
    variance diagonal.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    scale_est = np.atleast_2d(np.asarray(scale_est, dtype=float))
    if np.any(scale_est <= 0):
        raise ValueError("scale estimates must be strictly positive")
    z = (scale_est * y).reshape(-1)
    var = (sigma_y**2 * scale_est**2).reshape(-1)
    return z, var


def save_layout(path, layout):
    rows = np.column_stack([np.arange(layout.n_mag), layout.positions])
    np.savetxt(
        path, rows, delimiter=",", header="sensor_id,sx,sy,sz", comments="", fmt="%.17g"
    )


def load_layout(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(rows[:, 0])
    return ArrayLayout(rows[order, 1:4])
