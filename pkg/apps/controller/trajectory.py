"""
Rest-to-rest septic references for position and orientation.

A septic ``s(t) = x0 + (xT - x0) sigma(t / T)`` with
``sigma(r) = 35 r^4 - 84 r^5 + 70 r^6 - 20 r^7`` has zero velocity,
acceleration and jerk at both ends.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from apps.dynamics.so3 import expm_so3

from .exceptions import ControllerConfigurationError

SIGMA_COEFFS = np.array([0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0])


def septic_coeffs(x0, xT, T):
    """Ascending-power coefficients c0..c7 of the septic from ``x0`` to ``xT`` in ``T`` seconds."""
    if not T > 0:
        raise ControllerConfigurationError('duration must be positive', duration=T)
    scale = T ** -np.arange(8.0)
    coeffs = (xT - x0) * SIGMA_COEFFS * scale
    coeffs[0] += x0
    return coeffs


def evaluate(coeffs, t, order=0):
    """Value (order 0) or ``order``-th derivative of a polynomial at ``t``."""
    return P.polyval(t, P.polyder(coeffs, order) if order else coeffs)


@dataclass(frozen=True)
class TrajectorySpec:
    """Point-to-point maneuver with a rotation of ``rot_angle`` about ``rot_axis``."""

    p_start: np.ndarray
    p_end: np.ndarray
    rot_axis: np.ndarray
    rot_angle: float
    duration: float

    def __post_init__(self):
        for name in ('p_start', 'p_end', 'rot_axis'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not self.duration > 0:
            raise ControllerConfigurationError('trajectory duration must be positive', duration=self.duration)
        if abs(np.linalg.norm(self.rot_axis) - 1.0) > 1e-12:
            raise ControllerConfigurationError('rotation axis must be a unit vector')

    @classmethod
    def hover(cls, position, duration):
        return cls(p_start=position, p_end=position, rot_axis=(0.0, 0.0, 1.0), rot_angle=0.0, duration=duration)

    def position_coeffs(self):
        return np.stack([septic_coeffs(a, b, self.duration) for a, b in zip(self.p_start, self.p_end)])

    def angle_coeffs(self):
        return septic_coeffs(0.0, self.rot_angle, self.duration)


@dataclass(frozen=True)
class ReferencePoint:
    """Reference signals at one instant, or a stack of instants along the leading axis."""

    p_r: np.ndarray
    v_r: np.ndarray
    a_r: np.ndarray
    R_r: np.ndarray
    w_r: np.ndarray
    w_dot_r: np.ndarray

    def __getitem__(self, index):
        return ReferencePoint(
            p_r=self.p_r[index], v_r=self.v_r[index], a_r=self.a_r[index],
            R_r=self.R_r[index], w_r=self.w_r[index], w_dot_r=self.w_dot_r[index],
        )

    def __len__(self):
        return self.p_r.shape[0]

    def expand(self):
        """Insert a broadcast axis after the leading time axis."""
        return ReferencePoint(
            p_r=self.p_r[:, None], v_r=self.v_r[:, None], a_r=self.a_r[:, None],
            R_r=self.R_r[:, None], w_r=self.w_r[:, None], w_dot_r=self.w_dot_r[:, None],
        )


def reference_at(spec, t):
    """Reference at time ``t`` (scalar or array); times outside the maneuver are clamped."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, spec.duration)
    pos = spec.position_coeffs()
    ang = spec.angle_coeffs()

    def channels(order):
        return np.stack([evaluate(c, t, order) for c in pos], axis=-1)

    theta = evaluate(ang, t)
    axis = spec.rot_axis
    return ReferencePoint(
        p_r=channels(0),
        v_r=channels(1),
        a_r=channels(2),
        R_r=expm_so3(np.multiply.outer(theta, axis)),
        w_r=np.multiply.outer(evaluate(ang, t, 1), axis),
        w_dot_r=np.multiply.outer(evaluate(ang, t, 2), axis),
    )


def reference_window(spec, t0, steps, dt):
    """References at ``t0 + k dt`` for ``k = 0 .. steps - 1``, stacked along axis 0."""
    return reference_at(spec, t0 + dt * np.arange(steps))
