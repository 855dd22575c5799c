"""
Feedforward plus feedback wrench controller.

Position loop: saturated PID producing a world-frame force. Attitude loop:
PD on SO(3) plus the ``hat(J w) w`` term, producing a body torque.
"""

from dataclasses import dataclass

import numpy as np

from apps.dynamics.so3 import vee
from apps.dynamics.state import E3

from .exceptions import ControllerConfigurationError


def _as_gain(value):
    gain = np.asarray(value, dtype=float)
    if gain.ndim == 0:
        gain = gain * np.eye(3)
    elif gain.ndim == 1:
        gain = np.diag(gain)
    if gain.shape != (3, 3):
        raise ControllerConfigurationError('gain must be a scalar, 3-vector or 3x3 matrix', shape=gain.shape)
    return gain


@dataclass(frozen=True)
class ControllerGains:
    Kp_p: np.ndarray
    Kd_p: np.ndarray
    Ki_p: np.ndarray
    Kp_R: np.ndarray
    Kd_R: np.ndarray
    e_p_max: float
    e_v_max: float

    def __post_init__(self):
        for name in ('Kp_p', 'Kd_p', 'Ki_p', 'Kp_R', 'Kd_R'):
            object.__setattr__(self, name, _as_gain(getattr(self, name)))
        for name in ('Kp_p', 'Kd_p', 'Ki_p'):
            gain = getattr(self, name)
            if np.any(gain != np.diag(np.diag(gain))) or np.any(np.diag(gain) < 0):
                raise ControllerConfigurationError('position gains must be non-negative diagonals', gain=name)
        for name in ('Kp_R', 'Kd_R'):
            gain = getattr(self, name)
            if not np.allclose(gain, gain.T) or np.min(np.linalg.eigvalsh(gain)) <= 0:
                raise ControllerConfigurationError('attitude gains must be positive definite', gain=name)
        if not (self.e_p_max > 0 and self.e_v_max > 0):
            raise ControllerConfigurationError('saturation bounds must be positive')

    @classmethod
    def for_mass(cls, m_R, kp=16.0, kd=8.0, ki=1.0, kp_R=30.0, kd_R=8.0, e_p_max=0.5, e_v_max=1.0):
        """Position gains scaled by vehicle mass, attitude gains as given."""
        return cls(
            Kp_p=kp * m_R, Kd_p=kd * m_R, Ki_p=ki * m_R,
            Kp_R=kp_R, Kd_R=kd_R, e_p_max=e_p_max, e_v_max=e_v_max,
        )


@dataclass(frozen=True)
class ControllerState:
    """Integral of the saturated position error (m s)."""

    e_p_I: np.ndarray

    @classmethod
    def initial(cls):
        return cls(e_p_I=np.zeros(3))


def saturate(x, limit):
    """Component-wise clip to ``[-limit, limit]``."""
    return np.clip(x, -limit, limit)


def position_control(ref, state, gains, ctrl_state, dt, params):
    """Desired world-frame force and the updated integral state."""
    if not dt > 0:
        raise ControllerConfigurationError('time step must be positive', dt=dt)
    e_p = saturate(ref.p_r - state.p, gains.e_p_max)
    e_v = saturate(ref.v_r - state.v, gains.e_v_max)
    e_p_I = ctrl_state.e_p_I + e_p * dt
    f_w_star = (
        params.m_R * (ref.a_r + params.g * E3)
        + e_p @ gains.Kp_p.T
        + e_v @ gains.Kd_p.T
        + e_p_I @ gains.Ki_p.T
    )
    return f_w_star, ControllerState(e_p_I=e_p_I)


def attitude_error(R_ref, R_hat):
    """``1/2 (R_ref^T R_hat - R_hat^T R_ref)^vee``."""
    M = np.swapaxes(R_ref, -1, -2) @ R_hat
    return 0.5 * vee(M - np.swapaxes(M, -1, -2))


def attitude_control(ref, state, gains, params, flip_error_sign=True):
    """Desired body torque.

    ``attitude_error`` points from the reference toward the estimate, so with
    positive gains the proportional term is applied as ``-Kp_R e_R`` unless
    ``flip_error_sign`` is cleared.
    """
    e_R = attitude_error(ref.R_r, state.R)
    if flip_error_sign:
        e_R = -e_R
    e_w = ref.w_r - state.w
    Jw = state.w @ params.J_b.T
    return e_R @ gains.Kp_R.T + e_w @ gains.Kd_R.T + np.cross(Jw, state.w)
