"""
Rigid-body state, vehicle parameters and the body-wrench integrator.

State arrays may carry leading batch axes; ``accelerations`` and
``integrate`` broadcast over them.
"""

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .exceptions import InvalidArgumentError, ParameterError
from .so3 import expm_so3, orthonormality_error

E3 = np.array([0.0, 0.0, 1.0])
STANDARD_GRAVITY = 9.81


@dataclass(frozen=True)
class VehicleState:
    """Position (m), velocity (m/s), body-to-world rotation, body angular velocity (rad/s)."""

    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ('p', 'v', 'R', 'w'):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 0.0), R=None):
        return cls(
            p=np.array(position, dtype=float),
            v=np.zeros(3),
            R=np.eye(3) if R is None else np.array(R, dtype=float),
            w=np.zeros(3),
        )

    def replace(self, **changes):
        return replace(self, **changes)

    def orthonormality_error(self):
        return orthonormality_error(self.R)

    def is_finite(self):
        return bool(
            np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.v))
            and np.all(np.isfinite(self.R)) and np.all(np.isfinite(self.w))
        )


@dataclass(frozen=True)
class VehicleParams:
    """Mass (kg), inertia matrix (kg m^2) and gravitational acceleration (m/s^2)."""

    m_R: float
    J_b: np.ndarray
    g: float = STANDARD_GRAVITY

    def __post_init__(self):
        J = np.asarray(self.J_b, dtype=float)
        if J.shape == (3,):
            J = np.diag(J)
        object.__setattr__(self, 'J_b', J)
        if not self.m_R > 0:
            raise ParameterError('mass must be positive', m_R=self.m_R)
        if J.shape != (3, 3):
            raise ParameterError('inertia must be 3x3', shape=J.shape)
        if np.max(np.abs(J - J.T)) > 1e-12:
            raise ParameterError('inertia must be symmetric')
        if np.min(np.linalg.eigvalsh(J)) <= 0:
            raise ParameterError('inertia must be positive definite')

    @cached_property
    def J_inv(self):
        return np.linalg.inv(self.J_b)

    @property
    def weight(self):
        return self.m_R * self.g


def accelerations(state, f_B, tau_B, params):
    """Translational and angular accelerations under a body-frame wrench.

    ``v_dot = (m g (-e3) + R f_B) / m`` and ``w_dot = J^-1 (tau_B - w x J w)``.
    """
    f_B = np.asarray(f_B, dtype=float)
    tau_B = np.asarray(tau_B, dtype=float)
    R, w = state.R, state.w
    thrust_world = np.einsum('...ij,...j->...i', R, f_B)
    v_dot = thrust_world / params.m_R - params.g * E3
    Jw = w @ params.J_b.T
    w_dot = (tau_B - np.cross(w, Jw)) @ params.J_inv.T
    return v_dot, w_dot


def integrate(state, f_B, tau_B, params, dt):
    """Advance one step: semi-implicit Euler on v and w, exponential map on R.

    Position uses the mean of the old and new velocity, which is exact for a
    constant acceleration. The rotation is updated with the new body rate,
    ``R <- R expm(hat(w_new dt))``, so it stays on SO(3).
    """
    if not dt > 0:
        raise InvalidArgumentError('time step must be positive', dt=dt)
    v_dot, w_dot = accelerations(state, f_B, tau_B, params)
    v_new = state.v + dt * v_dot
    w_new = state.w + dt * w_dot
    p_new = state.p + 0.5 * dt * (state.v + v_new)
    R_new = state.R @ expm_so3(w_new * dt)
    return VehicleState(p=p_new, v=v_new, R=R_new, w=w_new)


def mechanical_energy(state, params):
    """Kinetic plus potential energy (J), potential measured from z = 0."""
    kinetic = 0.5 * params.m_R * np.sum(state.v * state.v, axis=-1)
    rotational = 0.5 * np.sum(state.w * (state.w @ params.J_b.T), axis=-1)
    potential = params.m_R * params.g * state.p[..., 2]
    return kinetic + rotational + potential
