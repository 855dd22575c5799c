"""
Asymmetric first-order motor model.

Each motor tracks its command with time constant ``tau_rise`` while the
command is at or above the current output and ``tau_fall`` otherwise.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import MotorConfigurationError

DISCRETIZATIONS = ('euler', 'exact')


@dataclass(frozen=True)
class MotorParams:
    """Rise and fall time constants (s); scalars or one entry per motor."""

    tau_rise: np.ndarray
    tau_fall: np.ndarray

    def __post_init__(self):
        tau_rise = np.asarray(self.tau_rise, dtype=float)
        tau_fall = np.asarray(self.tau_fall, dtype=float)
        if np.any(~(tau_rise > 0)) or np.any(~(tau_fall > 0)):
            raise MotorConfigurationError('time constants must be positive')
        object.__setattr__(self, 'tau_rise', tau_rise)
        object.__setattr__(self, 'tau_fall', tau_fall)

    @property
    def tau_min(self):
        return float(min(np.min(self.tau_rise), np.min(self.tau_fall)))

    @property
    def tau_max(self):
        return float(max(np.max(self.tau_rise), np.max(self.tau_fall)))

    def gains(self, dt, mode='euler'):
        """Per-step blend factors ``(rise, fall)`` for the chosen discretisation."""
        if mode == 'euler':
            return dt / self.tau_rise, dt / self.tau_fall
        if mode == 'exact':
            return -np.expm1(-dt / self.tau_rise), -np.expm1(-dt / self.tau_fall)
        raise MotorConfigurationError('unknown motor discretisation', mode=mode)


def check_step(params, dt):
    if not dt > 0:
        raise MotorConfigurationError('time step must be positive', dt=dt)
    if dt > params.tau_min:
        raise MotorConfigurationError(
            'time step exceeds the fastest motor time constant', dt=dt, tau_min=params.tau_min
        )


def rising_mask(u_act_prev, u_cmd):
    """True where the rise constant applies (ties count as rising)."""
    return np.asarray(u_cmd) - np.asarray(u_act_prev) >= 0


def motor_step(u_act_prev, u_cmd, dt, params, mode='euler', rising=None):
    """One step of ``u_act += k (u_cmd - u_act)`` with ``k`` picked per motor.

    ``rising`` overrides the regime selection; the linearisation uses it to
    freeze the switch at its nominal value.
    """
    check_step(params, dt)
    u_act_prev = np.asarray(u_act_prev, dtype=float)
    error = np.asarray(u_cmd, dtype=float) - u_act_prev
    if rising is None:
        rising = error >= 0
    k_rise, k_fall = params.gains(dt, mode)
    return u_act_prev + np.where(rising, k_rise, k_fall) * error


class MotorBank:
    """Actual motor outputs (N) advanced by :func:`motor_step`."""

    def __init__(self, u_act, params, dt, mode='euler'):
        check_step(params, dt)
        self.u_act = np.array(u_act, dtype=float)
        self.params = params
        self.dt = dt
        self.mode = mode

    def step(self, u_cmd):
        self.u_act = motor_step(self.u_act, u_cmd, self.dt, self.params, self.mode)
        return self.u_act


def settling_time(params, dt, direction='rise', fraction=0.95, mode='euler', max_steps=1_000_000):
    """Time (s) for a unit step to cover ``fraction`` of its way to the command."""
    if direction == 'rise':
        bank, command = MotorBank(np.zeros(1), params, dt, mode), np.ones(1)
    elif direction == 'fall':
        bank, command = MotorBank(np.ones(1), params, dt, mode), np.zeros(1)
    else:
        raise MotorConfigurationError('direction must be rise or fall', direction=direction)
    remaining = 1.0 - fraction
    for step in range(1, max_steps + 1):
        if abs(command[0] - bank.step(command)[0]) <= remaining:
            return step * dt
    raise MotorConfigurationError('step response did not settle', max_steps=max_steps)
