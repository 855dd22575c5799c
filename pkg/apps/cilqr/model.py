"""
The closed-loop step map shared by the simulator and the optimizer.

One step: controller wrench -> nominal allocation -> nullspace shift ->
motor lag -> rigid-body integration. Every method broadcasts over leading
batch axes so the linearisation can push many perturbed states through a
single call.

The optimizer works in a 23-dimensional tangent space
``[p, v, theta, w, u_act, e_p_I]`` where ``theta`` perturbs the rotation on
the right, ``R expm(hat(theta))``.
"""

from dataclasses import dataclass

import numpy as np

from apps.allocation.geometry import AllocationMatrix, apply_nullspace, nominal_allocation
from apps.controller.control import ControllerGains, ControllerState, attitude_control, position_control
from apps.dynamics.so3 import expm_so3, log_so3
from apps.dynamics.state import VehicleParams, VehicleState, integrate
from apps.motors.model import MotorParams, motor_step

TANGENT_DIM = 23
INPUT_DIM = 2
P_SLICE = slice(0, 3)
V_SLICE = slice(3, 6)
ROT_SLICE = slice(6, 9)
W_SLICE = slice(9, 12)
U_SLICE = slice(12, 20)
I_SLICE = slice(20, 23)


@dataclass(frozen=True)
class PredictionState:
    """Vehicle state, actual motor thrusts (N) and controller integral."""

    vehicle: VehicleState
    u_act: np.ndarray
    ctrl: ControllerState

    def __getitem__(self, index):
        v = self.vehicle
        return PredictionState(
            vehicle=VehicleState(p=v.p[index], v=v.v[index], R=v.R[index], w=v.w[index]),
            u_act=self.u_act[index],
            ctrl=ControllerState(e_p_I=self.ctrl.e_p_I[index]),
        )

    def expand(self):
        """Insert a broadcast axis after the leading axis."""
        return self[:, None]

    def is_finite(self):
        return self.vehicle.is_finite() and bool(np.all(np.isfinite(self.u_act)))


def stack_states(states):
    return PredictionState(
        vehicle=VehicleState(
            p=np.stack([s.vehicle.p for s in states]),
            v=np.stack([s.vehicle.v for s in states]),
            R=np.stack([s.vehicle.R for s in states]),
            w=np.stack([s.vehicle.w for s in states]),
        ),
        u_act=np.stack([s.u_act for s in states]),
        ctrl=ControllerState(e_p_I=np.stack([s.ctrl.e_p_I for s in states])),
    )


def retract(state, delta):
    """``state (+) delta`` for a tangent vector (or a stack of them)."""
    delta = np.asarray(delta, dtype=float)
    v = state.vehicle
    return PredictionState(
        vehicle=VehicleState(
            p=v.p + delta[..., P_SLICE],
            v=v.v + delta[..., V_SLICE],
            R=v.R @ expm_so3(delta[..., ROT_SLICE]),
            w=v.w + delta[..., W_SLICE],
        ),
        u_act=state.u_act + delta[..., U_SLICE],
        ctrl=ControllerState(e_p_I=state.ctrl.e_p_I + delta[..., I_SLICE]),
    )


def difference(state, nominal):
    """Tangent vector ``state (-) nominal``."""
    a, b = state.vehicle, nominal.vehicle
    return np.concatenate(
        [
            a.p - b.p,
            a.v - b.v,
            log_so3(np.swapaxes(b.R, -1, -2) @ a.R),
            a.w - b.w,
            state.u_act - nominal.u_act,
            state.ctrl.e_p_I - nominal.ctrl.e_p_I,
        ],
        axis=-1,
    )


@dataclass(frozen=True)
class StepRecord:
    f_w_star: np.ndarray
    tau_b_star: np.ndarray
    u_0: np.ndarray
    u_cmd: np.ndarray
    u_act: np.ndarray


@dataclass(frozen=True)
class ClosedLoopModel:
    vehicle: VehicleParams
    alloc: AllocationMatrix
    motor: MotorParams
    gains: ControllerGains
    dt: float
    allocation_mode: str = 'split'
    motor_mode: str = 'euler'
    flip_attitude_error_sign: bool = True

    def command(self, state, ref):
        """Controller wrench and nominal thrusts for ``state``.

        Returns ``(u_0, ctrl, f_w_star, tau_b_star)`` where ``ctrl`` carries
        the already-updated position integral.
        """
        vehicle = state.vehicle
        f_w_star, ctrl = position_control(ref, vehicle, self.gains, state.ctrl, self.dt, self.vehicle)
        tau_b_star = attitude_control(ref, vehicle, self.gains, self.vehicle, self.flip_attitude_error_sign)
        f_b_star = np.einsum('...ji,...j->...i', vehicle.R, f_w_star)
        u_0 = nominal_allocation(self.alloc, f_b_star, tau_b_star, self.allocation_mode)
        return u_0, ctrl, f_w_star, tau_b_star

    def advance(self, state, ctrl, u_cmd, rising=None):
        """Motor lag and rigid-body integration for a given command."""
        u_act = motor_step(state.u_act, u_cmd, self.dt, self.motor, self.motor_mode, rising)
        wrench = self.alloc.wrench(u_act)
        vehicle = integrate(state.vehicle, wrench[..., :3], wrench[..., 3:], self.vehicle, self.dt)
        return PredictionState(vehicle=vehicle, u_act=u_act, ctrl=ctrl)

    def step(self, state, X, ref, rising=None):
        u_0, ctrl, f_w_star, tau_b_star = self.command(state, ref)
        u_cmd = apply_nullspace(u_0, self.alloc, X)
        nxt = self.advance(state, ctrl, u_cmd, rising)
        return nxt, StepRecord(f_w_star=f_w_star, tau_b_star=tau_b_star, u_0=u_0, u_cmd=u_cmd, u_act=nxt.u_act)

    def initial_state(self, vehicle, u_act):
        return PredictionState(vehicle=vehicle, u_act=np.asarray(u_act, dtype=float), ctrl=ControllerState.initial())
