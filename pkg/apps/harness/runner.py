"""
The single-rate closed-loop experiment.

Every step: reference, controller wrench, allocator, one motor step, one
rigid-body integration. The allocator is one of three strategies sharing the
``initial_shift`` / ``decide`` / ``counters`` interface.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from apps.allocation.exceptions import InfeasibleAllocationError
from apps.allocation.geometry import apply_nullspace
from apps.allocation.mbno import MbnoAllocator, feasible_center
from apps.cilqr.exceptions import NumericalError, SolverFailureError
from apps.cilqr.receding import RecedingHorizonAllocator
from apps.controller.trajectory import reference_at
from apps.dynamics.state import VehicleState

from .exceptions import FallbackBudgetExceeded, SimulationAbortedError
from .metrics import compute_metrics, geodesic_from_per_axis, orientation_error

logger = logging.getLogger(__name__)

COLUMN_GROUPS = (
    ('t', ('',)),
    ('p', ('x', 'y', 'z')),
    ('rotvec', ('x', 'y', 'z')),
    ('v', ('x', 'y', 'z')),
    ('w', ('x', 'y', 'z')),
    ('e_p', ('x', 'y', 'z')),
    ('e_xi', ('x', 'y', 'z')),
    ('u_cmd', tuple(str(i) for i in range(8))),
    ('u_act', tuple(str(i) for i in range(8))),
    ('X', ('0', '1')),
    ('solver_cost', ('',)),
    ('solver_max_violation', ('',)),
)


def _layout():
    columns, slices, start = [], {}, 0
    for group, suffixes in COLUMN_GROUPS:
        columns.extend(f'{group}_{s}' if s else group for s in suffixes)
        slices[group] = slice(start, start + len(suffixes))
        start += len(suffixes)
    return tuple(columns), slices


COLUMNS, COLUMN_SLICES = _layout()


@dataclass
class RunLog:
    """Per-step time series; ``data`` rows follow :data:`COLUMNS`."""

    data: np.ndarray
    geodesic: np.ndarray
    wrench_residual: np.ndarray
    request_error: np.ndarray
    clamped: np.ndarray

    @classmethod
    def empty(cls, steps):
        return cls(
            data=np.full((steps, len(COLUMNS)), np.nan),
            geodesic=np.zeros(steps),
            wrench_residual=np.zeros(steps),
            request_error=np.zeros(steps),
            clamped=np.zeros(steps, dtype=bool),
        )

    @classmethod
    def from_rows(cls, data):
        """Log rebuilt from a parsed CSV.

        The geodesic error is recovered from the per-axis columns; the wrench
        audits are not in the CSV and come back as NaN.
        """
        data = np.asarray(data, dtype=float).reshape(-1, len(COLUMNS))
        steps = data.shape[0]
        nan = np.full(steps, np.nan)
        return cls(
            data=data,
            geodesic=geodesic_from_per_axis(data[:, COLUMN_SLICES['e_xi']]),
            wrench_residual=nan,
            request_error=nan.copy(),
            clamped=np.zeros(steps, dtype=bool),
        )

    def __len__(self):
        return self.data.shape[0]

    def column_block(self, group):
        return self.data[:, COLUMN_SLICES[group]]

    def set_block(self, k, group, value):
        self.data[k, COLUMN_SLICES[group]] = value


@dataclass(frozen=True)
class Decision:
    u_cmd: np.ndarray
    X: np.ndarray
    clamped: bool = False
    solver_cost: float = np.nan
    solver_max_violation: float = np.nan


class PseudoinverseStrategy:
    name = 'pseudoinverse_only'

    def __init__(self, cfg, model):
        self.alloc = model.alloc

    def initial_shift(self, u_0):
        return np.zeros(self.alloc.n_A.shape[1])

    def decide(self, k, t, state, u_0):
        return Decision(u_cmd=np.array(u_0, dtype=float), X=np.full(self.alloc.n_A.shape[1], np.nan))

    def counters(self):
        return {'fallback_cycles': 0, 'solver_cycles': 0, 'clamped_steps': 0}


class MbnoStrategy:
    name = 'mbno'

    def __init__(self, cfg, model):
        self.alloc = model.alloc
        self.u_min = cfg.u_min
        self.u_max = cfg.u_max
        self.allocator = MbnoAllocator(model.alloc, cfg.u_min, cfg.u_max)
        self.clamped_steps = 0

    def initial_shift(self, u_0):
        try:
            return self.allocator.solve(u_0)
        except InfeasibleAllocationError as exc:
            return exc.x_diagnostic

    def decide(self, k, t, state, u_0):
        try:
            X = self.allocator.solve(u_0)
        except InfeasibleAllocationError as exc:
            self.clamped_steps += 1
            log = logger.warning if self.clamped_steps == 1 else logger.debug
            log(
                'MBNO infeasible at step %d: every nullspace shift leaves a motor %.3g N outside the '
                '[%.3g, %.3g] N thrust limits, so the requested wrench exceeds them; clamping to motor bounds',
                k, exc.max_violation, float(np.min(self.u_min)), float(np.max(self.u_max)),
            )
            u_cmd = np.clip(apply_nullspace(u_0, self.alloc, exc.x_diagnostic), self.u_min, self.u_max)
            return Decision(u_cmd=u_cmd, X=exc.x_diagnostic, clamped=True)
        return Decision(u_cmd=apply_nullspace(u_0, self.alloc, X), X=X)

    def counters(self):
        return {'fallback_cycles': 0, 'solver_cycles': 0, 'clamped_steps': self.clamped_steps}


class RecedingHorizonStrategy:
    """Re-plans every ``h_c`` steps; a failed cycle is served by per-step MBNO."""

    name = 'receding_horizon'

    def __init__(self, cfg, model):
        self.alloc = model.alloc
        self.ocp = cfg.ocp
        self.u_min = cfg.u_min
        self.u_max = cfg.u_max
        self.budget = cfg.max_fallback_cycles
        self.planner = RecedingHorizonAllocator(model, cfg.ocp, cfg.trajectory)
        self.fallback = MbnoStrategy(cfg, model)
        self.queue = None
        self.solution = None
        self.cursor = cfg.ocp.h_c
        self.solver_cycles = 0
        self.fallback_cycles = 0

    def initial_shift(self, u_0):
        X, _ = feasible_center(u_0, self.alloc, self.u_min, self.u_max)
        self.planner.hold(X)
        return X

    def _fall_back(self, t, reason):
        self.fallback_cycles += 1
        self.queue = None
        logger.warning('Receding-horizon cycle at t=%.3f s falls back to MBNO: %s', t, reason)
        if self.fallback_cycles > self.budget:
            raise FallbackBudgetExceeded(fallbacks=self.fallback_cycles, budget=self.budget)

    def _replan(self, t, state):
        self.cursor = 0
        self.solver_cycles += 1
        try:
            X_apply, solution = self.planner.plan(state, t)
        except (SolverFailureError, NumericalError) as exc:
            self._fall_back(t, str(exc))
            return
        if not solution.converged and solution.max_violation > self.ocp.constraint_tol:
            self._fall_back(t, f'not converged, max violation {solution.max_violation:.3g} N')
            return
        self.queue = X_apply
        self.solution = solution

    def decide(self, k, t, state, u_0):
        if self.cursor >= self.ocp.h_c:
            self._replan(t, state)
        index = self.cursor
        self.cursor += 1
        if self.queue is None:
            decision = self.fallback.decide(k, t, state, u_0)
            self.planner.hold(decision.X)
            return decision
        X = self.queue[index]
        return Decision(
            u_cmd=apply_nullspace(u_0, self.alloc, X),
            X=X,
            solver_cost=self.solution.cost,
            solver_max_violation=self.solution.max_violation,
        )

    def counters(self):
        return {
            'fallback_cycles': self.fallback_cycles,
            'solver_cycles': self.solver_cycles,
            'clamped_steps': self.fallback.clamped_steps,
        }


STRATEGIES = {
    'pseudoinverse_only': PseudoinverseStrategy,
    'mbno': MbnoStrategy,
    'receding_horizon': RecedingHorizonStrategy,
}


@dataclass(frozen=True)
class RunResult:
    allocator: str
    metrics: dict
    log: RunLog


def run_experiment(cfg):
    """Simulate ``cfg.steps`` closed-loop steps and collect metrics.

    Raises :class:`SimulationAbortedError` when the state turns non-finite
    and :class:`FallbackBudgetExceeded` when too many optimizer cycles fail.
    """
    model = cfg.closed_loop_model()
    alloc = model.alloc
    strategy = STRATEGIES[cfg.allocator](cfg, model)
    steps = cfg.steps
    times = cfg.dt * np.arange(steps)
    refs = reference_at(cfg.trajectory, times) if steps else None

    ref_0 = reference_at(cfg.trajectory, 0.0)
    vehicle = VehicleState.at_rest(cfg.trajectory.p_start, R=ref_0.R_r)
    resting = model.initial_state(vehicle, np.zeros(alloc.A.shape[1]))
    u_0 = model.command(resting, ref_0)[0]
    state = model.initial_state(vehicle, apply_nullspace(u_0, alloc, strategy.initial_shift(u_0)))

    log = RunLog.empty(steps)
    R_hat = np.empty((steps, 3, 3))
    started = time.perf_counter()
    logger.info('Run %s [%s]: %d steps of %.4f s', cfg.name, cfg.allocator, steps, cfg.dt)

    for k in range(steps):
        ref = refs[k]
        u_0, ctrl, f_w_star, tau_b_star = model.command(state, ref)
        decision = strategy.decide(k, times[k], state, u_0)
        following = model.advance(state, ctrl, decision.u_cmd)
        if not following.is_finite():
            logger.error('Non-finite state after step %d (t=%.4f s); aborting', k, times[k])
            raise SimulationAbortedError(step_index=k)

        vehicle = state.vehicle
        requested = np.concatenate([vehicle.R.T @ f_w_star, tau_b_star])
        allocated = alloc.wrench(u_0)
        log.wrench_residual[k] = np.max(np.abs(alloc.wrench(decision.u_cmd) - allocated))
        log.request_error[k] = np.max(np.abs(allocated - requested))
        log.clamped[k] = decision.clamped

        R_hat[k] = vehicle.R
        log.set_block(k, 't', times[k])
        log.set_block(k, 'p', vehicle.p)
        log.set_block(k, 'v', vehicle.v)
        log.set_block(k, 'w', vehicle.w)
        log.set_block(k, 'e_p', ref.p_r - vehicle.p)
        log.set_block(k, 'u_cmd', decision.u_cmd)
        log.set_block(k, 'u_act', following.u_act)
        log.set_block(k, 'X', decision.X)
        log.set_block(k, 'solver_cost', decision.solver_cost)
        log.set_block(k, 'solver_max_violation', decision.solver_max_violation)
        state = following

    if steps:
        per_axis, geodesic = orientation_error(refs.R_r, R_hat)
        log.data[:, COLUMN_SLICES['rotvec']] = Rotation.from_matrix(R_hat).as_rotvec()
        log.data[:, COLUMN_SLICES['e_xi']] = per_axis
        log.geodesic[:] = geodesic

    audited = ~log.clamped
    counters = strategy.counters()
    counters['max_wrench_residual'] = float(np.max(log.wrench_residual[audited], initial=0.0))
    counters['max_wrench_request_error'] = float(np.max(log.request_error, initial=0.0))
    metrics = compute_metrics(log, cfg.allocator, counters)
    if counters['clamped_steps']:
        logger.warning(
            'Run %s [%s]: %d of %d steps requested thrust beyond the motor limits and were clamped',
            cfg.name, cfg.allocator, counters['clamped_steps'], steps,
        )

    logger.info(
        'Run %s [%s] finished in %.1f s: mean pos %.4g m, total du %.4g N, fallbacks %d, clamps %d',
        cfg.name, cfg.allocator, time.perf_counter() - started, metrics['mean_pos_err'],
        metrics['total_delta_u'], counters['fallback_cycles'], counters['clamped_steps'],
    )
    return RunResult(allocator=cfg.allocator, metrics=metrics, log=log)
