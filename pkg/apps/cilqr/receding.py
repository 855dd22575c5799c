"""Receding-horizon schedule around :func:`al_ilqr_solve`."""

import logging
import math

import numpy as np

from apps.controller.trajectory import reference_window

from .exceptions import OcpConfigurationError
from .model import INPUT_DIM
from .solver import al_ilqr_solve

logger = logging.getLogger(__name__)


def horizon_from_constants(tau_rise, tau_fall, dt, multiplier=4):
    """Prediction horizon covering ``multiplier`` of the slower motor time constant."""
    if not (tau_rise > 0 and tau_fall > 0 and dt > 0 and multiplier > 0):
        raise OcpConfigurationError('time constants, dt and multiplier must be positive')
    # 1e-9 absorbs representation error, e.g. 4 * 0.15 / 0.002 = 300.00000000000006
    return max(1, int(math.ceil(multiplier * max(tau_rise, tau_fall) / dt - 1e-9)))


def warm_start(previous_X, cfg, rng):
    """Previous shift replicated over the window, plus seeded Gaussian exploration."""
    X_init = np.tile(np.asarray(previous_X, dtype=float), (cfg.h, 1))
    if cfg.warm_start_sigma > 0:
        X_init = X_init + rng.normal(scale=cfg.warm_start_sigma, size=(cfg.h, INPUT_DIM))
    return X_init


def receding_step(model, state, t, previous_X, cfg, trajectory, rng):
    """Plan from ``state`` at clock ``t``.

    Returns ``(X_apply, solution, next_previous)``: the first ``h_c`` shifts,
    the full :class:`OcpSolution` and the shift to warm start the next cycle
    from (``X*_{h_c}``, or the last entry when ``h_c == h``).
    """
    refs = reference_window(trajectory, t, cfg.h, cfg.dt)
    solution = al_ilqr_solve(state, refs, warm_start(previous_X, cfg, rng), cfg, model)
    next_previous = solution.X_seq[min(cfg.h_c, cfg.h - 1)].copy()
    return solution.X_seq[: cfg.h_c].copy(), solution, next_previous


class RecedingHorizonAllocator:
    """Stateful wrapper: owns the seeded generator and the warm-start shift."""

    name = 'receding_horizon'

    def __init__(self, model, cfg, trajectory, initial_X=(0.0, 0.0)):
        self.model = model
        self.cfg = cfg
        self.trajectory = trajectory
        self.rng = np.random.default_rng(cfg.rng_seed)
        self.previous_X = np.asarray(initial_X, dtype=float).copy()
        self.cycles = 0

    def plan(self, state, t):
        X_apply, solution, next_previous = receding_step(
            self.model, state, t, self.previous_X, self.cfg, self.trajectory, self.rng
        )
        self.cycles += 1
        self.previous_X = next_previous
        logger.debug(
            'Cycle %d at t=%.3f: cost=%.4g violation=%.2g outer=%d inner=%d converged=%s',
            self.cycles, t, solution.cost, solution.max_violation,
            solution.outer_iterations, solution.inner_iterations, solution.converged,
        )
        return X_apply, solution

    def hold(self, X):
        """Warm start the next cycle from ``X`` (used after a fallback cycle)."""
        self.previous_X = np.asarray(X, dtype=float).copy()
