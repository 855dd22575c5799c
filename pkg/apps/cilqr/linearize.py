"""
Central finite-difference Jacobians of the closed-loop step map.

All ``h`` steps and all ``2 (23 + 2)`` perturbations are evaluated in one
batched call; the motor regime is frozen at the nominal rollout's choice.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError
from .model import INPUT_DIM, TANGENT_DIM, difference, retract

logger = logging.getLogger(__name__)

FD_STEP = 1e-5


@dataclass(frozen=True)
class Linearization:
    """Per-step Jacobians.

    A: (h, 23, 23) d x_{k+1} / d x_k
    B: (h, 23, 2)  d x_{k+1} / d X_k
    U0_x: (h, 8, 23) d u_0,k / d x_k (nominal thrusts before the shift)
    """

    A: np.ndarray
    B: np.ndarray
    U0_x: np.ndarray


def linearize(result, refs, model, step=FD_STEP):
    """Jacobians around a :class:`RolloutResult` whose inputs were ``result.X_seq``."""
    horizon = result.horizon
    n = TANGENT_DIM + INPUT_DIM
    directions = np.vstack([np.eye(n), -np.eye(n)]) * step

    nominal = result.states[:-1].expand()
    following = result.states[1:].expand()
    perturbed = retract(nominal, directions[:, :TANGENT_DIM])
    X = result.X_seq[:, None, :] + directions[:, TANGENT_DIM:]
    rising = result.rising()[:, None, :]

    nxt, record = model.step(perturbed, X, refs.expand(), rising=rising)
    out = difference(nxt, following)
    jac = (out[:, :n] - out[:, n:]) / (2.0 * step)
    u0_jac = (record.u_0[:, :n] - record.u_0[:, n:]) / (2.0 * step)

    jac = np.swapaxes(jac, -1, -2)
    u0_jac = np.swapaxes(u0_jac, -1, -2)

    bad = ~np.all(np.isfinite(jac), axis=(1, 2)) | ~np.all(np.isfinite(u0_jac), axis=(1, 2))
    if np.any(bad):
        index = int(np.flatnonzero(bad)[0])
        logger.error('Non-finite Jacobian at prediction step %d', index)
        raise NumericalError(step_index=index)

    return Linearization(A=jac[..., :TANGENT_DIM], B=jac[..., TANGENT_DIM:], U0_x=u0_jac[..., :TANGENT_DIM])
