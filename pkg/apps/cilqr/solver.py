"""
Augmented-Lagrangian iLQR over the nullspace shifts ``X_0 .. X_{h-1}``.

Stage cost: ``(u_act,k - u_act,k-1)^T R (u_act,k - u_act,k-1)``, no terminal
cost. Inequalities: ``u_min <= u_cmd,k <= u_max`` for every step, handled by
multipliers updated in an outer loop. The inner loop is Gauss-Newton iLQR:
Jacobians come from :func:`linearize`, the backward pass is regularised on
``Q_XX`` and the forward pass runs the closed loop with the new feedback
policy under an Armijo backtracking line search.
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import OcpConfigurationError, SolverFailureError
from .linearize import linearize
from .model import INPUT_DIM, TANGENT_DIM, U_SLICE
from .rollout import rollout, rollout_steps

logger = logging.getLogger(__name__)

DoubleMatrix = npt.NDArray[np.float64]

LINE_SEARCH_STEPS = tuple(2.0 ** -i for i in range(11))


@dataclass(frozen=True)
class OcpConfig:
    h: int
    h_c: int
    R_delta_u: DoubleMatrix
    u_max: DoubleMatrix
    dt: float
    u_min: DoubleMatrix = field(default_factory=lambda: np.zeros(8))
    max_outer_iters: int = 5
    max_inner_iters: int = 50
    penalty_init: float = 10.0
    penalty_scale: float = 10.0
    constraint_tol: float = 1e-6  # [N]
    cost_tol: float = 1e-8  # relative
    gradient_tol: float = 1e-9
    warm_start_sigma: float = 1e-3
    rng_seed: int = 0
    regularization_init: float = 1e-6
    regularization_max: float = 1e4
    armijo: float = 1e-4

    def __post_init__(self):
        R = np.asarray(self.R_delta_u, dtype=float)
        if R.ndim == 0:
            R = R * np.eye(8)
        object.__setattr__(self, 'R_delta_u', R)
        object.__setattr__(self, 'u_max', np.broadcast_to(np.asarray(self.u_max, dtype=float), (8,)).copy())
        object.__setattr__(self, 'u_min', np.broadcast_to(np.asarray(self.u_min, dtype=float), (8,)).copy())

        if not 0 < self.h_c <= self.h:
            raise OcpConfigurationError('control horizon must satisfy 0 < h_c <= h', h=self.h, h_c=self.h_c)
        if R.shape != (8, 8) or not np.allclose(R, R.T) or np.min(np.linalg.eigvalsh(R)) <= 0:
            raise OcpConfigurationError('R_delta_u must be symmetric positive definite')
        if np.any(self.u_min > self.u_max):
            raise OcpConfigurationError('u_min must not exceed u_max')
        if not self.penalty_scale > 1:
            raise OcpConfigurationError('penalty_scale must exceed 1', penalty_scale=self.penalty_scale)
        if not (self.penalty_init > 0 and self.constraint_tol > 0 and self.cost_tol > 0 and self.gradient_tol > 0):
            raise OcpConfigurationError('penalty and tolerances must be positive')
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise OcpConfigurationError('iteration limits must be at least 1')
        if self.warm_start_sigma < 0:
            raise OcpConfigurationError('warm_start_sigma cannot be negative')


@dataclass(frozen=True)
class OcpSolution:
    X_seq: DoubleMatrix
    u_0_seq: DoubleMatrix
    u_cmd_seq: DoubleMatrix
    u_act_seq: DoubleMatrix
    cost: float
    augmented_cost: float
    max_violation: float
    outer_iterations: int
    inner_iterations: int
    converged: bool
    cost_history: List[List[float]]
    violation_history: List[float]
    multipliers: DoubleMatrix


def constraint_values(u_cmd_seq, cfg):
    """``c <= 0`` form of the motor bounds, shape (h, 16)."""
    return np.concatenate([u_cmd_seq - cfg.u_max, cfg.u_min - u_cmd_seq], axis=-1)


def max_violation(u_cmd_seq, cfg):
    return float(max(np.max(constraint_values(u_cmd_seq, cfg)), 0.0))


def _penalty_mask(c, lam):
    return ((c > 0) | (lam > 0)).astype(float)


def augmented_cost(result, lam, mu, cfg):
    c = constraint_values(result.u_cmd_seq, cfg)
    mask = _penalty_mask(c, lam)
    return result.cost + float(np.sum(lam * c) + 0.5 * mu * np.sum(mask * c * c))


def _cost_derivatives(result, lin, lam, mu, cfg, n_A):
    """Gauss-Newton expansion of the augmented stage cost at every step."""
    W2 = 2.0 * cfg.R_delta_u
    D_x = lin.A[:, U_SLICE, :].copy()
    D_x[:, :, U_SLICE] -= np.eye(8)
    D_X = lin.B[:, U_SLICE, :]
    delta = result.delta_u

    c = constraint_values(result.u_cmd_seq, cfg)
    mask = _penalty_mask(c, lam)
    C_x = np.concatenate([lin.U0_x, -lin.U0_x], axis=1)
    C_X = np.vstack([n_A, -n_A])
    weight = lam + mu * mask * c

    l_x = np.einsum('kij,jl,kl->ki', np.swapaxes(D_x, 1, 2), W2, delta) + np.einsum('kji,kj->ki', C_x, weight)
    l_X = np.einsum('kij,jl,kl->ki', np.swapaxes(D_X, 1, 2), W2, delta) + weight @ C_X
    l_xx = np.einsum('kji,jl,klm->kim', D_x, W2, D_x) + mu * np.einsum('kji,kj,kjm->kim', C_x, mask, C_x)
    l_XX = np.einsum('kji,jl,klm->kim', D_X, W2, D_X) + mu * np.einsum('ji,kj,jm->kim', C_X, mask, C_X)
    l_Xx = np.einsum('kji,jl,klm->kim', D_X, W2, D_x) + mu * np.einsum('ji,kj,kjm->kim', C_X, mask, C_x)
    return l_x, l_X, l_xx, l_XX, l_Xx


def _backward_pass(lin, derivs, rho):
    """Riccati recursion; ``None`` when ``Q_XX + rho I`` is not positive definite.

    Returns ``(K, d, linear_gain, quadratic_gain, gradient)`` where
    ``gradient`` is the largest ``|Q_X|`` entry over the window.
    """
    l_x, l_X, l_xx, l_XX, l_Xx = derivs
    horizon = lin.A.shape[0]
    K = np.empty((horizon, INPUT_DIM, TANGENT_DIM))
    d = np.empty((horizon, INPUT_DIM))
    V_x = np.zeros(TANGENT_DIM)
    V_xx = np.zeros((TANGENT_DIM, TANGENT_DIM))
    linear_gain = 0.0
    quadratic_gain = 0.0
    gradient = 0.0
    reg = rho * np.eye(INPUT_DIM)

    for k in range(horizon - 1, -1, -1):
        A, B = lin.A[k], lin.B[k]
        VA, VB = V_xx @ A, V_xx @ B
        Q_x = l_x[k] + A.T @ V_x
        Q_X = l_X[k] + B.T @ V_x
        Q_xx = l_xx[k] + A.T @ VA
        Q_XX = l_XX[k] + B.T @ VB
        Q_Xx = l_Xx[k] + B.T @ VA
        try:
            factor = cho_factor(Q_XX + reg)
        except LinAlgError:
            return None
        K[k] = -cho_solve(factor, Q_Xx)
        d[k] = -cho_solve(factor, Q_X)

        V_x = Q_x + K[k].T @ Q_XX @ d[k] + K[k].T @ Q_X + Q_Xx.T @ d[k]
        V_xx = Q_xx + K[k].T @ Q_XX @ K[k] + K[k].T @ Q_Xx + Q_Xx.T @ K[k]
        V_xx = 0.5 * (V_xx + V_xx.T)
        linear_gain += float(d[k] @ Q_X)
        quadratic_gain += 0.5 * float(d[k] @ Q_XX @ d[k])
        gradient = max(gradient, float(np.max(np.abs(Q_X))))

    return K, d, linear_gain, quadratic_gain, gradient


def _line_search(start, nominal, K, d, gains, refs, model, cfg, lam, mu, J):
    """First step length in :data:`LINE_SEARCH_STEPS` meeting the Armijo condition, else ``None``.

    The full step is tried alone; the shorter ones share one batched rollout.
    """
    linear_gain, quadratic_gain = gains
    for alphas in (LINE_SEARCH_STEPS[:1], LINE_SEARCH_STEPS[1:]):
        candidates = rollout_steps(start, nominal, d, K, alphas, refs, model, cfg.R_delta_u)
        for alpha, candidate in zip(alphas, candidates):
            if not candidate.states.is_finite():
                continue
            J_new = augmented_cost(candidate, lam, mu, cfg)
            expected = alpha * linear_gain + alpha * alpha * quadratic_gain
            if J_new <= J + cfg.armijo * expected:
                return candidate, J_new
    return None


def _solution(result, lam, mu, cfg, outer, inner, converged, cost_history, violation_history):
    return OcpSolution(
        X_seq=result.X_seq,
        u_0_seq=result.u_0_seq,
        u_cmd_seq=result.u_cmd_seq,
        u_act_seq=result.u_act_seq,
        cost=result.cost,
        augmented_cost=augmented_cost(result, lam, mu, cfg),
        max_violation=max_violation(result.u_cmd_seq, cfg),
        outer_iterations=outer,
        inner_iterations=inner,
        converged=converged,
        cost_history=cost_history,
        violation_history=violation_history,
        multipliers=lam.copy(),
    )


def al_ilqr_solve(start, refs, X_init, cfg, model):
    """Optimise the nullspace sequence from ``start`` against ``refs``.

    Returns an :class:`OcpSolution`. An inner loop is stationary when every
    ``|Q_X|`` is within ``gradient_tol`` or, at the base regularisation, the
    full step predicts a relative decrease within ``cost_tol``. ``converged``
    is set only when the final inner loop was stationary and the iterate meets
    ``constraint_tol``. A line search that collapses at ``regularization_max``
    ends the solve unconverged.
    """
    X_init = np.asarray(X_init, dtype=float)
    if X_init.shape != (cfg.h, INPUT_DIM):
        raise OcpConfigurationError('initial guess must have shape (h, 2)', shape=X_init.shape)
    weight = cfg.R_delta_u
    n_A = model.alloc.n_A

    nominal = rollout(start, X_init, refs, model, weight)
    lam = np.zeros((cfg.h, 2 * n_A.shape[0]))
    mu = cfg.penalty_init
    cost_history, violation_history = [], []
    total_inner = 0
    converged = False
    outer = 0

    for outer in range(1, cfg.max_outer_iters + 1):
        J = augmented_cost(nominal, lam, mu, cfg)
        history = [J]
        cost_history.append(history)
        rho = cfg.regularization_init
        stationary = stalled = False

        for _ in range(cfg.max_inner_iters):
            total_inner += 1
            lin = linearize(nominal, refs, model)
            derivs = _cost_derivatives(nominal, lin, lam, mu, cfg, n_A)

            backward = _backward_pass(lin, derivs, rho)
            while backward is None:
                rho *= 10.0
                if rho > cfg.regularization_max:
                    logger.debug('Backward pass indefinite at rho=%.1e', rho)
                    raise SolverFailureError(
                        best_solution=_solution(
                            nominal, lam, mu, cfg, outer, total_inner, False, cost_history, violation_history
                        ),
                        regularization=rho,
                    )
                backward = _backward_pass(lin, derivs, rho)
            K, d, linear_gain, quadratic_gain, gradient = backward

            predicted = -(linear_gain + quadratic_gain)
            at_base = rho <= cfg.regularization_init
            if gradient <= cfg.gradient_tol or (at_base and predicted <= cfg.cost_tol * max(abs(J), 1e-12)):
                stationary = True
                break

            accepted = _line_search(
                start, nominal, K, d, (linear_gain, quadratic_gain), refs, model, cfg, lam, mu, J
            )
            if accepted is None:
                rho *= 10.0
                if rho > cfg.regularization_max:
                    logger.debug('Line search stalled at rho=%.1e (outer %d, |Q_X|=%.3g)', rho, outer, gradient)
                    stalled = True
                    break
                continue

            nominal, J = accepted
            history.append(J)
            rho = max(rho / 10.0, cfg.regularization_init)

        c = constraint_values(nominal.u_cmd_seq, cfg)
        violation = float(max(np.max(c), 0.0))
        violation_history.append(violation)
        logger.debug(
            'Outer %d: cost=%.6g violation=%.3g mu=%.1e inner=%d', outer, nominal.cost, violation, mu, total_inner
        )
        if violation <= cfg.constraint_tol and stationary:
            converged = True
            break
        if stalled and violation <= cfg.constraint_tol:
            break
        lam = np.maximum(0.0, lam + mu * c)
        mu *= cfg.penalty_scale

    return _solution(nominal, lam, mu, cfg, outer, total_inner, converged, cost_history, violation_history)
