"""
Motor-bounds nullspace optimisation (MBNO).

Picks the nullspace shift ``X`` minimising ``1/2 X^T X + (n_A^T u_0)^T X``
subject to ``u_min <= u_0 + n_A X <= u_max``. With two unknowns and sixteen
half-planes the optimum is either the unconstrained point, the projection
onto one active bound, or the intersection of two active bounds, so all
candidates are enumerated and the cheapest feasible one is returned.
"""

import logging
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from .exceptions import InfeasibleAllocationError
from .geometry import apply_nullspace

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-10
_PAIRS = np.array(list(combinations(range(16), 2)))


def bound_constraints(u_0, alloc, u_min, u_max):
    """Half-planes ``G X <= h`` equivalent to the motor bounds."""
    n_A = alloc.n_A
    G = np.vstack([n_A, -n_A])
    h = np.concatenate([np.asarray(u_max, dtype=float) - u_0, u_0 - np.asarray(u_min, dtype=float)])
    return G, h


def mbno_objective(X, u_0, alloc):
    X = np.asarray(X, dtype=float)
    q = alloc.n_A.T @ u_0
    return 0.5 * np.sum(X * X, axis=-1) + X @ q


def bound_violation(u_cmd, u_min, u_max):
    """Largest elementwise excursion outside ``[u_min, u_max]`` (0 when inside)."""
    u_cmd = np.asarray(u_cmd, dtype=float)
    excess = np.maximum(u_cmd - u_max, u_min - u_cmd)
    return float(max(np.max(excess), 0.0))


def _candidates(G, h, q):
    unconstrained = -q[None, :]

    norms = np.sum(G * G, axis=1)
    usable = norms > 1e-14
    Gs, hs, ns = G[usable], h[usable], norms[usable]
    singles = -q[None, :] + Gs * ((hs + Gs @ q) / ns)[:, None]

    Gi, Gj = G[_PAIRS[:, 0]], G[_PAIRS[:, 1]]
    det = Gi[:, 0] * Gj[:, 1] - Gi[:, 1] * Gj[:, 0]
    regular = np.abs(det) > 1e-12
    hi, hj = h[_PAIRS[regular, 0]], h[_PAIRS[regular, 1]]
    Gi, Gj, det = Gi[regular], Gj[regular], det[regular]
    pairs = np.stack([(hi * Gj[:, 1] - hj * Gi[:, 1]) / det, (Gi[:, 0] * hj - Gj[:, 0] * hi) / det], axis=1)

    return np.vstack([unconstrained, singles, pairs])


def least_violation_shift(G, h):
    """Shift minimising the largest constraint violation, and that violation.

    Solves ``min t  s.t.  G X - t <= h`` as a linear program.
    """
    A_ub = np.hstack([G, -np.ones((G.shape[0], 1))])
    result = linprog(
        c=np.array([0.0, 0.0, 1.0]),
        A_ub=A_ub,
        b_ub=h,
        bounds=[(None, None)] * 3,
        method='highs',
    )
    if not result.success:
        return np.zeros(2), float(np.max(-h, initial=0.0))
    return result.x[:2], float(result.x[2])


def feasible_center(u_0, alloc, u_min, u_max):
    """Nullspace shift with the largest minimum slack to every motor bound."""
    G, h = bound_constraints(u_0, alloc, u_min, u_max)
    X, t = least_violation_shift(G, h)
    return X, -t


def _pull_inside(X, G, h, inside):
    """Nudge ``X`` toward the interior until ``inside(X)`` holds in floating point."""
    if inside(X):
        return X
    center, _ = least_violation_shift(G, h)
    step = 1e-15
    while step < 1.0:
        candidate = center + (1.0 - step) * (X - center)
        if inside(candidate):
            return candidate
        step *= 10.0
    return center


def mbno_solve(u_0, alloc, u_min, u_max):
    """Exact MBNO solution by active-set enumeration.

    Raises :class:`InfeasibleAllocationError` carrying the least-violation
    shift when no shift satisfies the bounds.
    """
    u_0 = np.asarray(u_0, dtype=float)
    G, h = bound_constraints(u_0, alloc, u_min, u_max)
    q = alloc.n_A.T @ u_0
    u_min = np.asarray(u_min, dtype=float)
    u_max = np.asarray(u_max, dtype=float)

    def inside(X):
        u_cmd = apply_nullspace(u_0, alloc, X)
        return bool(np.all(u_cmd >= u_min) and np.all(u_cmd <= u_max))

    candidates = _candidates(G, h, q)
    slack_scale = FEASIBILITY_TOL * max(1.0, float(np.max(np.abs(h))))
    feasible = np.all(candidates @ G.T <= h + slack_scale, axis=1)
    if not np.any(feasible):
        X_diag, violation = least_violation_shift(G, h)
        if violation <= 0.0:
            # Degenerate feasible set (a single point or segment) missed by enumeration.
            return _pull_inside(X_diag, G, h, inside)
        logger.debug('MBNO infeasible: least max violation %.3g N', violation)
        raise InfeasibleAllocationError(x_diagnostic=X_diag, max_violation=violation)

    feasible_points = candidates[feasible]
    objective = 0.5 * np.sum(feasible_points ** 2, axis=1) + feasible_points @ q
    best = feasible_points[np.argmin(objective)]
    return _pull_inside(best, G, h, inside)


class MbnoAllocator:
    """Stateless per-step allocator wrapping :func:`mbno_solve`."""

    name = 'mbno'

    def __init__(self, alloc, u_min, u_max):
        self.alloc = alloc
        self.u_min = np.asarray(u_min, dtype=float)
        self.u_max = np.asarray(u_max, dtype=float)

    def solve(self, u_0):
        return mbno_solve(u_0, self.alloc, self.u_min, self.u_max)
