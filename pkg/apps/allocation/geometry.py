"""
Rotor geometry, the 6x8 allocation matrix and its nullspace.

Column ``i`` of the allocation matrix maps the thrust of rotor ``i`` (N) to
the body wrench it produces: ``[u_i ; r_i x u_i + kappa_i u_i]``.
"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import GeometryError, GeometryRankError

logger = logging.getLogger(__name__)

ROTOR_COUNT = 8
WRENCH_DIM = 6
NULLSPACE_DIM = 2
ALLOCATION_MODES = ('split', 'full')

# Tetrahedron vertices s1..s4, each followed by its antipode.
CUBE_VERTICES = np.array(
    [
        [1.0, 1.0, 1.0],
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, 1.0],
        [-1.0, 1.0, -1.0],
        [1.0, -1.0, 1.0],
        [-1.0, -1.0, 1.0],
        [1.0, 1.0, -1.0],
    ]
)


@dataclass(frozen=True)
class RotorGeometry:
    """Per-rotor mounting data in the body frame.

    positions (m) and directions are (8, 3); kappa (m, signed) and f_max (N)
    are 8-vectors.
    """

    positions: np.ndarray
    directions: np.ndarray
    kappa: np.ndarray
    f_max: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=float)
        directions = np.asarray(self.directions, dtype=float)
        n = positions.shape[0]
        kappa = np.broadcast_to(np.asarray(self.kappa, dtype=float), (n,)).copy()
        f_max = np.broadcast_to(np.asarray(self.f_max, dtype=float), (n,)).copy()
        if positions.shape != (n, 3) or directions.shape != (n, 3):
            raise GeometryError('positions and directions must be (n, 3)')
        norms = np.linalg.norm(directions, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise GeometryError('thrust directions must be unit vectors', worst_norm=float(norms[np.argmax(np.abs(norms - 1.0))]))
        if np.any(f_max <= 0):
            raise GeometryError('maximum thrust must be positive')
        object.__setattr__(self, 'positions', positions)
        object.__setattr__(self, 'directions', directions)
        object.__setattr__(self, 'kappa', kappa)
        object.__setattr__(self, 'f_max', f_max)

    @property
    def rotor_count(self):
        return self.positions.shape[0]

    @classmethod
    def from_rotors(cls, positions, directions, kappa, f_max):
        """Build a geometry, normalising the thrust directions."""
        directions = np.asarray(directions, dtype=float)
        norms = np.linalg.norm(directions, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise GeometryError('thrust direction cannot be zero')
        return cls(positions=positions, directions=directions / norms, kappa=kappa, f_max=f_max)

    @classmethod
    def tilted_cube(cls, arm_length=0.2, tilt_scale=(1.0, 2.0, 3.0), kappa=0.016, f_max=6.0):
        """Rotors on the vertices of a cube of half-edge ``arm_length``.

        Each thrust axis is the vertex direction stretched by ``tilt_scale``.
        ``kappa`` alternates in sign with the rotor index, so each antipodal
        pair spins in opposite directions and the force and moment maps are
        orthogonal (``A_f A_m^T = 0``).
        """
        positions = arm_length * CUBE_VERTICES
        directions = CUBE_VERTICES * np.asarray(tilt_scale, dtype=float)
        signs = np.where(np.arange(ROTOR_COUNT) % 2 == 0, 1.0, -1.0)
        return cls.from_rotors(positions, directions, kappa * signs, f_max)


@dataclass(frozen=True)
class AllocationMatrix:
    A: np.ndarray
    n_A: np.ndarray
    A_f_pinv: np.ndarray
    A_m_pinv: np.ndarray
    A_pinv: np.ndarray
    singular_values: np.ndarray

    @property
    def A_f(self):
        return self.A[:3]

    @property
    def A_m(self):
        return self.A[3:]

    @cached_property
    def split_pinv(self):
        """8x6 map ``[A_f_pinv | A_m_pinv]`` used by the split allocation."""
        return np.hstack([self.A_f_pinv, self.A_m_pinv])

    def cross_residual(self):
        """Moment leaked by the force allocation and force leaked by the moment allocation."""
        return self.A_m @ self.A_f_pinv, self.A_f @ self.A_m_pinv

    def wrench(self, u):
        """Body wrench ``[f_B ; tau_B]`` produced by thrusts ``u`` (batched over leading axes)."""
        return np.asarray(u, dtype=float) @ self.A.T


def allocation_columns(geom):
    moments = np.cross(geom.positions, geom.directions) + geom.kappa[:, None] * geom.directions
    return np.vstack([geom.directions.T, moments.T])


def _sign_normalise(basis):
    basis = basis.copy()
    for j in range(basis.shape[1]):
        column = basis[:, j]
        nonzero = np.flatnonzero(np.abs(column) > 1e-12)
        if nonzero.size and column[nonzero[0]] < 0:
            basis[:, j] = -column
    return basis


def build_allocation(geom, rank_tol=1e-9):
    """Allocation matrix, orthonormal nullspace basis and pseudoinverses."""
    A = allocation_columns(geom)
    _, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > rank_tol * max(s[0], 1.0)))
    nullity = A.shape[1] - rank
    if rank < WRENCH_DIM or nullity != NULLSPACE_DIM:
        raise GeometryRankError(rank=rank, nullity=nullity)
    n_A = _sign_normalise(Vt[rank:].T)
    alloc = AllocationMatrix(
        A=A,
        n_A=n_A,
        A_f_pinv=np.linalg.pinv(A[:3]),
        A_m_pinv=np.linalg.pinv(A[3:]),
        A_pinv=np.linalg.pinv(A),
        singular_values=s,
    )
    leak_m, leak_f = alloc.cross_residual()
    logger.debug(
        'Allocation built: sigma_min=%.4g, cross residual |A_m A_f+|=%.3g, |A_f A_m+|=%.3g',
        s[-1], np.max(np.abs(leak_m)), np.max(np.abs(leak_f)),
    )
    return alloc


def nominal_allocation(alloc, f_b_star, tau_b_star, mode='split'):
    """Unconstrained thrusts for a body wrench.

    ``split`` sums the force and moment pseudoinverse solutions; ``full``
    applies the pseudoinverse of the whole matrix.
    """
    f_b_star = np.asarray(f_b_star, dtype=float)
    tau_b_star = np.asarray(tau_b_star, dtype=float)
    wrench = np.concatenate(np.broadcast_arrays(f_b_star, tau_b_star), axis=-1)
    if mode == 'split':
        return wrench @ alloc.split_pinv.T
    if mode == 'full':
        return wrench @ alloc.A_pinv.T
    raise GeometryError('unknown allocation mode', mode=mode)


def apply_nullspace(u_0, alloc, X):
    """``u_cmd = u_0 + n_A X``."""
    return np.asarray(u_0, dtype=float) + np.asarray(X, dtype=float) @ alloc.n_A.T
