"""
SO(3) helpers: hat/vee, the closed-form exponential map and its inverse.

Every function broadcasts over leading axes, so a stack of vectors with
shape (..., 3) maps to a stack of matrices with shape (..., 3, 3) and back.
"""

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import InvalidArgumentError

SKEW_TOLERANCE = 1e-9
_SMALL_ANGLE = 1e-4


def hat(v):
    """Cross-product matrix: ``hat(v) @ u == np.cross(v, u)``."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 3:
        raise InvalidArgumentError('hat expects 3-vectors', shape=v.shape)
    zero = np.zeros(v.shape[:-1])
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    return np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )


def vee(M, tol=SKEW_TOLERANCE):
    """Inverse of :func:`hat`; rejects matrices that are not skew within ``tol``."""
    M = np.asarray(M, dtype=float)
    if M.shape[-2:] != (3, 3):
        raise InvalidArgumentError('vee expects 3x3 matrices', shape=M.shape)
    asymmetry = np.max(np.abs(M + np.swapaxes(M, -1, -2)), initial=0.0)
    if not asymmetry <= tol:
        raise InvalidArgumentError('matrix is not skew-symmetric', asymmetry=float(asymmetry))
    return np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)


def _skew_part(M):
    return 0.5 * np.stack(
        [M[..., 2, 1] - M[..., 1, 2], M[..., 0, 2] - M[..., 2, 0], M[..., 1, 0] - M[..., 0, 1]],
        axis=-1,
    )


def expm_so3(phi):
    """Rodrigues formula ``I + sin(t)/t K + (1 - cos(t))/t^2 K^2`` with ``K = hat(phi)``."""
    phi = np.asarray(phi, dtype=float)
    theta_sq = np.sum(phi * phi, axis=-1)
    theta = np.sqrt(theta_sq)
    small = theta < _SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta_sq / 6.0 + theta_sq ** 2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta_sq / 24.0 + theta_sq ** 2 / 720.0, (1.0 - np.cos(safe)) / (safe * safe))
    K = hat(phi)
    return np.eye(3) + a[..., None, None] * K + b[..., None, None] * (K @ K)


def log_so3(R):
    """Rotation vector of ``R``; closed form away from a half turn, scipy near it."""
    R = np.asarray(R, dtype=float)
    s = _skew_part(R)
    sin_theta = np.linalg.norm(s, axis=-1)
    cos_theta = np.clip(0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0), -1.0, 1.0)
    theta = np.arctan2(sin_theta, cos_theta)
    small = sin_theta < _SMALL_ANGLE
    safe = np.where(small, 1.0, sin_theta)
    scale = np.where(small, 1.0 + theta * theta / 6.0, theta / safe)
    phi = scale[..., None] * s
    near_pi = cos_theta < -0.99
    if np.any(near_pi):
        phi = np.array(phi, copy=True)
        phi[near_pi] = rotation_vector(R[near_pi])
    return phi


def rotation_vector(R):
    """Axis-angle vector (rad) of one or many rotation matrices."""
    R = np.asarray(R, dtype=float)
    flat = R.reshape(-1, 3, 3)
    rotvec = Rotation.from_matrix(flat).as_rotvec()
    return rotvec.reshape(R.shape[:-2] + (3,))


def rotation_about(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return expm_so3(axis / np.linalg.norm(axis) * angle)


def orthonormality_error(R):
    """Frobenius norm of ``R^T R - I``."""
    R = np.asarray(R, dtype=float)
    return np.linalg.norm(np.swapaxes(R, -1, -2) @ R - np.eye(3), axis=(-2, -1))
