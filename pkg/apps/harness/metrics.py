"""Tracking and smoothness statistics of a finished run."""

import numpy as np
from scipy.spatial.transform import Rotation

ZERO_THRUST = 1e-6  # N


def wrap_to_pi(angle):
    """Map angles to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2 * np.pi)


def orientation_error(R_ref, R_hat):
    """Per-axis and geodesic error of ``R_ref^T R_hat`` (batched over leading axes).

    Per-axis is the extrinsic xyz Euler triple, so it carries the wrap jumps a
    component-wise representation has; geodesic is the rotation angle.
    """
    R_ref = np.asarray(R_ref, dtype=float)
    R_hat = np.asarray(R_hat, dtype=float)
    relative = np.swapaxes(R_ref, -1, -2) @ R_hat
    batch = relative.shape[:-2]
    rotation = Rotation.from_matrix(relative.reshape(-1, 3, 3))
    per_axis = wrap_to_pi(rotation.as_euler('xyz'))
    return per_axis.reshape(batch + (3,)), rotation.magnitude().reshape(batch)


def geodesic_from_per_axis(per_axis):
    """Rotation angle of the relative rotation a per-axis (xyz Euler) error describes."""
    per_axis = np.asarray(per_axis, dtype=float).reshape(-1, 3)
    if per_axis.shape[0] == 0:
        return np.zeros(0)
    return Rotation.from_euler('xyz', per_axis).magnitude()


def mean_and_rms(norms):
    norms = np.asarray(norms, dtype=float)
    if norms.size == 0:
        return 0.0, 0.0
    return float(np.mean(norms)), float(np.sqrt(np.mean(norms ** 2)))


def first_wrap_index(per_axis):
    """Index of the first step whose per-axis error jumps by more than pi, else the length."""
    if len(per_axis) < 2:
        return len(per_axis)
    jumps = np.any(np.abs(np.diff(per_axis, axis=0)) > np.pi, axis=1)
    hits = np.flatnonzero(jumps)
    return int(hits[0] + 1) if hits.size else len(per_axis)


def per_motor_summary(u_act):
    delta = np.diff(u_act, axis=0)
    if delta.shape[0] == 0:
        delta = np.zeros((1, u_act.shape[1]))
    return [
        {
            'motor': i,
            'total_abs_delta_u': float(np.sum(np.abs(delta[:, i]))),
            'mean_abs_delta_u': float(np.mean(np.abs(delta[:, i]))),
            'max_abs_delta_u': float(np.max(np.abs(delta[:, i]))),
            'std_delta_u': float(np.std(delta[:, i])),
            'min_thrust': float(np.min(u_act[:, i])) if len(u_act) else 0.0,
        }
        for i in range(u_act.shape[1])
    ]


def tracking_metrics(e_p, e_xi, geodesic):
    """Mean/RMS of the position and orientation error norms."""
    mean_pos, rms_pos = mean_and_rms(np.linalg.norm(e_p, axis=1))
    mean_ori, rms_ori = mean_and_rms(np.linalg.norm(e_xi, axis=1))
    wrap = first_wrap_index(e_xi)
    mean_pre, rms_pre = mean_and_rms(np.linalg.norm(e_xi[:wrap], axis=1))
    mean_geo, rms_geo = mean_and_rms(geodesic)
    return {
        'mean_pos_err': mean_pos,
        'rms_pos_err': rms_pos,
        'mean_ori_err': mean_ori,
        'rms_ori_err': rms_ori,
        'mean_ori_err_prewrap': mean_pre,
        'rms_ori_err_prewrap': rms_pre,
        'prewrap_steps': wrap,
        'mean_ori_err_geodesic': mean_geo,
        'rms_ori_err_geodesic': rms_geo,
    }


def smoothness_metrics(u_act):
    """``total_delta_u`` sums ``|u_act,k - u_act,k-1|`` over consecutive logged steps and motors."""
    if len(u_act) == 0:
        return {'total_delta_u': 0.0, 'min_motor_thrust': 0.0, 'zero_thrust_steps': 0}
    return {
        'total_delta_u': float(np.sum(np.abs(np.diff(u_act, axis=0)))),
        'min_motor_thrust': float(np.min(u_act)),
        'zero_thrust_steps': int(np.count_nonzero(np.any(u_act <= ZERO_THRUST, axis=1))),
    }


def compute_metrics(log, allocator, counters):
    """Full ``RunMetrics`` mapping for a :class:`~apps.harness.runner.RunLog`."""
    metrics = {'allocator': allocator, 'steps': len(log)}
    metrics.update(tracking_metrics(log.column_block('e_p'), log.column_block('e_xi'), log.geodesic))
    metrics.update(smoothness_metrics(log.column_block('u_act')))
    metrics.update(counters)
    metrics['per_motor'] = per_motor_summary(log.column_block('u_act')) if len(log) else []
    return metrics
