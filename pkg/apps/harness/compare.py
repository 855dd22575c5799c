"""A/B comparison of two allocators on otherwise identical configurations."""

import logging
from multiprocessing import Pool

import numpy as np

from .exceptions import ConfigMismatchError
from .runner import run_experiment

logger = logging.getLogger(__name__)

COMPARED_METRICS = (
    'mean_pos_err', 'rms_pos_err', 'mean_ori_err', 'rms_ori_err',
    'mean_ori_err_prewrap', 'rms_ori_err_prewrap', 'mean_ori_err_geodesic', 'rms_ori_err_geodesic',
    'total_delta_u', 'min_motor_thrust', 'zero_thrust_steps',
)

# Published 60 s maneuver results; a different airframe, so direction and scale only.
EXTERNAL_ANCHORS = {
    'label': 'external reference values (published simulation, not reproduced here)',
    'mbno': {'mean_pos_err': 0.0095, 'rms_pos_err': 0.0146, 'mean_ori_err': 0.1070, 'rms_ori_err': 0.5700},
    'receding_horizon': {
        'mean_pos_err': 0.0038, 'rms_pos_err': 0.0046, 'mean_ori_err': 0.1027, 'rms_ori_err': 0.5575,
    },
}

HISTOGRAM_BINS = 40


def check_comparable(cfg_base, cfg_variant):
    fields = cfg_base.differences(cfg_variant)
    if fields:
        raise ConfigMismatchError(fields=fields)


def relative_improvement(base, variant):
    """Percent reduction from ``base`` to ``variant``; zero when ``base`` is zero."""
    if base == 0:
        return 0.0
    return 100.0 * (base - variant) / abs(base)


def delta_u_histograms(base_log, variant_log, bins=HISTOGRAM_BINS):
    """Per-motor histograms of ``u_act`` increments on bins shared by both runs."""
    base = np.diff(base_log.column_block('u_act'), axis=0)
    variant = np.diff(variant_log.column_block('u_act'), axis=0)
    combined = np.concatenate([base.ravel(), variant.ravel()])
    if combined.size == 0:
        return {'bin_edges': [], 'base': [], 'variant': []}
    edges = np.histogram_bin_edges(combined, bins=bins)
    return {
        'bin_edges': edges.tolist(),
        'base': [np.histogram(base[:, i], bins=edges)[0].tolist() for i in range(base.shape[1])],
        'variant': [np.histogram(variant[:, i], bins=edges)[0].tolist() for i in range(variant.shape[1])],
    }


def _run_both(configs, workers):
    if workers > 1:
        with Pool(processes=min(workers, len(configs))) as pool:
            return pool.map(run_experiment, configs)
    return [run_experiment(cfg) for cfg in configs]


def compare(cfg_base, cfg_variant, workers=2):
    """Run both configurations and build the comparison report.

    Returns ``(report, base_result, variant_result)``.
    """
    check_comparable(cfg_base, cfg_variant)
    logger.info('Comparing %s against %s on %s', cfg_variant.allocator, cfg_base.allocator, cfg_base.name)
    base, variant = _run_both([cfg_base, cfg_variant], workers)

    rows = {}
    for name in COMPARED_METRICS:
        b, v = base.metrics[name], variant.metrics[name]
        rows[name] = {
            'base': b,
            'variant': v,
            'delta': v - b,
            'relative_improvement_pct': relative_improvement(b, v),
        }

    report = {
        'config': cfg_base.name,
        'seed': cfg_base.seed,
        'base_allocator': cfg_base.allocator,
        'variant_allocator': cfg_variant.allocator,
        'metrics': rows,
        'min_thrust': {
            'base': base.metrics['min_motor_thrust'],
            'variant': variant.metrics['min_motor_thrust'],
            'variant_stays_higher': variant.metrics['min_motor_thrust'] > base.metrics['min_motor_thrust'],
        },
        'per_motor': {'base': base.metrics['per_motor'], 'variant': variant.metrics['per_motor']},
        'delta_u_histograms': delta_u_histograms(base.log, variant.log),
        'counters': {
            side: {key: result.metrics[key] for key in ('fallback_cycles', 'solver_cycles', 'clamped_steps')}
            for side, result in (('base', base), ('variant', variant))
        },
        'external_anchors': EXTERNAL_ANCHORS,
    }
    return report, base, variant
