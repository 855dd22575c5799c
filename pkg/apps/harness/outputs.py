"""Files written for a finished run: time-series CSV, metrics JSON, SVG plots."""

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .exceptions import OutputError  # noqa: E402
from .runner import COLUMNS, RunLog  # noqa: E402
from .serializers import RunMetricsSerializer  # noqa: E402

logger = logging.getLogger(__name__)

TIMESERIES_FILE = 'timeseries.csv'
METRICS_FILE = 'metrics.json'
SVG_METADATA = {'Date': None}


def write_timeseries(log, path):
    np.savetxt(path, log.data, fmt='%.17g', delimiter=',', header=','.join(COLUMNS), comments='')


def read_timeseries(path):
    """Parse a file written by :func:`write_timeseries` back into a :class:`RunLog`."""
    with open(path, encoding='utf-8') as handle:
        header = handle.readline().strip().split(',')
        if tuple(header) != COLUMNS:
            raise OutputError('unexpected timeseries header', path=path)
        rows = np.loadtxt(handle, delimiter=',', ndmin=2)
    return RunLog.from_rows(rows.reshape(-1, len(COLUMNS)))


def metrics_document(metrics):
    return json.dumps(RunMetricsSerializer(metrics).data, sort_keys=True, indent=2)


def _line_plot(path, t, series, labels, ylabel, title):
    fig, ax = plt.subplots(figsize=(8, 4))
    for values, label in zip(series, labels):
        ax.plot(t, values, linewidth=0.8, label=label)
    ax.set_xlabel('t [s]')
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if len(labels) > 1:
        ax.legend(ncol=4, fontsize='small')
    fig.tight_layout()
    fig.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(fig)


def write_plots(log, output_dir, allocator):
    t = log.column_block('t')[:, 0]
    u_act = log.column_block('u_act')
    delta = np.vstack([np.zeros((1, u_act.shape[1])), np.diff(u_act, axis=0)]) if len(log) else u_act
    motors = [f'motor {i}' for i in range(u_act.shape[1])]
    paths = [output_dir / 'u_act.svg', output_dir / 'delta_u.svg', output_dir / 'errors.svg']
    _line_plot(paths[0], t, u_act.T, motors, 'u_act [N]', f'Motor thrust ({allocator})')
    _line_plot(paths[1], t, delta.T, motors, 'delta u_act [N]', f'Per-step thrust change ({allocator})')
    _line_plot(
        paths[2], t,
        [np.linalg.norm(log.column_block('e_p'), axis=1), np.linalg.norm(log.column_block('e_xi'), axis=1)],
        ['|e_p| [m]', '|e_xi| [rad]'], 'error', f'Tracking error ({allocator})',
    )
    return paths


def emit_outputs(log, metrics, output_dir, plots=False):
    """Write the run files into ``output_dir`` and return their paths."""
    output_dir = Path(output_dir)
    target = output_dir
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        target = output_dir / TIMESERIES_FILE
        write_timeseries(log, target)
        written = [target]
        target = output_dir / METRICS_FILE
        target.write_text(metrics_document(metrics) + '\n', encoding='utf-8')
        written.append(target)
        if plots:
            target = output_dir
            written.extend(write_plots(log, output_dir, metrics.get('allocator', '')))
    except OSError as exc:
        logger.error('Could not write %s: %s', target, exc)
        raise OutputError(str(exc), path=target) from exc
    logger.info('Wrote %d files to %s', len(written), output_dir)
    return written
