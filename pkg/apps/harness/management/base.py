"""Shared plumbing for the harness management commands."""

import json
from contextlib import contextmanager
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone
from rest_framework.exceptions import ValidationError

from omnialloc.exceptions import SimulationError

from ..config import load_experiment_config
from ..models import ExperimentRun


def format_validation_error(detail, prefix=''):
    """Flatten a DRF error tree into ``section.field: message`` lines."""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            lines.extend(format_validation_error(value, f'{prefix}{key}.' if key != 'non_field_errors' else prefix))
        return lines
    if isinstance(detail, list):
        lines = []
        for index, value in enumerate(detail):
            if isinstance(value, (dict, list)):
                lines.extend(format_validation_error(value, f'{prefix}{index}.'))
            else:
                lines.append(f'{prefix.rstrip(".") or "config"}: {value}')
        return lines
    return [f'{prefix.rstrip(".") or "config"}: {detail}']


class SimulationCommand(BaseCommand):
    """Base for commands that load a config file and may record runs."""

    def add_config_arguments(self, parser):
        parser.add_argument(
            '--config',
            default=str(settings.OMNIALLOC_DEFAULT_CONFIG),
            help='Experiment configuration file (JSON)',
        )
        parser.add_argument('--seed', type=int, default=None, help='Override the configured seed')
        parser.add_argument('--out', default=None, help='Output directory')
        parser.add_argument(
            '--no-store',
            action='store_true',
            help='Do not record the run in the database',
        )

    @contextmanager
    def simulation_errors(self):
        try:
            yield
        except ValidationError as exc:
            lines = format_validation_error(exc.detail)
            raise CommandError('Invalid configuration:\n  ' + '\n  '.join(lines)) from exc
        except SimulationError as exc:
            raise CommandError(str(exc)) from exc

    def load_config(self, options, allocator=None):
        with self.simulation_errors():
            return load_experiment_config(Path(options['config']), seed=options['seed'], allocator=allocator)

    def should_store(self, options):
        return settings.OMNIALLOC_STORE_RUNS and not options['no_store']

    def start_run(self, cfg, comparison_group=''):
        return ExperimentRun.objects.create(
            config_name=cfg.name,
            allocator=cfg.allocator,
            seed=cfg.seed,
            config=json.loads(json.dumps(cfg.raw)),
            comparison_group=comparison_group,
        )

    def finish_run(self, run, metrics=None, output_dir='', error=None):
        if run is None:
            return
        if error is not None:
            run.mark_failed(error, finished_at=timezone.now())
        else:
            run.mark_completed(metrics, output_dir, finished_at=timezone.now())

    def write_metrics(self, metrics, output_dir):
        self.stdout.write(f'  mean position error : {metrics["mean_pos_err"]:.6g} m')
        self.stdout.write(f'  rms position error  : {metrics["rms_pos_err"]:.6g} m')
        self.stdout.write(f'  mean orientation err: {metrics["mean_ori_err"]:.6g} rad')
        self.stdout.write(f'  total delta u       : {metrics["total_delta_u"]:.6g} N')
        self.stdout.write(f'  min motor thrust    : {metrics["min_motor_thrust"]:.6g} N')
        self.stdout.write(
            f'  fallbacks / clamps  : {metrics["fallback_cycles"]} / {metrics["clamped_steps"]}'
        )
        self.stdout.write(f'  outputs             : {output_dir}')
