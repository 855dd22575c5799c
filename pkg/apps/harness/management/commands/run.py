"""
Run one closed-loop experiment and write its time series and metrics.
"""

from pathlib import Path

from ...config import ALLOCATORS
from ...outputs import emit_outputs
from ...runner import run_experiment
from ..base import SimulationCommand


def default_output_dir(cfg):
    return Path(cfg.output_dir) / f'{cfg.name}_{cfg.allocator}_seed{cfg.seed}'


class Command(SimulationCommand):
    help = 'Simulate one experiment configuration and write timeseries.csv and metrics.json'

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument(
            '--allocator',
            choices=ALLOCATORS,
            default=None,
            help='Override the configured allocator',
        )
        parser.add_argument(
            '--plots',
            action='store_true',
            help='Also write SVG plots of thrusts and tracking errors',
        )

    def handle(self, *args, **options):
        cfg = self.load_config(options, allocator=options['allocator'])
        output_dir = Path(options['out']) if options['out'] else default_output_dir(cfg)
        run = self.start_run(cfg) if self.should_store(options) else None

        self.stdout.write(
            self.style.SUCCESS(f'Running {cfg.name} with {cfg.allocator} ({cfg.steps} steps, seed {cfg.seed})')
        )
        with self.simulation_errors():
            try:
                result = run_experiment(cfg)
                emit_outputs(result.log, result.metrics, output_dir, plots=options['plots'])
            except Exception as exc:
                self.finish_run(run, error=exc)
                raise
        self.finish_run(run, metrics=result.metrics, output_dir=output_dir)

        self.write_metrics(result.metrics, output_dir)
        self.stdout.write(self.style.SUCCESS('Run completed'))
