"""
Run the MBNO baseline and a variant allocator on the same configuration and
write a side-by-side report.
"""

import json
import uuid
from pathlib import Path

from ...compare import compare
from ...config import ALLOCATORS
from ...exceptions import OutputError
from ...outputs import emit_outputs
from ..base import SimulationCommand

BASE_ALLOCATOR = 'mbno'
REPORT_FILE = 'comparison.json'


class Command(SimulationCommand):
    help = 'Compare MBNO against another allocator on one configuration'

    def add_arguments(self, parser):
        self.add_config_arguments(parser)
        parser.add_argument(
            '--variant',
            choices=[name for name in ALLOCATORS if name != BASE_ALLOCATOR],
            default='receding_horizon',
            help='Allocator compared against MBNO',
        )
        parser.add_argument(
            '--workers',
            type=int,
            default=2,
            help='Worker processes; 1 runs both simulations in this process',
        )
        parser.add_argument(
            '--plots',
            action='store_true',
            help='Also write SVG plots for each side',
        )

    def handle(self, *args, **options):
        base_cfg = self.load_config(options, allocator=BASE_ALLOCATOR)
        variant_cfg = base_cfg.with_allocator(options['variant'])
        output_dir = (
            Path(options['out']) if options['out']
            else Path(base_cfg.output_dir) / f'{base_cfg.name}_compare_seed{base_cfg.seed}'
        )

        runs = []
        if self.should_store(options):
            group = uuid.uuid4().hex
            runs = [self.start_run(cfg, comparison_group=group) for cfg in (base_cfg, variant_cfg)]

        self.stdout.write(self.style.SUCCESS(
            f'Comparing {variant_cfg.allocator} against {base_cfg.allocator} on {base_cfg.name}'
        ))
        with self.simulation_errors():
            try:
                report, base, variant = compare(base_cfg, variant_cfg, workers=max(1, options['workers']))
                sides = ((base, output_dir / base.allocator), (variant, output_dir / variant.allocator))
                for result, side_dir in sides:
                    emit_outputs(result.log, result.metrics, side_dir, plots=options['plots'])
                self.write_report(report, output_dir)
            except Exception as exc:
                for run in runs:
                    self.finish_run(run, error=exc)
                raise
        for run, (result, side_dir) in zip(runs, sides):
            self.finish_run(run, metrics=result.metrics, output_dir=side_dir)

        self.stdout.write('\n' + '=' * 72)
        self.stdout.write(f'{"metric":<24}{"mbno":>14}{variant_cfg.allocator:>20}{"improvement %":>14}')
        for name, row in report['metrics'].items():
            self.stdout.write(
                f'{name:<24}{row["base"]:>14.6g}{row["variant"]:>20.6g}{row["relative_improvement_pct"]:>14.2f}'
            )
        self.stdout.write('=' * 72)
        self.stdout.write(f'Report: {output_dir / REPORT_FILE}')
        self.stdout.write(self.style.SUCCESS('Comparison completed'))

    def write_report(self, report, output_dir):
        path = output_dir / REPORT_FILE
        try:
            output_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(report, sort_keys=True, indent=2) + '\n', encoding='utf-8')
        except OSError as exc:
            raise OutputError(str(exc), path=path) from exc
