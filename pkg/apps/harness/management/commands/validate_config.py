"""
Check an experiment configuration file without simulating it.
"""

from collections import Counter

import numpy as np

from ..base import SimulationCommand

# Slow time constants the prediction window should span.
SETTLING_TIME_CONSTANTS = 3.0


class Command(SimulationCommand):
    help = 'Validate an experiment configuration and print the derived quantities'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Experiment configuration file (JSON)')

    def handle(self, *args, **options):
        cfg = self.load_config({'config': options['config'], 'seed': None})
        with self.simulation_errors():
            alloc = cfg.allocation
        coverage = cfg.ocp.h * cfg.dt / cfg.motor.tau_max

        self.stdout.write(self.style.SUCCESS(f'Configuration {cfg.name} is valid'))
        self.stdout.write('\n' + '=' * 50)
        self.stdout.write(f'  allocator          : {cfg.allocator}')
        self.stdout.write(f'  steps              : {cfg.steps:,} x {cfg.dt} s')
        self.stdout.write(f'  allocation mode    : {cfg.allocation_mode}')
        self.stdout.write(f'  allocation rank    : {np.linalg.matrix_rank(alloc.A)}')
        self.stdout.write(f'  smallest sigma     : {alloc.singular_values[-1]:.4e}')
        leak_m, leak_f = alloc.cross_residual()
        self.stdout.write(f'  force/moment cross : {max(np.abs(leak_m).max(), np.abs(leak_f).max()):.3e}')
        self.stdout.write(f'  prediction horizon : {cfg.ocp.h} steps')
        self.stdout.write(f'  control horizon    : {cfg.ocp.h_c} steps')
        self.stdout.write(f'  horizon coverage   : {coverage:.2f} x tau_max ({cfg.motor.tau_max} s)')
        self.stdout.write(f'  hover weight       : {cfg.vehicle.weight:.4f} N')
        self.stdout.write('=' * 50)
        if coverage < SETTLING_TIME_CONSTANTS:
            self.stdout.write(self.style.WARNING(
                f'Prediction horizon spans {coverage:.2f} slow time constants; '
                f'the slower motor settles within about {SETTLING_TIME_CONSTANTS:g}'
            ))
        self.write_provenance(cfg.provenance)

    def write_provenance(self, provenance):
        if not provenance:
            self.stdout.write('No provenance recorded')
            return
        counts = Counter(provenance.get('sources', {}).values())
        self.stdout.write(f"Provenance: {counts['paper']} published values, {counts['default']} local defaults")
        for key, note in provenance.get('notes', {}).items():
            self.stdout.write(f'  {key}: {note}')
