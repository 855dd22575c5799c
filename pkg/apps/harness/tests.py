import copy
import json
import os
import tempfile
import time
import unittest
from dataclasses import replace
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings
from django.urls import reverse
from django.utils import timezone
from rest_framework import status
from rest_framework.exceptions import ValidationError
from rest_framework.test import APITestCase
from scipy.spatial.transform import Rotation

from .compare import check_comparable, compare, delta_u_histograms, relative_improvement
from .config import build_experiment_config, load_experiment_config
from .exceptions import ConfigFileError, ConfigMismatchError, OutputError
from .metrics import (
    compute_metrics,
    first_wrap_index,
    mean_and_rms,
    orientation_error,
    smoothness_metrics,
    wrap_to_pi,
)
from .models import ExperimentRun
from .outputs import (
    METRICS_FILE,
    TIMESERIES_FILE,
    emit_outputs,
    metrics_document,
    read_timeseries,
    write_timeseries,
)
from .runner import COLUMNS, RunLog, run_experiment
from .serializers import SIGN_FLIP_KEY, ExperimentConfigSerializer, config_keys

BASE_TREE = {
    'name': 'hover_test',
    'allocator': 'mbno',
    'dt': 0.002,
    'duration': 0.1,
    'seed': 0,
    'vehicle': {'mass': 0.5, 'inertia': [0.25, 0.25, 0.3]},
    'geometry': {'preset': 'tilted_cube', 'arm_length': 0.2, 'tilt_scale': [1.0, 2.0, 3.0], 'kappa': 0.016,
                 'f_max': 6.0},
    'motor': {'tau_rise': 0.15, 'tau_fall': 0.021},
    'gains': {
        'kp_position': 16.0, 'kd_position': 8.0, 'ki_position': 1.0,
        'kp_attitude': 30.0, 'kd_attitude': 8.0, 'e_p_max': 0.5, 'e_v_max': 1.0,
    },
    'trajectory': {'p_start': [0.0, 0.0, 3.0], 'p_end': [0.0, 0.0, 3.0], 'duration': 1.0},
    'ocp': {'horizon': 10, 'control_horizon': 5},
}

COUNTER_FIELDS = (
    'fallback_cycles', 'solver_cycles', 'clamped_steps', 'max_wrench_residual', 'max_wrench_request_error',
)
SCENARIO_CONFIG = Path(settings.BASE_DIR) / 'configs' / 'flip_maneuver_ci.cfg'


def config_tree(**sections):
    """The hover tree with top-level keys or whole sections replaced."""
    tree = copy.deepcopy(BASE_TREE)
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(tree.get(key), dict):
            tree[key].update(value)
        else:
            tree[key] = value
    return tree


def build(tree):
    serializer = ExperimentConfigSerializer(data=tree)
    serializer.is_valid(raise_exception=True)
    return build_experiment_config(serializer.validated_data, raw=tree)


def maneuver_tree(**sections):
    return config_tree(
        trajectory={'p_end': [0.05, 0.0, 2.95], 'rot_axis': [0.0, 1.0, 0.0], 'rot_angle': 0.2, 'duration': 1.0},
        **sections,
    )


class OrientationErrorTests(SimpleTestCase):
    def test_identity(self):
        per_axis, geodesic = orientation_error(np.eye(3), np.eye(3))
        np.testing.assert_allclose(per_axis, np.zeros(3), atol=1e-15)
        self.assertAlmostEqual(float(geodesic), 0.0, delta=1e-7)

    def test_small_rotation_about_x(self):
        delta = 0.01
        R_hat = Rotation.from_rotvec([delta, 0.0, 0.0]).as_matrix()
        per_axis, geodesic = orientation_error(np.eye(3), R_hat)
        np.testing.assert_allclose(per_axis, [delta, 0.0, 0.0], atol=1e-12)
        self.assertAlmostEqual(float(geodesic), delta, delta=1e-9)

    def test_error_is_relative_to_reference(self):
        R_ref = Rotation.from_rotvec([0.3, -0.2, 1.1]).as_matrix()
        R_hat = R_ref @ Rotation.from_rotvec([0.0, 0.0, 0.02]).as_matrix()
        per_axis, geodesic = orientation_error(R_ref, R_hat)
        np.testing.assert_allclose(per_axis, [0.0, 0.0, 0.02], atol=1e-12)
        self.assertAlmostEqual(float(geodesic), 0.02, delta=1e-9)

    def test_per_axis_inflates_past_half_turn(self):
        R_hat = Rotation.from_rotvec([0.0, np.pi + 0.01, 0.0]).as_matrix()
        per_axis, geodesic = orientation_error(np.eye(3), R_hat)
        self.assertAlmostEqual(float(geodesic), np.pi - 0.01, delta=1e-7)
        self.assertGreater(np.linalg.norm(per_axis), 4.0)

    def test_batched_shapes(self):
        R = Rotation.from_rotvec(np.random.default_rng(3).normal(size=(7, 3))).as_matrix()
        per_axis, geodesic = orientation_error(R, R)
        self.assertEqual(per_axis.shape, (7, 3))
        self.assertEqual(geodesic.shape, (7,))
        np.testing.assert_allclose(geodesic, 0.0, atol=1e-7)


class MetricHelperTests(SimpleTestCase):
    def test_wrap_to_pi(self):
        np.testing.assert_allclose(wrap_to_pi([3 * np.pi / 2, -np.pi, 0.5, 2 * np.pi]), [-np.pi / 2, np.pi, 0.5, 0.0],
                                   atol=1e-12)

    def test_rms_and_mean_match_variance(self):
        norms = np.abs(np.random.default_rng(11).normal(size=500))
        mean, rms = mean_and_rms(norms)
        self.assertAlmostEqual(rms ** 2 - mean ** 2, float(np.var(norms)), delta=1e-9)

    def test_empty_series(self):
        self.assertEqual(mean_and_rms([]), (0.0, 0.0))

    def test_first_wrap_index(self):
        series = np.zeros((10, 3))
        series[6:, 0] = 3.0
        series[6:, 0] -= 2 * np.pi
        series[:6, 0] = np.linspace(2.0, 3.1, 6)
        self.assertEqual(first_wrap_index(series), 6)
        self.assertEqual(first_wrap_index(np.zeros((10, 3))), 10)

    def test_smoothness(self):
        u_act = np.array([np.ones(8), 2 * np.ones(8), 1.5 * np.ones(8)])
        result = smoothness_metrics(u_act)
        self.assertAlmostEqual(result['total_delta_u'], 12.0)
        self.assertAlmostEqual(result['min_motor_thrust'], 1.0)
        self.assertEqual(result['zero_thrust_steps'], 0)

    def test_zero_thrust_steps(self):
        u_act = np.ones((4, 8))
        u_act[1, 3] = 0.0
        u_act[2, 0] = 5e-7
        self.assertEqual(smoothness_metrics(u_act)['zero_thrust_steps'], 2)

    def test_relative_improvement(self):
        self.assertAlmostEqual(relative_improvement(2.0, 0.5), 75.0)
        self.assertEqual(relative_improvement(0.0, 1.0), 0.0)


class ConfigValidationTests(SimpleTestCase):
    def errors(self, tree):
        serializer = ExperimentConfigSerializer(data=tree)
        self.assertFalse(serializer.is_valid())
        return serializer.errors

    def test_base_tree_is_valid(self):
        cfg = build(config_tree())
        self.assertEqual(cfg.steps, 50)
        self.assertEqual(cfg.allocation_mode, 'split')
        self.assertEqual(cfg.ocp.h, 10)
        self.assertEqual(cfg.ocp.h_c, 5)
        np.testing.assert_allclose(cfg.u_max, 6.0)
        np.testing.assert_allclose(cfg.u_min, 0.0)

    def test_horizon_defaults_to_motor_constants(self):
        cfg = build(config_tree(ocp={'horizon': None}))
        self.assertEqual(cfg.ocp.h, 300)
        self.assertEqual(cfg.ocp.h_c, 5)

    def test_duration_must_be_whole_steps(self):
        self.assertIn('duration', self.errors(config_tree(duration=0.1011)))

    def test_step_cannot_exceed_motor_constant(self):
        self.assertIn('dt', self.errors(config_tree(dt=0.05)))

    def test_missing_section(self):
        tree = config_tree()
        del tree['gains']
        self.assertIn('gains', self.errors(tree))

    def test_control_horizon_cannot_exceed_horizon(self):
        self.assertIn('ocp', self.errors(config_tree(ocp={'horizon': 4, 'control_horizon': 5})))

    def test_custom_geometry_needs_eight_rotors(self):
        self.assertIn('geometry', self.errors(config_tree(geometry={'preset': 'custom'})))

    def test_per_motor_constants_need_eight_values(self):
        self.assertIn('motor', self.errors(config_tree(motor={'tau_rise': [0.15] * 7})))

    def test_zero_rotation_axis(self):
        self.assertIn('trajectory', self.errors(config_tree(trajectory={'rot_axis': [0.0, 0.0, 0.0]})))

    def test_unknown_allocator(self):
        self.assertIn('allocator', self.errors(config_tree(allocator='lqr')))

    def test_custom_geometry_from_rotor_list(self):
        reference = build(config_tree()).geometry
        rotors = [
            {'position': p.tolist(), 'direction': (2.5 * d).tolist(), 'kappa': float(k), 'f_max': 6.0}
            for p, d, k in zip(reference.positions, reference.directions, reference.kappa)
        ]
        cfg = build(config_tree(geometry={'preset': 'custom', 'rotors': rotors}))
        np.testing.assert_allclose(cfg.geometry.directions, reference.directions, atol=1e-12)
        np.testing.assert_allclose(cfg.allocation.A, build(config_tree()).allocation.A, atol=1e-12)

    def test_load_from_file_with_overrides(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'hover.cfg'
            path.write_text(json.dumps(config_tree()), encoding='utf-8')
            cfg = load_experiment_config(path, seed=7, allocator='receding_horizon')
        self.assertEqual(cfg.seed, 7)
        self.assertEqual(cfg.ocp.rng_seed, 7)
        self.assertEqual(cfg.allocator, 'receding_horizon')

    def test_unreadable_and_malformed_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigFileError):
                load_experiment_config(Path(tmp) / 'missing.cfg')
            path = Path(tmp) / 'broken.cfg'
            path.write_text('{"name": ', encoding='utf-8')
            with self.assertRaises(ConfigFileError):
                load_experiment_config(path)

    def test_invalid_file_raises_validation_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'bad.cfg'
            path.write_text(json.dumps(config_tree(dt=-1.0)), encoding='utf-8')
            with self.assertRaises(ValidationError):
                load_experiment_config(path)

    def test_bundled_configs_load(self):
        for name, steps in (('flip_maneuver.cfg', 30000), ('flip_maneuver_ci.cfg', 3000)):
            cfg = load_experiment_config(Path(settings.BASE_DIR) / 'configs' / name)
            self.assertEqual(cfg.steps, steps)
            self.assertEqual(cfg.ocp.h, 300)
            self.assertEqual(cfg.ocp.h_c, 20)

    def test_full_inertia_matrix(self):
        inertia = [[0.25, 0.01, 0.0], [0.01, 0.25, -0.02], [0.0, -0.02, 0.3]]
        cfg = build(config_tree(vehicle={'inertia': inertia}))
        np.testing.assert_array_equal(cfg.vehicle.J_b, inertia)
        np.testing.assert_array_equal(build(config_tree()).vehicle.J_b, np.diag([0.25, 0.25, 0.3]))

    def test_inertia_matrix_must_be_symmetric_positive_definite(self):
        for inertia in (
            [[0.25, 0.01, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.3]],
            [[0.25, 0.3, 0.0], [0.3, 0.25, 0.0], [0.0, 0.0, 0.3]],
            [[0.25, 0.0], [0.0, 0.25]],
            [0.25, -0.25, 0.3],
        ):
            self.assertIn('vehicle', self.errors(config_tree(vehicle={'inertia': inertia})), inertia)

    def test_bundled_configs_tag_every_value(self):
        for name in ('flip_maneuver.cfg', 'flip_maneuver_ci.cfg'):
            path = Path(settings.BASE_DIR) / 'configs' / name
            tree = json.loads(path.read_text(encoding='utf-8'))
            provenance = load_experiment_config(path).provenance
            self.assertEqual(set(provenance['sources']), config_keys(tree), name)
            self.assertEqual(provenance['sources']['motor.tau_rise'], 'paper')
            self.assertEqual(provenance['sources']['gains.kp_attitude'], 'default')
            self.assertIn('-e_R', provenance['notes'][SIGN_FLIP_KEY])

    def test_provenance_keys_must_name_config_values(self):
        provenance = {'sources': {'dt': 'paper', 'motor.tau_up': 'paper'}, 'notes': {SIGN_FLIP_KEY: 'flipped'}}
        errors = self.errors(config_tree(provenance=provenance))
        self.assertIn('motor.tau_up', str(errors['provenance']))
        provenance['sources'] = {'dt': 'measured'}
        self.assertIn('provenance', self.errors(config_tree(provenance=provenance)))

    def test_sign_flip_needs_a_note(self):
        provenance = {'sources': {'dt': 'paper'}}
        self.assertIn(SIGN_FLIP_KEY, str(self.errors(config_tree(provenance=provenance))['provenance']))
        build(config_tree(provenance=provenance, gains={'flip_attitude_error_sign': False}))
        self.assertEqual(build(config_tree()).provenance, {})


class TimeseriesFileTests(SimpleTestCase):
    def test_schema(self):
        self.assertEqual(len(COLUMNS), 39)
        self.assertEqual(COLUMNS[0], 't')
        self.assertEqual(COLUMNS[1:4], ('p_x', 'p_y', 'p_z'))
        self.assertEqual(COLUMNS[-2:], ('solver_cost', 'solver_max_violation'))
        self.assertEqual(COLUMNS.index('u_cmd_0'), 19)
        self.assertEqual(COLUMNS.index('u_act_0'), 27)

    def test_empty_log_writes_header_only(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / TIMESERIES_FILE
            write_timeseries(RunLog.empty(0), path)
            lines = path.read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines, [','.join(COLUMNS)])

    def assert_metrics_close(self, recomputed, stored):
        self.assertEqual(set(recomputed), set(stored))
        for name, value in stored.items():
            if name == 'per_motor':
                for index, (mine, theirs) in enumerate(zip(recomputed[name], value)):
                    for field, number in theirs.items():
                        self.assertAlmostEqual(mine[field], number, delta=1e-9, msg=f'{field} of motor {index}')
            elif isinstance(value, str):
                self.assertEqual(recomputed[name], value)
            else:
                self.assertAlmostEqual(recomputed[name], value, delta=1e-9, msg=name)

    def test_file_round_trip(self):
        result = run_experiment(build(maneuver_tree(duration=0.02)))
        with tempfile.TemporaryDirectory() as tmp:
            written = emit_outputs(result.log, result.metrics, tmp)
            parsed = read_timeseries(Path(tmp) / TIMESERIES_FILE)
            metrics = json.loads((Path(tmp) / METRICS_FILE).read_text(encoding='utf-8'))
        self.assertEqual([p.name for p in written], [TIMESERIES_FILE, METRICS_FILE])
        np.testing.assert_array_equal(parsed.data, result.log.data)
        self.assertEqual(metrics['steps'], 10)
        self.assertEqual(metrics['allocator'], 'mbno')
        self.assertEqual(len(metrics['per_motor']), 8)

    def test_metrics_recomputed_from_file_match(self):
        result = run_experiment(build(maneuver_tree(duration=0.1)))
        with tempfile.TemporaryDirectory() as tmp:
            emit_outputs(result.log, result.metrics, tmp)
            parsed = read_timeseries(Path(tmp) / TIMESERIES_FILE)
        np.testing.assert_allclose(parsed.geodesic, result.log.geodesic, rtol=0.0, atol=1e-12)
        counters = {name: result.metrics[name] for name in COUNTER_FIELDS}
        recomputed = compute_metrics(parsed, result.allocator, counters)
        self.assertGreater(result.metrics['mean_ori_err_geodesic'], 0.0)
        self.assert_metrics_close(recomputed, result.metrics)

    def test_wrong_header_is_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / TIMESERIES_FILE
            path.write_text('t,x\n0,1\n', encoding='utf-8')
            with self.assertRaises(OutputError):
                read_timeseries(path)

    def test_plots_are_written(self):
        result = run_experiment(build(config_tree(duration=0.02)))
        with tempfile.TemporaryDirectory() as tmp:
            written = emit_outputs(result.log, result.metrics, tmp, plots=True)
            names = sorted(p.name for p in written)
            self.assertTrue(all(p.exists() for p in written))
        self.assertEqual(names, sorted([TIMESERIES_FILE, METRICS_FILE, 'u_act.svg', 'delta_u.svg', 'errors.svg']))


class RunExperimentTests(SimpleTestCase):
    def test_pseudoinverse_hover_stays_put(self):
        result = run_experiment(build(config_tree(allocator='pseudoinverse_only')))
        self.assertEqual(result.metrics['steps'], 50)
        self.assertLessEqual(result.metrics['mean_pos_err'], 1e-6)
        self.assertLessEqual(result.metrics['mean_ori_err_geodesic'], 1e-6)
        self.assertTrue(np.all(np.isnan(result.log.column_block('X'))))

    def test_log_time_column(self):
        result = run_experiment(build(config_tree()))
        np.testing.assert_allclose(result.log.column_block('t')[:, 0], 0.002 * np.arange(50), atol=1e-15)

    def test_zero_duration(self):
        result = run_experiment(build(config_tree(duration=0.0)))
        self.assertEqual(len(result.log), 0)
        self.assertEqual(result.metrics['total_delta_u'], 0.0)
        self.assertEqual(result.metrics['per_motor'], [])

    def test_mbno_respects_bounds_and_preserves_wrench(self):
        result = run_experiment(build(maneuver_tree()))
        u_cmd = result.log.column_block('u_cmd')
        self.assertEqual(result.metrics['clamped_steps'], 0)
        self.assertGreaterEqual(u_cmd.min(), -1e-9)
        self.assertLessEqual(u_cmd.max(), 6.0 + 1e-9)
        self.assertLessEqual(result.metrics['max_wrench_residual'], 1e-6)
        self.assertLessEqual(result.metrics['max_wrench_request_error'], 1e-6)

    def test_runs_are_deterministic(self):
        cfg = build(maneuver_tree(duration=0.05))
        first, second = run_experiment(cfg), run_experiment(cfg)
        np.testing.assert_array_equal(first.log.data, second.log.data)
        self.assertEqual(metrics_document(first.metrics), metrics_document(second.metrics))

    def test_thrust_beyond_motor_limits_is_reported(self):
        with self.assertLogs('apps.harness.runner', 'WARNING') as logs:
            result = run_experiment(build(config_tree(geometry={'f_max': 0.3}, duration=0.02)))
        self.assertEqual(result.metrics['clamped_steps'], 10)
        self.assertIn('[0, 0.3] N thrust limits', logs.output[0])
        self.assertIn('10 of 10 steps', logs.output[-1])
        self.assertLessEqual(result.log.column_block('u_cmd').max(), 0.3 + 1e-12)

    def test_receding_horizon_cycles(self):
        cfg = build(maneuver_tree(allocator='receding_horizon', duration=0.04))
        result = run_experiment(cfg)
        self.assertEqual(result.metrics['fallback_cycles'], 0)
        self.assertEqual(result.metrics['solver_cycles'], 4)
        self.assertTrue(np.all(np.isfinite(result.log.column_block('X'))))
        self.assertTrue(np.all(np.isfinite(result.log.column_block('solver_cost'))))
        self.assertGreaterEqual(result.log.column_block('u_cmd').min(), -1e-5)
        self.assertLessEqual(result.metrics['max_wrench_residual'], 1e-6)

    def test_receding_horizon_is_reproducible_with_seed(self):
        cfg = build(maneuver_tree(allocator='receding_horizon', duration=0.02))
        first, second = run_experiment(cfg), run_experiment(cfg)
        np.testing.assert_array_equal(first.log.data, second.log.data)


class CompareTests(SimpleTestCase):
    def test_configs_must_match_outside_allocator(self):
        base = build(config_tree())
        with self.assertRaises(ConfigMismatchError) as ctx:
            check_comparable(base, build(config_tree(duration=0.2, allocator='receding_horizon')))
        self.assertEqual(ctx.exception.fields, ['duration'])
        check_comparable(base, base.with_allocator('receding_horizon'))

    def test_configs_built_in_code_are_compared_field_by_field(self):
        serializer = ExperimentConfigSerializer(data=config_tree())
        serializer.is_valid(raise_exception=True)
        base = build_experiment_config(serializer.validated_data)
        self.assertEqual(base.raw, {})
        cases = (
            (replace(base, duration=0.04, allocator='receding_horizon'), ['duration']),
            (replace(base, trajectory=replace(base.trajectory, p_end=np.array([1.0, 0.0, 3.0]))), ['trajectory']),
            (replace(base, ocp=replace(base.ocp, h=12)), ['ocp']),
            (replace(base, vehicle=replace(base.vehicle, m_R=0.6), dt=0.001), ['dt', 'vehicle']),
        )
        for variant, expected in cases:
            with self.assertRaises(ConfigMismatchError) as ctx:
                check_comparable(base, variant)
            self.assertEqual(ctx.exception.fields, expected)
        check_comparable(base, replace(base, name='renamed', output_dir=Path('elsewhere'), allocator='mbno'))

    def test_identical_allocators_have_zero_deltas(self):
        cfg = build(maneuver_tree(duration=0.04))
        report, base, variant = compare(cfg, cfg, workers=1)
        for name, row in report['metrics'].items():
            self.assertEqual(row['delta'], 0.0, name)
            self.assertEqual(row['relative_improvement_pct'], 0.0, name)
        self.assertEqual(report['delta_u_histograms']['base'], report['delta_u_histograms']['variant'])
        self.assertIn('external_anchors', report)

    def test_histograms_share_bins(self):
        cfg = build(maneuver_tree(duration=0.04))
        base = run_experiment(cfg)
        variant = run_experiment(cfg.with_allocator('pseudoinverse_only'))
        histograms = delta_u_histograms(base.log, variant.log, bins=10)
        self.assertEqual(len(histograms['bin_edges']), 11)
        self.assertEqual(len(histograms['base']), 8)
        self.assertEqual(sum(histograms['variant'][0]), 19)


@override_settings(OMNIALLOC_STORE_RUNS=True)
class CommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)
        self.config = self.root / 'hover.cfg'
        self.config.write_text(json.dumps(maneuver_tree(duration=0.02)), encoding='utf-8')

    def test_validate_config(self):
        out = StringIO()
        call_command('validate_config', str(self.config), stdout=out)
        output = out.getvalue()
        self.assertIn('is valid', output)
        self.assertIn('allocation rank    : 6', output)
        self.assertIn('prediction horizon : 10 steps', output)
        self.assertIn('horizon coverage   : 0.13 x tau_max (0.15 s)', output)
        self.assertIn('Prediction horizon spans 0.13 slow time constants', output)
        self.assertIn('No provenance recorded', output)

    def test_validate_config_reports_provenance(self):
        out = StringIO()
        call_command('validate_config', str(SCENARIO_CONFIG), stdout=out)
        output = out.getvalue()
        self.assertIn('horizon coverage   : 4.00 x tau_max', output)
        self.assertNotIn('Prediction horizon spans', output)
        self.assertIn('Provenance: 12 published values, 31 local defaults', output)
        self.assertIn(f'  {SIGN_FLIP_KEY}: ', output)

    def test_validate_config_rejects_rank_deficient_geometry(self):
        rotors = [{'position': [0.1, 0.0, 0.0], 'direction': [0.0, 0.0, 1.0], 'kappa': 0.016, 'f_max': 6.0}] * 8
        self.config.write_text(json.dumps(config_tree(geometry={'preset': 'custom', 'rotors': rotors})),
                               encoding='utf-8')
        with self.assertRaisesMessage(CommandError, 'rank'):
            call_command('validate_config', str(self.config), stdout=StringIO())

    def test_validate_config_reports_errors(self):
        self.config.write_text(json.dumps(config_tree(dt=0.05)), encoding='utf-8')
        with self.assertRaisesMessage(CommandError, 'dt:'):
            call_command('validate_config', str(self.config), stdout=StringIO())

    def test_run_writes_outputs_and_records_run(self):
        out_dir = self.root / 'out'
        call_command('run', config=str(self.config), out=str(out_dir), stdout=StringIO())
        self.assertTrue((out_dir / TIMESERIES_FILE).exists())
        self.assertTrue((out_dir / METRICS_FILE).exists())
        run = ExperimentRun.objects.get()
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.allocator, 'mbno')
        self.assertEqual(run.steps, 10)
        self.assertEqual(run.output_dir, str(out_dir))
        self.assertIsNotNone(run.wall_time)

    def test_run_default_output_dir(self):
        with override_settings(OMNIALLOC_OUTPUT_DIR=self.root / 'runs'):
            call_command('run', config=str(self.config), seed=3, allocator='pseudoinverse_only', no_store=True,
                         stdout=StringIO())
        self.assertTrue((self.root / 'runs' / 'hover_test_pseudoinverse_only_seed3' / TIMESERIES_FILE).exists())
        self.assertFalse(ExperimentRun.objects.exists())

    def test_missing_config_fails(self):
        with self.assertRaises(CommandError):
            call_command('run', config=str(self.root / 'missing.cfg'), stdout=StringIO())

    def test_compare_records_grouped_runs(self):
        out_dir = self.root / 'cmp'
        call_command('compare', config=str(self.config), out=str(out_dir), variant='pseudoinverse_only', workers=1,
                     stdout=StringIO())
        report = json.loads((out_dir / 'comparison.json').read_text(encoding='utf-8'))
        self.assertEqual(report['base_allocator'], 'mbno')
        self.assertEqual(report['variant_allocator'], 'pseudoinverse_only')
        self.assertTrue((out_dir / 'mbno' / TIMESERIES_FILE).exists())
        self.assertTrue((out_dir / 'pseudoinverse_only' / METRICS_FILE).exists())
        runs = ExperimentRun.objects.all()
        self.assertEqual(runs.count(), 2)
        self.assertEqual(len({run.comparison_group for run in runs}), 1)
        self.assertTrue(all(run.status == 'completed' for run in runs))


class ExperimentRunAPITests(APITestCase):
    def setUp(self):
        now = timezone.now()
        self.mbno = ExperimentRun.objects.create(
            config_name='flip_maneuver_ci', allocator='mbno', seed=0, status='completed',
            metrics={'total_delta_u': 12.5}, finished_at=now,
        )
        self.rh = ExperimentRun.objects.create(
            config_name='flip_maneuver_ci', allocator='receding_horizon', seed=0, status='failed',
            error_message='fallback budget exceeded',
        )

    def test_list(self):
        response = self.client.get(reverse('harness_api:run-list'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['count'], 2)

    def test_filter_by_allocator(self):
        response = self.client.get(reverse('harness_api:run-list'), {'allocator': 'receding_horizon'})
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual([row['id'] for row in response.data['results']], [self.rh.pk])

    def test_detail(self):
        response = self.client.get(reverse('harness_api:run-detail', args=[self.mbno.pk]))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['metrics'], {'total_delta_u': 12.5})
        self.assertIsNotNone(response.data['duration_seconds'])

    def test_runs_are_read_only(self):
        response = self.client.post(reverse('harness_api:run-list'), {'config_name': 'x'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)

    def test_health(self):
        response = self.client.get(reverse('health-check'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['recorded_runs'], 2)


@unittest.skipUnless(os.environ.get('OMNIALLOC_RUN_SCENARIOS'), 'set OMNIALLOC_RUN_SCENARIOS=1 for scenario runs')
class FlipManeuverScenarioTests(SimpleTestCase):
    """Six second translate-and-flip A/B run with the bundled configuration."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        base = load_experiment_config(SCENARIO_CONFIG, allocator='mbno')
        started = time.monotonic()
        cls.report, cls.base, cls.variant = compare(base, base.with_allocator('receding_horizon'), workers=2)
        cls.elapsed = time.monotonic() - started

    def test_receding_horizon_is_smoother(self):
        self.assertLessEqual(self.variant.metrics['total_delta_u'], 0.7 * self.base.metrics['total_delta_u'])

    def test_receding_horizon_tracks_position_at_least_as_well(self):
        self.assertLessEqual(self.variant.metrics['mean_pos_err'], self.base.metrics['mean_pos_err'])

    def test_receding_horizon_keeps_motors_further_from_zero(self):
        self.assertGreater(self.variant.metrics['min_motor_thrust'], self.base.metrics['min_motor_thrust'])

    def test_finishes_within_fifteen_minutes(self):
        self.assertLess(self.elapsed, 900.0)

    def test_no_fallback_cycles(self):
        self.assertEqual(self.variant.metrics['fallback_cycles'], 0)

    def test_wrench_audit(self):
        for result in (self.base, self.variant):
            self.assertLessEqual(result.metrics['max_wrench_residual'], 1e-9)

    def test_every_cycle_meets_motor_bounds(self):
        violations = self.variant.log.column_block('solver_max_violation')[:, 0]
        self.assertLessEqual(np.nanmax(violations), 1e-6)
