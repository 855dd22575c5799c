"""
Experiment configuration: the validated ``*.cfg`` tree turned into the
immutable objects every other app consumes.
"""

import json
import logging
from dataclasses import dataclass, field, fields, is_dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from django.conf import settings

from apps.allocation.geometry import RotorGeometry, build_allocation
from apps.cilqr.model import ClosedLoopModel
from apps.cilqr.receding import horizon_from_constants
from apps.cilqr.solver import OcpConfig
from apps.controller.control import ControllerGains
from apps.controller.trajectory import TrajectorySpec
from apps.dynamics.state import VehicleParams
from apps.motors.model import MotorParams

from .exceptions import ConfigFileError

logger = logging.getLogger(__name__)

ALLOCATORS = ('mbno', 'receding_horizon', 'pseudoinverse_only')

# Everything that shapes a run apart from its name and output location.
COMPARED_FIELDS = (
    'allocator', 'dt', 'duration', 'seed', 'vehicle', 'geometry', 'allocation_mode', 'motor', 'motor_mode', 'u_min',
    'gains', 'flip_attitude_error_sign', 'trajectory', 'ocp', 'max_fallback_cycles',
)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    allocator: str
    dt: float
    duration: float
    seed: int
    output_dir: Path
    vehicle: VehicleParams
    geometry: RotorGeometry
    allocation_mode: str
    motor: MotorParams
    motor_mode: str
    u_min: np.ndarray
    gains: ControllerGains
    flip_attitude_error_sign: bool
    trajectory: TrajectorySpec
    ocp: OcpConfig
    max_fallback_cycles: int
    provenance: dict = field(default_factory=dict, compare=False)
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def steps(self):
        return int(round(self.duration / self.dt))

    @property
    def u_max(self):
        return self.geometry.f_max

    @cached_property
    def allocation(self):
        return build_allocation(self.geometry)

    def closed_loop_model(self):
        return ClosedLoopModel(
            vehicle=self.vehicle,
            alloc=self.allocation,
            motor=self.motor,
            gains=self.gains,
            dt=self.dt,
            allocation_mode=self.allocation_mode,
            motor_mode=self.motor_mode,
            flip_attitude_error_sign=self.flip_attitude_error_sign,
        )

    def with_allocator(self, allocator):
        raw = dict(self.raw, allocator=allocator)
        return replace(self, allocator=allocator, raw=raw)

    def with_seed(self, seed):
        raw = dict(self.raw, seed=seed)
        return replace(self, seed=seed, ocp=replace(self.ocp, rng_seed=seed), raw=raw)

    def differences(self, other, ignore=('allocator',)):
        """Experiment fields whose values differ from ``other``.

        Compares the built objects, not the source text, so configs assembled
        in code are checked too. ``name`` and ``output_dir`` never count.
        """
        return [
            name for name in COMPARED_FIELDS
            if name not in ignore and not _same_value(getattr(self, name), getattr(other, name))
        ]


def _same_value(a, b):
    if is_dataclass(a) or is_dataclass(b):
        return type(a) is type(b) and all(
            _same_value(getattr(a, f.name), getattr(b, f.name)) for f in fields(a)
        )
    if isinstance(a, (np.ndarray, list, tuple)) or isinstance(b, (np.ndarray, list, tuple)):
        a, b = np.asarray(a), np.asarray(b)
        return a.shape == b.shape and bool(np.array_equal(a, b))
    return a == b


def _geometry(data):
    if data['preset'] == 'custom':
        rotors = data['rotors']
        return RotorGeometry.from_rotors(
            positions=[r['position'] for r in rotors],
            directions=[r['direction'] for r in rotors],
            kappa=[r['kappa'] for r in rotors],
            f_max=[r['f_max'] for r in rotors],
        )
    return RotorGeometry.tilted_cube(
        arm_length=data['arm_length'], tilt_scale=data['tilt_scale'], kappa=data['kappa'], f_max=data['f_max']
    )


def _inertia(value):
    value = np.asarray(value, dtype=float)
    return np.diag(value) if value.ndim == 1 else value


def _weight(value):
    value = np.asarray(value, dtype=float)
    return np.diag(value) if value.ndim == 1 else value * np.eye(8)


def build_experiment_config(data, raw=None):
    """Assemble an :class:`ExperimentConfig` from serializer-validated data."""
    dt = data['dt']
    vehicle = VehicleParams(
        m_R=data['vehicle']['mass'], J_b=_inertia(data['vehicle']['inertia']), g=data['vehicle']['gravity']
    )
    geometry = _geometry(data['geometry'])
    motor_data = data['motor']
    motor = MotorParams(tau_rise=motor_data['tau_rise'], tau_fall=motor_data['tau_fall'])
    u_min = np.broadcast_to(np.asarray(motor_data['u_min'], dtype=float), (geometry.rotor_count,)).copy()

    g = data['gains']
    gains = ControllerGains.for_mass(
        vehicle.m_R,
        kp=g['kp_position'], kd=g['kd_position'], ki=g['ki_position'],
        kp_R=g['kp_attitude'], kd_R=g['kd_attitude'], e_p_max=g['e_p_max'], e_v_max=g['e_v_max'],
    )
    t = data['trajectory']
    trajectory = TrajectorySpec(
        p_start=t['p_start'], p_end=t['p_end'],
        rot_axis=np.asarray(t['rot_axis']) / np.linalg.norm(t['rot_axis']),
        rot_angle=t['rot_angle'], duration=t['duration'],
    )

    o = data['ocp']
    horizon = o['horizon'] or horizon_from_constants(
        float(np.max(motor.tau_rise)), float(np.max(motor.tau_fall)), dt, o['horizon_multiplier']
    )
    ocp = OcpConfig(
        h=horizon,
        h_c=o['control_horizon'],
        R_delta_u=_weight(o['r_delta_u']),
        u_max=geometry.f_max,
        u_min=u_min,
        dt=dt,
        max_outer_iters=o['max_outer_iters'],
        max_inner_iters=o['max_inner_iters'],
        penalty_init=o['penalty_init'],
        penalty_scale=o['penalty_scale'],
        constraint_tol=o['constraint_tol'],
        cost_tol=o['cost_tol'],
        gradient_tol=o['gradient_tol'],
        warm_start_sigma=o['warm_start_sigma'],
        rng_seed=data['seed'],
    )
    output_dir = data.get('output_dir') or settings.OMNIALLOC_OUTPUT_DIR
    return ExperimentConfig(
        name=data['name'],
        allocator=data['allocator'],
        dt=dt,
        duration=data['duration'],
        seed=data['seed'],
        output_dir=Path(output_dir),
        vehicle=vehicle,
        geometry=geometry,
        allocation_mode=data['allocation']['mode'],
        motor=motor,
        motor_mode=motor_data['discretization'],
        u_min=u_min,
        gains=gains,
        flip_attitude_error_sign=g['flip_attitude_error_sign'],
        trajectory=trajectory,
        ocp=ocp,
        max_fallback_cycles=o['max_fallback_cycles'],
        provenance=data.get('provenance') or {},
        raw=raw if raw is not None else {},
    )


def read_config_tree(path):
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as handle:
            return json.load(handle)
    except OSError as exc:
        raise ConfigFileError(str(exc), path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigFileError(f'invalid JSON: {exc}', path=str(path)) from exc


def load_experiment_config(path, seed=None, allocator=None):
    """Read, validate and build a config file.

    Raises ``rest_framework.exceptions.ValidationError`` for schema problems
    and :class:`ConfigFileError` when the file cannot be read.
    """
    from .serializers import ExperimentConfigSerializer

    tree = read_config_tree(path)
    if seed is not None:
        tree['seed'] = seed
    if allocator is not None:
        tree['allocator'] = allocator
    serializer = ExperimentConfigSerializer(data=tree)
    serializer.is_valid(raise_exception=True)
    cfg = build_experiment_config(serializer.validated_data, raw=tree)
    logger.info('Loaded config %s (%s, %d steps, seed %d)', cfg.name, cfg.allocator, cfg.steps, cfg.seed)
    return cfg
