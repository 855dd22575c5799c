import math

import numpy as np
from drf_spectacular.utils import extend_schema_field
from rest_framework import serializers

from .config import ALLOCATORS
from .models import ExperimentRun

ROTOR_COUNT = 8


def vector_field(length=3, **kwargs):
    return serializers.ListField(child=serializers.FloatField(), min_length=length, max_length=length, **kwargs)


@extend_schema_field(serializers.ListField(child=serializers.FloatField()))
class ScalarOrVectorField(serializers.Field):
    """A number applied to every motor, or one number per motor."""

    def __init__(self, length=ROTOR_COUNT, positive=False, **kwargs):
        self.length = length
        self.positive = positive
        super().__init__(**kwargs)

    def _number(self, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise serializers.ValidationError(f'Expected a finite number, got {value!r}.')
        if self.positive and value <= 0:
            raise serializers.ValidationError('Value must be positive.')
        return float(value)

    def to_internal_value(self, data):
        if isinstance(data, list):
            if len(data) != self.length:
                raise serializers.ValidationError(f'Expected {self.length} values, got {len(data)}.')
            return [self._number(value) for value in data]
        return self._number(data)

    def to_representation(self, value):
        return value


@extend_schema_field(serializers.ListField(child=serializers.ListField(child=serializers.FloatField())))
class InertiaField(serializers.Field):
    """Principal inertias ``[Jx, Jy, Jz]`` or a full symmetric 3x3 tensor."""

    def _row(self, row):
        if not isinstance(row, list) or len(row) != 3:
            raise serializers.ValidationError('Expected three principal inertias or a 3x3 matrix.')
        for value in row:
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise serializers.ValidationError(f'Expected a finite number, got {value!r}.')
        return [float(value) for value in row]

    def to_internal_value(self, data):
        if isinstance(data, list) and data and all(isinstance(row, list) for row in data):
            if len(data) != 3:
                raise serializers.ValidationError('Expected three principal inertias or a 3x3 matrix.')
            matrix = np.array([self._row(row) for row in data])
            if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12):
                raise serializers.ValidationError('Inertia matrix must be symmetric.')
            if np.linalg.eigvalsh(matrix).min() <= 0:
                raise serializers.ValidationError('Inertia matrix must be positive definite.')
            return matrix.tolist()
        values = self._row(data)
        if min(values) <= 0:
            raise serializers.ValidationError('Principal inertias must be positive.')
        return values

    def to_representation(self, value):
        return value


class VehicleSerializer(serializers.Serializer):
    mass = serializers.FloatField(min_value=1e-6)
    inertia = InertiaField()
    gravity = serializers.FloatField(default=9.81, min_value=0.0)


class RotorSerializer(serializers.Serializer):
    position = vector_field()
    direction = vector_field()
    kappa = serializers.FloatField()
    f_max = serializers.FloatField(min_value=1e-6)


class GeometrySerializer(serializers.Serializer):
    preset = serializers.ChoiceField(choices=['tilted_cube', 'custom'], default='tilted_cube')
    arm_length = serializers.FloatField(default=0.2, min_value=1e-6)
    tilt_scale = vector_field(default=[1.0, 2.0, 3.0])
    kappa = serializers.FloatField(default=0.016)
    f_max = serializers.FloatField(default=6.0, min_value=1e-6)
    rotors = RotorSerializer(many=True, required=False)

    def validate(self, data):
        if data['preset'] == 'custom':
            rotors = data.get('rotors') or []
            if len(rotors) != ROTOR_COUNT:
                raise serializers.ValidationError({'rotors': [f'A custom geometry needs {ROTOR_COUNT} rotors.']})
        elif data.get('rotors'):
            raise serializers.ValidationError({'rotors': ['Rotors are only read for the custom preset.']})
        return data


class AllocationSerializer(serializers.Serializer):
    mode = serializers.ChoiceField(choices=['split', 'full'], default='split')


class MotorSerializer(serializers.Serializer):
    tau_rise = ScalarOrVectorField(positive=True)
    tau_fall = ScalarOrVectorField(positive=True)
    u_min = ScalarOrVectorField(default=0.0)
    discretization = serializers.ChoiceField(choices=['euler', 'exact'], default='euler')


class GainsSerializer(serializers.Serializer):
    kp_position = serializers.FloatField(min_value=0.0)
    kd_position = serializers.FloatField(min_value=0.0)
    ki_position = serializers.FloatField(min_value=0.0)
    kp_attitude = serializers.FloatField(min_value=1e-9)
    kd_attitude = serializers.FloatField(min_value=1e-9)
    e_p_max = serializers.FloatField(min_value=1e-9)
    e_v_max = serializers.FloatField(min_value=1e-9)
    flip_attitude_error_sign = serializers.BooleanField(default=True)


class TrajectorySerializer(serializers.Serializer):
    p_start = vector_field()
    p_end = vector_field()
    rot_axis = vector_field(default=[0.0, 0.0, 1.0])
    rot_angle = serializers.FloatField(default=0.0)
    duration = serializers.FloatField(min_value=1e-9)

    def validate_rot_axis(self, value):
        if math.sqrt(sum(c * c for c in value)) < 1e-12:
            raise serializers.ValidationError('Rotation axis cannot be zero.')
        return value


class OcpSerializer(serializers.Serializer):
    horizon = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    horizon_multiplier = serializers.FloatField(default=4.0, min_value=1e-9)
    control_horizon = serializers.IntegerField(default=20, min_value=1)
    r_delta_u = ScalarOrVectorField(default=1.0, positive=True)
    max_outer_iters = serializers.IntegerField(default=5, min_value=1)
    max_inner_iters = serializers.IntegerField(default=50, min_value=1)
    penalty_init = serializers.FloatField(default=10.0, min_value=1e-12)
    penalty_scale = serializers.FloatField(default=10.0)
    constraint_tol = serializers.FloatField(default=1e-6, min_value=1e-15)
    cost_tol = serializers.FloatField(default=1e-8, min_value=1e-15)
    gradient_tol = serializers.FloatField(default=1e-9, min_value=1e-15)
    warm_start_sigma = serializers.FloatField(default=1e-3, min_value=0.0)
    max_fallback_cycles = serializers.IntegerField(default=10, min_value=0)

    def validate_penalty_scale(self, value):
        if value <= 1:
            raise serializers.ValidationError('Penalty scale must exceed 1.')
        return value


PROVENANCE_SOURCES = ('paper', 'default')
SIGN_FLIP_KEY = 'gains.flip_attitude_error_sign'


class ProvenanceSerializer(serializers.Serializer):
    """Where each configured value comes from, plus free-text notes keyed the same way."""

    description = serializers.CharField(required=False, allow_blank=True)
    sources = serializers.DictField(child=serializers.ChoiceField(choices=PROVENANCE_SOURCES), default=dict)
    notes = serializers.DictField(child=serializers.CharField(), default=dict)


def config_keys(tree):
    """Dotted names of every value in a config tree (``dt``, ``ocp.horizon``, ...)."""
    keys = set()
    for key, value in tree.items():
        if key in ('name', 'provenance', 'output_dir'):
            continue
        if isinstance(value, dict):
            keys.update(f'{key}.{inner}' for inner in value)
        else:
            keys.add(key)
    return keys


class ExperimentConfigSerializer(serializers.Serializer):
    """Schema of an experiment ``*.cfg`` file."""

    name = serializers.CharField(max_length=200)
    provenance = ProvenanceSerializer(required=False)
    allocator = serializers.ChoiceField(choices=ALLOCATORS)
    dt = serializers.FloatField(min_value=1e-9)
    duration = serializers.FloatField(min_value=0.0)
    seed = serializers.IntegerField(default=0, min_value=0)
    output_dir = serializers.CharField(required=False, allow_blank=True, allow_null=True, default=None)
    vehicle = VehicleSerializer()
    geometry = GeometrySerializer()
    allocation = AllocationSerializer()
    motor = MotorSerializer()
    gains = GainsSerializer()
    trajectory = TrajectorySerializer()
    ocp = OcpSerializer()

    optional_sections = ('allocation', 'ocp')

    def to_internal_value(self, data):
        if isinstance(data, dict):
            data = {**{section: {} for section in self.optional_sections}, **data}
        return super().to_internal_value(data)

    def validate(self, data):
        errors = {}
        steps = data['duration'] / data['dt']
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            errors['duration'] = ['Duration must be a whole number of control steps.']
        tau_min = min(_as_list(data['motor']['tau_rise']) + _as_list(data['motor']['tau_fall']))
        if data['dt'] > tau_min:
            errors['dt'] = [f'Control step exceeds the fastest motor time constant ({tau_min} s).']
        ocp = data['ocp']
        if ocp.get('horizon') is not None and ocp['control_horizon'] > ocp['horizon']:
            errors.setdefault('ocp', []).append('Control horizon cannot exceed the prediction horizon.')
        provenance = data.get('provenance')
        if provenance is not None:
            provenance_errors = _provenance_errors(provenance, data)
            if provenance_errors:
                errors['provenance'] = provenance_errors
        if errors:
            raise serializers.ValidationError(errors)
        return data


def _as_list(value):
    return list(value) if isinstance(value, list) else [value]


def _provenance_errors(provenance, data):
    known = config_keys(data)
    errors = [f'Unknown config value {key!r} in sources.' for key in provenance['sources'] if key not in known]
    errors += [f'Unknown config value {key!r} in notes.' for key in provenance['notes'] if key not in known]
    if data['gains']['flip_attitude_error_sign'] and not provenance['notes'].get(SIGN_FLIP_KEY):
        errors.append(f'A note under {SIGN_FLIP_KEY!r} must record why the attitude error sign is flipped.')
    return errors


class PerMotorSummarySerializer(serializers.Serializer):
    motor = serializers.IntegerField()
    total_abs_delta_u = serializers.FloatField()
    mean_abs_delta_u = serializers.FloatField()
    max_abs_delta_u = serializers.FloatField()
    std_delta_u = serializers.FloatField()
    min_thrust = serializers.FloatField()


class RunMetricsSerializer(serializers.Serializer):
    """Shape of ``metrics.json``."""

    allocator = serializers.CharField()
    steps = serializers.IntegerField()
    mean_pos_err = serializers.FloatField()
    rms_pos_err = serializers.FloatField()
    mean_ori_err = serializers.FloatField()
    rms_ori_err = serializers.FloatField()
    mean_ori_err_prewrap = serializers.FloatField()
    rms_ori_err_prewrap = serializers.FloatField()
    prewrap_steps = serializers.IntegerField()
    mean_ori_err_geodesic = serializers.FloatField()
    rms_ori_err_geodesic = serializers.FloatField()
    total_delta_u = serializers.FloatField()
    min_motor_thrust = serializers.FloatField()
    zero_thrust_steps = serializers.IntegerField()
    fallback_cycles = serializers.IntegerField()
    solver_cycles = serializers.IntegerField()
    clamped_steps = serializers.IntegerField()
    max_wrench_residual = serializers.FloatField()
    max_wrench_request_error = serializers.FloatField()
    per_motor = PerMotorSummarySerializer(many=True)


class ExperimentRunSerializer(serializers.ModelSerializer):
    duration_seconds = serializers.SerializerMethodField()

    @extend_schema_field(serializers.FloatField(allow_null=True))
    def get_duration_seconds(self, obj: ExperimentRun):
        return obj.wall_time

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'config_name', 'allocator', 'seed', 'status', 'steps', 'fallback_cycles', 'clamped_steps',
            'metrics', 'config', 'output_dir', 'error_message', 'comparison_group',
            'started_at', 'finished_at', 'duration_seconds',
        ]
        read_only_fields = fields
