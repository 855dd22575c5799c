import numpy as np
from django.test import SimpleTestCase

from apps.dynamics.so3 import log_so3, rotation_about
from apps.dynamics.state import VehicleParams, VehicleState, integrate

from .control import (
    ControllerGains,
    ControllerState,
    attitude_control,
    attitude_error,
    position_control,
    saturate,
)
from .exceptions import ControllerConfigurationError
from .trajectory import TrajectorySpec, evaluate, reference_at, reference_window, septic_coeffs

PARAMS = VehicleParams(m_R=0.5, J_b=np.diag([0.25, 0.25, 0.3]))


def flip_maneuver():
    return TrajectorySpec(
        p_start=(0.0, 0.0, 3.0), p_end=(1.0, 1.0, 2.0), rot_axis=(0.0, 1.0, 0.0), rot_angle=2 * np.pi, duration=60.0
    )


class SepticTests(SimpleTestCase):
    def test_endpoints(self):
        c = septic_coeffs(-1.5, 2.0, 4.0)
        self.assertAlmostEqual(evaluate(c, 0.0), -1.5, delta=1e-12)
        self.assertAlmostEqual(evaluate(c, 4.0), 2.0, delta=1e-12)

    def test_derivatives_vanish_at_endpoints(self):
        c = septic_coeffs(0.3, 1.7, 2.5)
        for order in (1, 2, 3):
            for t in (0.0, 2.5):
                self.assertAlmostEqual(evaluate(c, t, order), 0.0, delta=1e-9)

    def test_midpoint_and_boundary_value_system(self):
        x0, xT, T = 0.2, 1.4, 3.0
        rows, rhs = [], []
        for t, value in ((0.0, x0), (T, xT)):
            for order in range(4):
                row = np.zeros(8)
                for k in range(order, 8):
                    row[k] = np.prod(np.arange(k - order + 1, k + 1)) * t ** (k - order)
                rows.append(row)
                rhs.append(value if order == 0 else 0.0)
        oracle = np.linalg.solve(np.array(rows), np.array(rhs))
        np.testing.assert_allclose(septic_coeffs(x0, xT, T), oracle, rtol=1e-9, atol=1e-12)
        self.assertAlmostEqual(evaluate(oracle, T / 2), (x0 + xT) / 2, delta=1e-12)

    def test_non_positive_duration_is_rejected(self):
        with self.assertRaises(ControllerConfigurationError):
            septic_coeffs(0.0, 1.0, 0.0)


class ReferenceTests(SimpleTestCase):
    def test_start_of_maneuver(self):
        ref = reference_at(flip_maneuver(), 0.0)
        np.testing.assert_allclose(ref.p_r, [0.0, 0.0, 3.0], atol=1e-15)
        np.testing.assert_allclose(ref.R_r, np.eye(3), atol=1e-15)
        np.testing.assert_allclose(ref.v_r, np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(ref.a_r, np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(ref.w_r, np.zeros(3), atol=1e-15)

    def test_full_turn_returns_to_identity(self):
        ref = reference_at(flip_maneuver(), 60.0)
        np.testing.assert_allclose(ref.R_r, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(ref.p_r, [1.0, 1.0, 2.0], atol=1e-9)

    def test_midpoint_of_flip_maneuver(self):
        ref = reference_at(flip_maneuver(), 30.0)
        np.testing.assert_allclose(ref.p_r, [0.5, 0.5, 2.5], atol=1e-9)
        np.testing.assert_allclose(ref.R_r, rotation_about([0, 1, 0], np.pi), atol=1e-9)

    def test_times_outside_the_maneuver_are_clamped(self):
        spec = flip_maneuver()
        np.testing.assert_array_equal(reference_at(spec, -1.0).p_r, reference_at(spec, 0.0).p_r)
        np.testing.assert_array_equal(reference_at(spec, 61.0).R_r, reference_at(spec, 60.0).R_r)

    def test_angular_rates_follow_the_axis(self):
        ref = reference_at(flip_maneuver(), 12.0)
        self.assertEqual(ref.w_r[0], 0.0)
        self.assertEqual(ref.w_r[2], 0.0)
        self.assertGreater(ref.w_r[1], 0.0)

    def test_velocity_matches_differentiated_position(self):
        dt = 0.002
        window = reference_window(flip_maneuver(), 0.0, 30001, dt)
        central = (window.p_r[2:] - window.p_r[:-2]) / (2 * dt)
        self.assertLess(np.max(np.abs(central - window.v_r[1:-1])), 1e-4)

    def test_window_indexing(self):
        window = reference_window(flip_maneuver(), 10.0, 5, 0.002)
        self.assertEqual(len(window), 5)
        np.testing.assert_allclose(window[3].p_r, reference_at(flip_maneuver(), 10.006).p_r, atol=1e-12)

    def test_axis_must_be_unit(self):
        with self.assertRaises(ControllerConfigurationError):
            TrajectorySpec(p_start=np.zeros(3), p_end=np.zeros(3), rot_axis=(0, 2, 0), rot_angle=1.0, duration=1.0)


class PositionControlTests(SimpleTestCase):
    def setUp(self):
        self.gains = ControllerGains.for_mass(PARAMS.m_R)
        self.hover = TrajectorySpec.hover((0.0, 0.0, 3.0), 10.0)

    def test_hover_feedforward(self):
        ref = reference_at(self.hover, 1.0)
        f_w, _ = position_control(ref, VehicleState.at_rest((0, 0, 3)), self.gains, ControllerState.initial(), 0.002, PARAMS)
        np.testing.assert_allclose(f_w, [0.0, 0.0, PARAMS.m_R * PARAMS.g], atol=1e-15)

    def test_position_error_is_saturated(self):
        ref = reference_at(TrajectorySpec.hover((10.0, 0.0, 0.0), 1.0), 0.0)
        f_w, ctrl = position_control(ref, VehicleState.at_rest(), self.gains, ControllerState.initial(), 0.002, PARAMS)
        expected = PARAMS.m_R * PARAMS.g * np.array([0, 0, 1.0]) + self.gains.Kp_p @ [0.5, 0, 0] + self.gains.Ki_p @ [0.001, 0, 0]
        np.testing.assert_allclose(f_w, expected, atol=1e-12)
        np.testing.assert_allclose(ctrl.e_p_I, [0.001, 0.0, 0.0], atol=1e-15)

    def test_integral_accumulates_exactly(self):
        ref = reference_at(TrajectorySpec.hover((0.1, 0.0, 0.0), 1.0), 0.0)
        ctrl = ControllerState.initial()
        for _ in range(500):
            _, ctrl = position_control(ref, VehicleState.at_rest(), self.gains, ctrl, 0.002, PARAMS)
        np.testing.assert_allclose(ctrl.e_p_I, [0.1, 0.0, 0.0], atol=1e-12)

    def test_saturation_is_idempotent(self):
        x = np.random.default_rng(6).normal(scale=2.0, size=(50, 3))
        np.testing.assert_array_equal(saturate(saturate(x, 0.5), 0.5), saturate(x, 0.5))

    def test_invalid_gains_are_rejected(self):
        with self.assertRaises(ControllerConfigurationError):
            ControllerGains.for_mass(PARAMS.m_R, kp_R=0.0)
        with self.assertRaises(ControllerConfigurationError):
            ControllerGains.for_mass(PARAMS.m_R, kp=-1.0)


class AttitudeControlTests(SimpleTestCase):
    def setUp(self):
        self.gains = ControllerGains.for_mass(PARAMS.m_R)

    def test_zero_torque_on_reference(self):
        ref = reference_at(TrajectorySpec.hover((0, 0, 0), 1.0), 0.0)
        tau = attitude_control(ref, VehicleState.at_rest(), self.gains, PARAMS)
        np.testing.assert_array_equal(tau, np.zeros(3))

    def test_error_about_yaw(self):
        theta = 0.3
        e_R = attitude_error(np.eye(3), rotation_about([0, 0, 1], theta))
        np.testing.assert_allclose(e_R, [0.0, 0.0, np.sin(theta)], atol=1e-15)

    def test_gyroscopic_term_only(self):
        params = VehicleParams(m_R=1.0, J_b=np.diag([1.0, 2.0, 3.0]))
        ref = reference_at(TrajectorySpec.hover((0, 0, 0), 1.0), 0.0)
        ref = type(ref)(p_r=ref.p_r, v_r=ref.v_r, a_r=ref.a_r, R_r=ref.R_r, w_r=np.ones(3), w_dot_r=ref.w_dot_r)
        state = VehicleState.at_rest().replace(w=np.ones(3))
        np.testing.assert_allclose(attitude_control(ref, state, self.gains, params), [-1.0, 2.0, -1.0], atol=1e-15)

    def simulate_tilt(self, axis, flip_error_sign, seconds=3.0, dt=0.002):
        ref = reference_at(TrajectorySpec.hover((0, 0, 0), 10.0), 0.0)
        state = VehicleState.at_rest(R=rotation_about(axis, 0.1))
        for _ in range(int(round(seconds / dt))):
            tau = attitude_control(ref, state, self.gains, PARAMS, flip_error_sign=flip_error_sign)
            state = integrate(state, [0, 0, PARAMS.weight], tau, PARAMS, dt)
        return state

    def test_attitude_loop_recovers_from_tilt(self):
        for axis in ([1, 0, 0], [0, 1, 0], [0, 0, 1]):
            state = self.simulate_tilt(axis, flip_error_sign=True)
            self.assertLess(np.linalg.norm(attitude_error(np.eye(3), state.R)), 0.01)
            self.assertLess(np.linalg.norm(log_so3(state.R)), 0.01)

    def test_unflipped_error_sign_diverges(self):
        state = self.simulate_tilt([1, 0, 0], flip_error_sign=False)
        self.assertGreater(np.linalg.norm(log_so3(state.R)), 1.0)
