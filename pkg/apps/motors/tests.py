import numpy as np
from django.test import SimpleTestCase

from .exceptions import MotorConfigurationError
from .model import MotorBank, MotorParams, motor_step, rising_mask, settling_time

TAU_RISE = 0.15
TAU_FALL = 0.021
DT = 0.002


class MotorStepTests(SimpleTestCase):
    def setUp(self):
        self.params = MotorParams(tau_rise=TAU_RISE, tau_fall=TAU_FALL)

    def test_matching_command_leaves_output_unchanged(self):
        u = np.linspace(0.5, 4.0, 8)
        np.testing.assert_array_equal(motor_step(u, u, DT, self.params), u)

    def test_rise_follows_geometric_recursion(self):
        u = np.zeros(1)
        for _ in range(75):
            u = motor_step(u, np.ones(1), DT, self.params)
        expected = 1.0 - (1.0 - DT / TAU_RISE) ** 75
        self.assertAlmostEqual(u[0], expected, delta=1e-12)
        self.assertAlmostEqual(u[0], 0.6341, delta=1e-3)

    def test_fall_is_faster_than_rise(self):
        up, down = np.zeros(1), np.ones(1)
        for _ in range(10):
            up = motor_step(up, np.ones(1), DT, self.params)
            down = motor_step(down, np.zeros(1), DT, self.params)
        fall_residual = down[0]
        rise_residual = 1.0 - up[0]
        self.assertAlmostEqual(fall_residual, (1.0 - DT / TAU_FALL) ** 10, delta=1e-12)
        self.assertLess(fall_residual, rise_residual)

    def test_ties_use_rise_constant(self):
        np.testing.assert_array_equal(rising_mask(np.array([1.0, 2.0]), np.array([1.0, 1.0])), [True, False])

    def test_monotone_convergence_without_overshoot(self):
        u = np.array([0.0, 6.0, 3.0])
        command = np.array([4.0, 1.0, 3.0])
        for _ in range(200):
            previous = u
            u = motor_step(u, command, DT, self.params)
            moving = previous != command
            self.assertTrue(np.all(np.abs(command - u)[moving] < np.abs(command - previous)[moving]))
            self.assertTrue(np.all(np.sign(command - u) * np.sign(command - previous) >= 0))
        self.assertEqual(u[2], 3.0)

    def test_output_stays_nonnegative_for_bounded_commands(self):
        rng = np.random.default_rng(5)
        u = np.zeros(8)
        for _ in range(2000):
            u = motor_step(u, rng.uniform(0.0, 6.0, size=8), DT, self.params)
            self.assertTrue(np.all(u >= 0))

    def test_frozen_regime_override(self):
        u = motor_step(np.ones(2), np.zeros(2), DT, self.params, rising=np.array([True, False]))
        np.testing.assert_allclose(u, [1.0 - DT / TAU_RISE, 1.0 - DT / TAU_FALL])

    def test_per_motor_time_constants(self):
        params = MotorParams(tau_rise=np.linspace(0.1, 0.2, 8), tau_fall=0.02)
        u = motor_step(np.zeros(8), np.ones(8), DT, params)
        np.testing.assert_allclose(u, DT / np.linspace(0.1, 0.2, 8))

    def test_exact_discretisation(self):
        u = motor_step(np.zeros(1), np.ones(1), DT, self.params, mode='exact')
        self.assertAlmostEqual(u[0], 1.0 - np.exp(-DT / TAU_RISE), delta=1e-15)

    def test_step_longer_than_fall_constant_is_rejected(self):
        with self.assertRaises(MotorConfigurationError):
            motor_step(np.zeros(8), np.ones(8), 0.05, self.params)

    def test_non_positive_time_constants_are_rejected(self):
        with self.assertRaises(MotorConfigurationError):
            MotorParams(tau_rise=0.0, tau_fall=0.02)


class MotorTimingTests(SimpleTestCase):
    def setUp(self):
        self.params = MotorParams(tau_rise=TAU_RISE, tau_fall=TAU_FALL)

    def test_ninety_five_percent_rise_time(self):
        rise = settling_time(self.params, DT, 'rise')
        self.assertAlmostEqual(rise, 224 * DT, delta=1e-12)
        self.assertTrue(0.42 <= rise <= 0.48)

    def test_ninety_five_percent_fall_time(self):
        fall = settling_time(self.params, DT, 'fall')
        self.assertAlmostEqual(fall, 30 * DT, delta=1e-12)
        self.assertTrue(0.058 <= fall <= 0.068)

    def test_asymmetry(self):
        self.assertGreater(settling_time(self.params, DT, 'rise'), settling_time(self.params, DT, 'fall'))

    def test_bank_tracks_commands(self):
        bank = MotorBank(np.zeros(8), self.params, DT)
        bank.step(np.full(8, 2.0))
        np.testing.assert_allclose(bank.u_act, np.full(8, 2.0 * DT / TAU_RISE))
