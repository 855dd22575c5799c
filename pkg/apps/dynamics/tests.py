import numpy as np
from django.test import SimpleTestCase

from .exceptions import InvalidArgumentError, ParameterError
from .so3 import expm_so3, hat, log_so3, orthonormality_error, rotation_about, vee
from .state import VehicleParams, VehicleState, accelerations, integrate, mechanical_energy


class HatVeeTests(SimpleTestCase):
    def test_hat_of_zero_is_zero(self):
        np.testing.assert_array_equal(hat([0, 0, 0]), np.zeros((3, 3)))

    def test_hat_of_unit_z(self):
        np.testing.assert_array_equal(hat([0, 0, 1]), [[0, -1, 0], [1, 0, 0], [0, 0, 0]])

    def test_hat_matches_cross_product(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            v, u = rng.normal(size=3), rng.normal(size=3)
            np.testing.assert_allclose(hat(v) @ u, np.cross(v, u), rtol=0, atol=1e-15)
            np.testing.assert_array_equal(hat(v).T, -hat(v))

    def test_vee_inverts_hat(self):
        np.testing.assert_array_equal(vee(np.zeros((3, 3))), np.zeros(3))
        np.testing.assert_array_equal(vee(hat([1, 2, 3])), [1, 2, 3])
        rng = np.random.default_rng(1)
        v = rng.normal(size=(100, 3))
        np.testing.assert_allclose(vee(hat(v)), v, rtol=0, atol=1e-15)

    def test_vee_rejects_non_skew_input(self):
        with self.assertRaises(InvalidArgumentError):
            vee(np.eye(3))

    def test_exponential_and_log_are_inverse(self):
        rng = np.random.default_rng(2)
        phi = rng.normal(size=(50, 3))
        phi *= (rng.uniform(0.0, 3.0, size=50) / np.linalg.norm(phi, axis=1))[:, None]
        R = expm_so3(phi)
        self.assertLess(np.max(orthonormality_error(R)), 1e-12)
        np.testing.assert_allclose(log_so3(R), phi, atol=1e-10)

    def test_exponential_small_angle_branch(self):
        phi = np.array([1e-7, -2e-7, 3e-7])
        np.testing.assert_allclose(expm_so3(phi), np.eye(3) + hat(phi), atol=1e-13)


class AccelerationTests(SimpleTestCase):
    def setUp(self):
        self.params = VehicleParams(m_R=0.5, J_b=np.diag([0.25, 0.25, 0.3]))

    def test_hover_thrust_cancels_gravity(self):
        state = VehicleState.at_rest()
        v_dot, w_dot = accelerations(state, [0, 0, self.params.weight], np.zeros(3), self.params)
        np.testing.assert_allclose(v_dot, np.zeros(3), atol=1e-15)
        np.testing.assert_array_equal(w_dot, np.zeros(3))

    def test_free_fall(self):
        v_dot, w_dot = accelerations(VehicleState.at_rest(), np.zeros(3), np.zeros(3), self.params)
        np.testing.assert_array_equal(v_dot, [0, 0, -9.81])
        np.testing.assert_array_equal(w_dot, np.zeros(3))

    def test_gyroscopic_coupling(self):
        params = VehicleParams(m_R=1.0, J_b=np.diag([1.0, 2.0, 3.0]))
        state = VehicleState.at_rest().replace(w=np.ones(3))
        _, w_dot = accelerations(state, np.zeros(3), np.zeros(3), params)
        np.testing.assert_allclose(w_dot, [-1.0, 1.0, -1.0 / 3.0], atol=1e-15)

    def test_linear_in_wrench(self):
        rng = np.random.default_rng(3)
        state = VehicleState(
            p=rng.normal(size=3), v=rng.normal(size=3), R=expm_so3(rng.normal(size=3)), w=rng.normal(size=3)
        )
        f1, f2, t1, t2 = rng.normal(size=(4, 3))
        a, b = 0.7, -1.3
        v_mix, w_mix = accelerations(state, a * f1 + b * f2, a * t1 + b * t2, self.params)
        v1, w1 = accelerations(state, f1, t1, self.params)
        v2, w2 = accelerations(state, f2, t2, self.params)
        # gravity and gyroscopic terms are affine offsets
        v0, w0 = accelerations(state, np.zeros(3), np.zeros(3), self.params)
        np.testing.assert_allclose(v_mix - v0, a * (v1 - v0) + b * (v2 - v0), atol=1e-12)
        np.testing.assert_allclose(w_mix - w0, a * (w1 - w0) + b * (w2 - w0), atol=1e-12)

    def test_invalid_inertia_is_rejected(self):
        with self.assertRaises(ParameterError):
            VehicleParams(m_R=1.0, J_b=np.diag([1.0, -1.0, 1.0]))
        with self.assertRaises(ParameterError):
            VehicleParams(m_R=1.0, J_b=[[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with self.assertRaises(ParameterError):
            VehicleParams(m_R=0.0, J_b=np.eye(3))


class IntegratorTests(SimpleTestCase):
    dt = 0.002

    def setUp(self):
        self.params = VehicleParams(m_R=0.5, J_b=np.diag([0.25, 0.25, 0.3]))

    def test_hover_equilibrium_is_fixed_point(self):
        state = VehicleState.at_rest((0.0, 0.0, 3.0))
        out = integrate(state, [0, 0, self.params.weight], np.zeros(3), self.params, self.dt)
        np.testing.assert_allclose(out.p, state.p, atol=1e-12)
        np.testing.assert_allclose(out.v, state.v, atol=1e-12)
        np.testing.assert_allclose(out.R, state.R, atol=1e-12)
        np.testing.assert_allclose(out.w, state.w, atol=1e-12)

    def test_constant_rate_rotation_matches_closed_form(self):
        state = VehicleState.at_rest().replace(w=np.array([0.0, 0.0, np.pi]))
        for _ in range(500):
            state = integrate(state, np.zeros(3), np.zeros(3), self.params, self.dt)
        expected = rotation_about([0, 0, 1], np.pi)
        angle_error = np.linalg.norm(log_so3(expected.T @ state.R))
        self.assertLess(angle_error, 1e-6)

    def test_ballistic_flight(self):
        state = VehicleState.at_rest().replace(v=np.array([1.0, 0.0, 0.0]))
        for _ in range(500):
            state = integrate(state, np.zeros(3), np.zeros(3), self.params, self.dt)
        np.testing.assert_allclose(state.p, [1.0, 0.0, -9.81 / 2], atol=1e-3)

    def test_rotation_stays_orthonormal_over_long_runs(self):
        params = VehicleParams(m_R=0.5, J_b=np.diag([0.2, 0.3, 0.4]))
        state = VehicleState.at_rest().replace(w=np.array([1.0, -2.0, 0.5]))
        for _ in range(30000):
            state = integrate(state, np.zeros(3), np.zeros(3), params, self.dt)
        self.assertLessEqual(state.orthonormality_error(), 1e-9)
        self.assertTrue(abs(np.linalg.det(state.R) - 1.0) <= 1e-9)

    def test_free_fall_energy_is_conserved(self):
        state = VehicleState.at_rest((0.0, 0.0, 10.0)).replace(v=np.array([0.3, -0.2, 1.0]))
        start = mechanical_energy(state, self.params)
        for _ in range(5000):
            state = integrate(state, np.zeros(3), np.zeros(3), self.params, self.dt)
        drift = abs(mechanical_energy(state, self.params) - start) / abs(start)
        self.assertLess(drift, 1e-3)

    def test_batched_states_match_single_steps(self):
        rng = np.random.default_rng(4)
        batch = VehicleState(
            p=rng.normal(size=(5, 3)), v=rng.normal(size=(5, 3)),
            R=expm_so3(rng.normal(size=(5, 3))), w=rng.normal(size=(5, 3)),
        )
        f, tau = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        out = integrate(batch, f, tau, self.params, self.dt)
        for i in range(5):
            single = integrate(
                VehicleState(batch.p[i], batch.v[i], batch.R[i], batch.w[i]), f[i], tau[i], self.params, self.dt
            )
            np.testing.assert_allclose(out.R[i], single.R, atol=1e-14)
            np.testing.assert_allclose(out.w[i], single.w, atol=1e-14)

    def test_non_positive_step_is_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            integrate(VehicleState.at_rest(), np.zeros(3), np.zeros(3), self.params, 0.0)
