import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import minimize

from apps.allocation.geometry import RotorGeometry, apply_nullspace, build_allocation
from apps.allocation.mbno import feasible_center
from apps.controller.control import ControllerGains
from apps.controller.trajectory import TrajectorySpec, reference_at, reference_window
from apps.dynamics.state import VehicleParams, VehicleState
from apps.motors.model import MotorParams, motor_step

from .exceptions import OcpConfigurationError, SolverFailureError
from .linearize import linearize
from .model import P_SLICE, U_SLICE, V_SLICE, ClosedLoopModel, stack_states
from .receding import RecedingHorizonAllocator, horizon_from_constants, receding_step, warm_start
from .rollout import rollout, rollout_steps
from .solver import LINE_SEARCH_STEPS, OcpConfig, al_ilqr_solve, constraint_values

DT = 0.002
TAU_RISE = 0.15
TAU_FALL = 0.021
PARAMS = VehicleParams(m_R=0.5, J_b=np.diag([0.25, 0.25, 0.3]))
MOTOR = MotorParams(tau_rise=TAU_RISE, tau_fall=TAU_FALL)
ALLOC = build_allocation(RotorGeometry.tilted_cube())
HOVER_POSITION = np.array([0.0, 0.0, 1.0])


def closed_loop(gains=None):
    return ClosedLoopModel(
        vehicle=PARAMS, alloc=ALLOC, motor=MOTOR, gains=gains or ControllerGains.for_mass(PARAMS.m_R), dt=DT
    )


def ocp(h, h_c=None, **overrides):
    values = dict(h=h, h_c=h if h_c is None else h_c, R_delta_u=np.eye(8), u_max=6.0, dt=DT)
    values.update(overrides)
    return OcpConfig(**values)


def hover_refs(h):
    return reference_window(TrajectorySpec.hover(HOVER_POSITION, 5.0), 0.0, h, DT)


def maneuver_refs(h, t0=0.4):
    spec = TrajectorySpec(
        p_start=HOVER_POSITION, p_end=(0.5, 0.3, 1.2), rot_axis=(0.0, 1.0, 0.0), rot_angle=0.6, duration=2.0
    )
    return reference_window(spec, t0, h, DT)


def hover_thrust(model, X=(0.0, 0.0)):
    """Motor outputs that hold the vehicle at rest at the hover point."""
    ref = reference_at(TrajectorySpec.hover(HOVER_POSITION, 5.0), 0.0)
    resting = model.initial_state(VehicleState.at_rest(HOVER_POSITION), np.zeros(8))
    u_0 = model.command(resting, ref)[0]
    return apply_nullspace(u_0, ALLOC, np.asarray(X, dtype=float))


def offset_start(model, offset=(0.04, -0.03, 0.02)):
    u_0 = hover_thrust(model)
    X_c, _ = feasible_center(u_0, ALLOC, np.zeros(8), np.full(8, 6.0))
    vehicle = VehicleState.at_rest(HOVER_POSITION + np.asarray(offset))
    return model.initial_state(vehicle, apply_nullspace(u_0, ALLOC, X_c))


class RolloutTests(SimpleTestCase):
    def setUp(self):
        self.model = closed_loop()

    def test_zero_shift_matches_stepping_the_closed_loop(self):
        h = 15
        refs = maneuver_refs(h)
        start = offset_start(self.model)
        result = rollout(start, np.zeros((h, 2)), refs, self.model, np.eye(8))

        states, state = [start], start
        for k in range(h):
            state, record = self.model.step(state, np.zeros(2), refs[k])
            states.append(state)
            np.testing.assert_allclose(result.u_cmd_seq[k], record.u_0, atol=1e-12)
        expected = stack_states(states)
        np.testing.assert_allclose(result.states.vehicle.p, expected.vehicle.p, atol=1e-12)
        np.testing.assert_allclose(result.states.vehicle.R, expected.vehicle.R, atol=1e-12)
        np.testing.assert_allclose(result.states.u_act, expected.u_act, atol=1e-12)

    def test_hover_equilibrium_costs_nothing(self):
        h = 20
        X = np.array([2.5, 0.0])
        start = self.model.initial_state(VehicleState.at_rest(HOVER_POSITION), hover_thrust(self.model, X))
        result = rollout(start, np.tile(X, (h, 1)), hover_refs(h), self.model, np.eye(8))
        self.assertLess(result.cost, 1e-20)
        self.assertLess(np.max(np.abs(result.states.vehicle.p - HOVER_POSITION)), 1e-12)

    def test_single_step_cost_is_weighted_motor_increment(self):
        refs = hover_refs(1)
        u_prev = np.linspace(1.0, 4.5, 8)
        start = self.model.initial_state(VehicleState.at_rest(HOVER_POSITION), u_prev)
        X = np.array([[1.2, -0.4]])
        weight = np.diag(np.arange(1.0, 9.0))
        result = rollout(start, X, refs, self.model, weight)

        u_cmd = apply_nullspace(self.model.command(start, refs[0])[0], ALLOC, X[0])
        delta = motor_step(u_prev, u_cmd, DT, MOTOR) - u_prev
        self.assertAlmostEqual(result.cost, float(np.sum(np.arange(1.0, 9.0) * delta ** 2)), delta=1e-14)
        np.testing.assert_allclose(result.delta_u[0], delta, atol=1e-15)

    def test_nullspace_shift_never_changes_requested_wrench(self):
        h = 10
        rng = np.random.default_rng(4)
        result = rollout(offset_start(self.model), rng.normal(size=(h, 2)), maneuver_refs(h), self.model, np.eye(8))
        residual = (result.u_cmd_seq - result.u_0_seq) @ ALLOC.A.T
        self.assertLessEqual(np.max(np.abs(residual)), 1e-9)


    def test_batched_step_lengths_match_single_rollouts(self):
        h = 8
        rng = np.random.default_rng(12)
        refs = maneuver_refs(h)
        start = offset_start(self.model)
        nominal = rollout(start, rng.normal(scale=0.3, size=(h, 2)), refs, self.model, np.eye(8))
        K = rng.normal(scale=0.05, size=(h, 2, 23))
        d = rng.normal(scale=0.2, size=(h, 2))
        alphas = (1.0, 0.25, 2.0 ** -7)
        batched = rollout_steps(start, nominal, d, K, alphas, refs, self.model, np.eye(8))
        for alpha, candidate in zip(alphas, batched):
            single = rollout(start, nominal.X_seq + alpha * d, refs, self.model, np.eye(8), feedback=(nominal, K))
            np.testing.assert_allclose(candidate.X_seq, single.X_seq, atol=1e-12)
            np.testing.assert_allclose(candidate.u_act_seq, single.u_act_seq, atol=1e-12)
            np.testing.assert_allclose(candidate.states.vehicle.R, single.states.vehicle.R, atol=1e-12)
            self.assertAlmostEqual(candidate.cost, single.cost, delta=1e-12)


class LinearizeTests(SimpleTestCase):
    def setUp(self):
        self.model = closed_loop()
        self.h = 6
        self.refs = maneuver_refs(self.h)
        self.result = rollout(
            offset_start(self.model), np.full((self.h, 2), 0.3), self.refs, self.model, np.eye(8)
        )

    def test_shapes(self):
        lin = linearize(self.result, self.refs, self.model)
        self.assertEqual(lin.A.shape, (self.h, 23, 23))
        self.assertEqual(lin.B.shape, (self.h, 23, 2))
        self.assertEqual(lin.U0_x.shape, (self.h, 8, 23))

    def test_motor_rows_of_input_jacobian(self):
        lin = linearize(self.result, self.refs, self.model)
        rising = self.result.rising()
        for k in range(self.h):
            gain = np.where(rising[k], DT / TAU_RISE, DT / TAU_FALL)
            np.testing.assert_allclose(lin.B[k][U_SLICE], gain[:, None] * ALLOC.n_A, atol=1e-9)

    def test_halving_the_step_is_consistent(self):
        coarse = linearize(self.result, self.refs, self.model, step=1e-5)
        fine = linearize(self.result, self.refs, self.model, step=5e-6)
        np.testing.assert_allclose(fine.A, coarse.A, rtol=1e-5, atol=1e-6)
        np.testing.assert_allclose(fine.B, coarse.B, rtol=1e-5, atol=1e-6)

    def test_position_follows_velocity_without_position_feedback(self):
        gains = ControllerGains(Kp_p=0.0, Kd_p=0.0, Ki_p=0.0, Kp_R=30.0, Kd_R=8.0, e_p_max=0.5, e_v_max=1.0)
        model = closed_loop(gains)
        result = rollout(offset_start(model), np.zeros((self.h, 2)), self.refs, model, np.eye(8))
        lin = linearize(result, self.refs, model)
        for k in range(self.h):
            np.testing.assert_allclose(lin.A[k][P_SLICE, V_SLICE], DT * np.eye(3), atol=2e-8)


class OcpConfigTests(SimpleTestCase):
    def test_control_horizon_must_fit(self):
        with self.assertRaises(OcpConfigurationError):
            ocp(10, h_c=11)
        with self.assertRaises(OcpConfigurationError):
            ocp(10, h_c=0)

    def test_weight_must_be_positive_definite(self):
        with self.assertRaises(OcpConfigurationError):
            ocp(10, R_delta_u=-np.eye(8))

    def test_penalty_scale_must_grow(self):
        with self.assertRaises(OcpConfigurationError):
            ocp(10, penalty_scale=1.0)

    def test_scalar_weight_and_bounds_are_expanded(self):
        cfg = ocp(10, R_delta_u=2.0, u_max=5.0)
        np.testing.assert_array_equal(cfg.R_delta_u, 2.0 * np.eye(8))
        np.testing.assert_array_equal(cfg.u_max, np.full(8, 5.0))

    def test_initial_guess_shape_is_checked(self):
        model = closed_loop()
        with self.assertRaises(OcpConfigurationError):
            al_ilqr_solve(offset_start(model), hover_refs(5), np.zeros((4, 2)), ocp(5), model)


class UnconstrainedSolveTests(SimpleTestCase):
    def setUp(self):
        self.model = closed_loop()

    def solve(self, seed, h):
        rng = np.random.default_rng(seed)
        start = offset_start(self.model, offset=rng.normal(scale=0.03, size=3))
        refs = maneuver_refs(h, t0=rng.uniform(0.0, 1.5))
        cfg = ocp(h, u_min=-50.0, u_max=50.0)
        X_init = rng.normal(scale=0.5, size=(h, 2))
        self.X_init = X_init
        return start, refs, cfg, al_ilqr_solve(start, refs, X_init, cfg, self.model)

    def test_inactive_constraints_need_one_outer_iteration(self):
        _, _, _, solution = self.solve(seed=0, h=8)
        self.assertTrue(solution.converged)
        self.assertEqual(solution.outer_iterations, 1)
        self.assertEqual(len(solution.violation_history), 1)
        np.testing.assert_array_equal(solution.multipliers, 0.0)
        self.assertEqual(solution.max_violation, 0.0)

    def test_converged_solutions_are_stationary(self):
        step = 1e-5
        converged = 0
        for seed in range(20):
            start, refs, cfg, solution = self.solve(seed, h=6)
            if not solution.converged:
                continue
            converged += 1
            gradient = np.zeros_like(solution.X_seq)
            for index in np.ndindex(*solution.X_seq.shape):
                bump = np.zeros_like(solution.X_seq)
                bump[index] = step
                up = rollout(start, solution.X_seq + bump, refs, self.model, cfg.R_delta_u).cost
                down = rollout(start, solution.X_seq - bump, refs, self.model, cfg.R_delta_u).cost
                gradient[index] = (up - down) / (2 * step)
            self.assertLessEqual(np.max(np.abs(gradient)), 1e-3, msg=f'seed {seed}')
        self.assertGreaterEqual(converged, 15)

    def test_collapsed_line_search_is_not_converged(self):
        h = 6
        rng = np.random.default_rng(3)
        start = offset_start(self.model)
        refs = maneuver_refs(h)
        X_init = rng.normal(scale=0.5, size=(h, 2))
        cfg = ocp(h, u_min=-50.0, u_max=50.0, armijo=1e6, regularization_max=1e-4)
        solution = al_ilqr_solve(start, refs, X_init, cfg, self.model)
        self.assertFalse(solution.converged)
        self.assertEqual(solution.outer_iterations, 1)
        self.assertEqual(len(solution.cost_history[0]), 1)
        np.testing.assert_allclose(solution.X_seq, X_init, atol=1e-15)

    def test_stationary_start_stops_without_a_step(self):
        h = 6
        start = self.model.initial_state(VehicleState.at_rest(HOVER_POSITION), hover_thrust(self.model))
        solution = al_ilqr_solve(start, hover_refs(h), np.zeros((h, 2)), ocp(h, u_min=-50.0, u_max=50.0), self.model)
        self.assertTrue(solution.converged)
        self.assertEqual(solution.inner_iterations, 1)
        self.assertEqual(solution.cost_history, [[solution.augmented_cost]])

    def test_line_search_covers_eleven_halvings(self):
        self.assertEqual(LINE_SEARCH_STEPS[0], 1.0)
        self.assertEqual(len(LINE_SEARCH_STEPS), 11)
        self.assertEqual(LINE_SEARCH_STEPS[-1], 2.0 ** -10)

    def test_cost_does_not_exceed_initial_guess(self):
        start, refs, cfg, solution = self.solve(seed=3, h=8)
        initial = rollout(start, self.X_init, refs, self.model, cfg.R_delta_u)
        self.assertLessEqual(solution.cost, initial.cost)
        self.assertEqual(solution.cost_history[0][0], initial.cost)


class ConstrainedSolveTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.model = closed_loop()
        cls.cases = []
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            vehicle = VehicleState.at_rest(HOVER_POSITION + rng.normal(scale=0.02, size=3))
            start = cls.model.initial_state(vehicle, rng.uniform(1.0, 5.0, size=8))
            cfg = ocp(5, u_max=rng.uniform(2.5, 6.0))
            solution = al_ilqr_solve(start, hover_refs(5), np.zeros((5, 2)), cfg, cls.model)
            cls.cases.append((cfg, solution))

    def test_reported_violation_is_honest(self):
        for cfg, solution in self.cases:
            true_violation = max(float(np.max(constraint_values(solution.u_cmd_seq, cfg))), 0.0)
            self.assertGreaterEqual(solution.max_violation, true_violation)

    def test_solutions_meet_motor_bounds(self):
        for cfg, solution in self.cases:
            self.assertLessEqual(solution.max_violation, 1e-5)

    def test_accepted_costs_never_increase_within_an_outer_iteration(self):
        for _, solution in self.cases:
            for history in solution.cost_history:
                self.assertTrue(np.all(np.diff(history) <= 0.0), msg=str(history))

    def test_violation_does_not_grow_after_second_outer_iteration(self):
        for _, solution in self.cases:
            violations = solution.violation_history
            for before, after in zip(violations[1:], violations[2:]):
                self.assertLessEqual(after, before + 1e-9, msg=str(violations))

    def test_wrench_is_preserved(self):
        for _, solution in self.cases:
            residual = (solution.u_cmd_seq - solution.u_0_seq) @ ALLOC.A.T
            self.assertLessEqual(np.max(np.abs(residual)), 1e-9)

    def test_impossible_thrust_limit_is_reported(self):
        cfg = ocp(3, u_max=0.3)
        start = self.model.initial_state(VehicleState.at_rest(HOVER_POSITION), hover_thrust(self.model))
        try:
            solution = al_ilqr_solve(start, hover_refs(3), np.zeros((3, 2)), cfg, self.model)
        except SolverFailureError as error:
            solution = error.best_solution
        self.assertFalse(solution.converged)
        self.assertGreater(solution.max_violation, cfg.constraint_tol)


class SingleStepOracleTests(SimpleTestCase):
    """One-step problems against a brute-force search over the shift."""

    def setUp(self):
        self.model = closed_loop()

    @staticmethod
    def objective(X, u_0, u_prev, cfg):
        u_cmd = u_0 + X @ ALLOC.n_A.T
        delta = motor_step(u_prev, u_cmd, DT, MOTOR) - u_prev
        return np.einsum('...i,ij,...j->...', delta, cfg.R_delta_u, delta), u_cmd

    def grid_minimum(self, u_0, u_prev, cfg):
        center, half, best = np.zeros(2), 20.0, np.inf
        for _ in range(4):
            axis = np.linspace(-half, half, 201)
            grid = center + np.stack(np.meshgrid(axis, axis, indexing='ij'), axis=-1).reshape(-1, 2)
            value, u_cmd = self.objective(grid, u_0, u_prev, cfg)
            feasible = np.all((u_cmd >= cfg.u_min) & (u_cmd <= cfg.u_max), axis=1)
            value = np.where(feasible, value, np.inf)
            index = int(np.argmin(value))
            best, center, half = min(best, value[index]), grid[index], half / 20.0
        return best

    def polished_minimum(self, u_0, u_prev, cfg):
        X_c, _ = feasible_center(u_0, ALLOC, cfg.u_min, cfg.u_max)
        result = minimize(
            lambda X: self.objective(X, u_0, u_prev, cfg)[0] * 1e3,
            X_c,
            method='SLSQP',
            constraints=[
                {'type': 'ineq', 'fun': lambda X: cfg.u_max - self.objective(X, u_0, u_prev, cfg)[1]},
                {'type': 'ineq', 'fun': lambda X: self.objective(X, u_0, u_prev, cfg)[1] - cfg.u_min},
            ],
            options={'ftol': 1e-14, 'maxiter': 500},
        )
        value, u_cmd = self.objective(result.x, u_0, u_prev, cfg)
        if np.all(u_cmd >= cfg.u_min - 1e-9) and np.all(u_cmd <= cfg.u_max + 1e-9):
            return float(value)
        return np.inf

    def test_matches_brute_force_minimum(self):
        rng = np.random.default_rng(7)
        refs = hover_refs(1)
        for _ in range(100):
            u_prev = rng.uniform(1.0, 5.0, size=8)
            cfg = ocp(1, u_max=rng.uniform(2.5, 6.0))
            start = self.model.initial_state(VehicleState.at_rest(HOVER_POSITION), u_prev)
            u_0 = self.model.command(start, refs[0])[0]

            solution = al_ilqr_solve(start, refs, np.zeros((1, 2)), cfg, self.model)
            reference = min(self.grid_minimum(u_0, u_prev, cfg), self.polished_minimum(u_0, u_prev, cfg))

            self.assertLessEqual(solution.max_violation, 1e-5)
            self.assertAlmostEqual(solution.cost, self.objective(solution.X_seq[0], u_0, u_prev, cfg)[0], delta=1e-14)
            self.assertAlmostEqual(solution.cost, reference, delta=1e-4)


class RecedingHorizonTests(SimpleTestCase):
    def setUp(self):
        self.model = closed_loop()
        self.trajectory = TrajectorySpec(
            p_start=HOVER_POSITION, p_end=(0.5, 0.3, 1.2), rot_axis=(0.0, 1.0, 0.0), rot_angle=0.6, duration=2.0
        )

    def test_horizon_rule(self):
        self.assertEqual(horizon_from_constants(TAU_RISE, TAU_FALL, DT, 4), 300)
        self.assertEqual(horizon_from_constants(0.1, 0.1, 0.01, 3), 30)
        for multiplier in (3, 3.5, 4, 6):
            h = horizon_from_constants(TAU_RISE, TAU_FALL, DT, multiplier)
            self.assertGreaterEqual(h * DT, 3 * TAU_RISE - 1e-12)

    def test_horizon_rule_rejects_non_positive_inputs(self):
        with self.assertRaises(OcpConfigurationError):
            horizon_from_constants(0.0, 0.021, DT)

    def test_control_horizon_is_a_small_share_of_the_prediction(self):
        self.assertAlmostEqual(20 / horizon_from_constants(TAU_RISE, TAU_FALL, DT), 0.0667, delta=1e-4)

    def test_zero_sigma_replicates_previous_shift(self):
        cfg = ocp(12, 4, warm_start_sigma=0.0)
        X_init = warm_start(np.array([0.7, -0.2]), cfg, np.random.default_rng(0))
        np.testing.assert_array_equal(X_init, np.tile([0.7, -0.2], (12, 1)))

    def test_warm_start_perturbation_is_seeded(self):
        cfg = ocp(12, 4, warm_start_sigma=1e-3)
        first = warm_start(np.zeros(2), cfg, np.random.default_rng(5))
        second = warm_start(np.zeros(2), cfg, np.random.default_rng(5))
        np.testing.assert_array_equal(first, second)
        self.assertLess(np.max(np.abs(first)), 1e-2)
        self.assertGreater(np.max(np.abs(first)), 0.0)

    def test_step_returns_control_horizon_and_next_warm_start(self):
        cfg = ocp(10, 3)
        start = offset_start(self.model)
        X_apply, solution, next_previous = receding_step(
            self.model, start, 0.2, np.zeros(2), cfg, self.trajectory, np.random.default_rng(0)
        )
        self.assertEqual(X_apply.shape, (3, 2))
        np.testing.assert_array_equal(X_apply, solution.X_seq[:3])
        np.testing.assert_array_equal(next_previous, solution.X_seq[3])

    def test_full_control_horizon_uses_last_entry(self):
        cfg = ocp(4, 4)
        _, solution, next_previous = receding_step(
            self.model, offset_start(self.model), 0.0, np.zeros(2), cfg, self.trajectory, np.random.default_rng(0)
        )
        np.testing.assert_array_equal(next_previous, solution.X_seq[-1])

    def test_fixed_seed_is_deterministic(self):
        cfg = ocp(10, 3, rng_seed=11)
        start = offset_start(self.model)
        plans = []
        for _ in range(2):
            allocator = RecedingHorizonAllocator(self.model, cfg, self.trajectory)
            first, _ = allocator.plan(start, 0.1)
            second, solution = allocator.plan(start, 0.2)
            plans.append((first, second, solution.cost))
        np.testing.assert_array_equal(plans[0][0], plans[1][0])
        np.testing.assert_array_equal(plans[0][1], plans[1][1])
        self.assertEqual(plans[0][2], plans[1][2])

    def test_hold_overrides_warm_start(self):
        allocator = RecedingHorizonAllocator(self.model, ocp(10, 3), self.trajectory)
        allocator.hold([1.5, -0.5])
        np.testing.assert_array_equal(allocator.previous_X, [1.5, -0.5])
