import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import nnls

from .exceptions import GeometryError, GeometryRankError, InfeasibleAllocationError
from .geometry import (
    RotorGeometry,
    allocation_columns,
    apply_nullspace,
    build_allocation,
    nominal_allocation,
)
from .mbno import bound_violation, feasible_center, mbno_objective, mbno_solve


def default_allocation():
    return build_allocation(RotorGeometry.tilted_cube())


class GeometryTests(SimpleTestCase):
    def test_single_column(self):
        geom = RotorGeometry(positions=[[1.0, 0.0, 0.0]], directions=[[0.0, 0.0, 1.0]], kappa=0.1, f_max=6.0)
        np.testing.assert_allclose(allocation_columns(geom)[:, 0], [0, 0, 1, 0, -1, 0.1], atol=1e-15)

    def test_zero_kappa_gives_pure_lever_arm_moment(self):
        base = RotorGeometry.tilted_cube(kappa=0.0)
        A = allocation_columns(base)
        np.testing.assert_array_equal(A[3:].T, np.cross(base.positions, base.directions))

    def test_directions_must_be_unit(self):
        with self.assertRaises(GeometryError):
            RotorGeometry(positions=np.zeros((8, 3)), directions=np.ones((8, 3)), kappa=0.0, f_max=6.0)

    def test_default_geometry_has_full_rank_and_two_dimensional_nullspace(self):
        alloc = default_allocation()
        self.assertEqual(alloc.A.shape, (6, 8))
        self.assertEqual(np.linalg.matrix_rank(alloc.A), 6)
        self.assertEqual(alloc.n_A.shape, (8, 2))
        self.assertLessEqual(np.max(np.abs(alloc.A @ alloc.n_A)), 1e-10)
        np.testing.assert_allclose(alloc.n_A.T @ alloc.n_A, np.eye(2), atol=1e-10)
        np.testing.assert_allclose(alloc.A_f @ alloc.A_f_pinv, np.eye(3), atol=1e-9)
        np.testing.assert_allclose(alloc.A_m @ alloc.A_m_pinv, np.eye(3), atol=1e-9)

    def test_default_nullspace_contains_uniform_thrust(self):
        alloc = default_allocation()
        ones = np.ones(8) / np.sqrt(8)
        np.testing.assert_allclose(alloc.n_A @ (alloc.n_A.T @ ones), ones, atol=1e-12)

    def test_split_map_and_wrench_helpers(self):
        alloc = default_allocation()
        np.testing.assert_array_equal(alloc.split_pinv, np.hstack([alloc.A_f_pinv, alloc.A_m_pinv]))
        rng = np.random.default_rng(2)
        f, tau = rng.normal(size=3), rng.normal(size=3)
        np.testing.assert_allclose(
            nominal_allocation(alloc, f, tau), alloc.A_f_pinv @ f + alloc.A_m_pinv @ tau, atol=1e-12
        )
        u = rng.uniform(0.0, 6.0, size=(5, 8))
        np.testing.assert_allclose(alloc.wrench(u), u @ alloc.A.T, atol=1e-15)

    def test_singular_values_describe_the_matrix(self):
        alloc = default_allocation()
        self.assertEqual(alloc.singular_values.shape, (6,))
        np.testing.assert_allclose(alloc.singular_values, np.linalg.svd(alloc.A, compute_uv=False), atol=1e-12)
        self.assertGreater(alloc.singular_values[-1], 1e-3)

    def test_default_cross_residual_vanishes(self):
        leak_m, leak_f = default_allocation().cross_residual()
        self.assertLess(np.max(np.abs(leak_m)), 1e-12)
        self.assertLess(np.max(np.abs(leak_f)), 1e-12)

    def test_nullspace_basis_is_deterministic_and_sign_normalised(self):
        first, second = default_allocation(), default_allocation()
        np.testing.assert_array_equal(first.n_A, second.n_A)
        for column in first.n_A.T:
            leading = column[np.flatnonzero(np.abs(column) > 1e-12)[0]]
            self.assertGreater(leading, 0)

    def test_degenerate_geometry_is_rejected(self):
        geom = RotorGeometry(
            positions=np.tile([0.2, 0.0, 0.0], (8, 1)), directions=np.tile([0.0, 0.0, 1.0], (8, 1)),
            kappa=0.016, f_max=6.0,
        )
        with self.assertRaises(GeometryRankError):
            build_allocation(geom)


class NominalAllocationTests(SimpleTestCase):
    def setUp(self):
        self.alloc = default_allocation()
        self.rng = np.random.default_rng(10)

    def test_zero_wrench_gives_zero_thrust(self):
        np.testing.assert_array_equal(nominal_allocation(self.alloc, np.zeros(3), np.zeros(3)), np.zeros(8))

    def test_force_and_moment_are_reproduced(self):
        for _ in range(50):
            f, tau = self.rng.normal(size=3) * 5, self.rng.normal(size=3)
            u_0 = nominal_allocation(self.alloc, f, tau)
            self.assertLessEqual(np.max(np.abs(self.alloc.A_f @ u_0 - f)), 1e-9)
            self.assertLessEqual(np.max(np.abs(self.alloc.A_m @ u_0 - tau)), 1e-9)

    def test_linearity(self):
        f, tau = self.rng.normal(size=3), self.rng.normal(size=3)
        np.testing.assert_allclose(
            nominal_allocation(self.alloc, 2 * f, 2 * tau), 2 * nominal_allocation(self.alloc, f, tau), atol=1e-12
        )

    def test_full_mode_matches_split_mode_for_orthogonal_maps(self):
        f, tau = self.rng.normal(size=3), self.rng.normal(size=3)
        np.testing.assert_allclose(
            nominal_allocation(self.alloc, f, tau, mode='full'), nominal_allocation(self.alloc, f, tau), atol=1e-12
        )

    def test_unknown_mode_is_rejected(self):
        with self.assertRaises(GeometryError):
            nominal_allocation(self.alloc, np.zeros(3), np.zeros(3), mode='weighted')

    def test_zero_shift_is_identity(self):
        u_0 = self.rng.normal(size=8)
        np.testing.assert_array_equal(apply_nullspace(u_0, self.alloc, np.zeros(2)), u_0)

    def test_nullspace_shift_preserves_wrench(self):
        u_0 = self.rng.normal(size=8)
        for X in self.rng.normal(size=(1000, 2)) * 3:
            u_cmd = apply_nullspace(u_0, self.alloc, X)
            self.assertLessEqual(np.max(np.abs(self.alloc.A @ u_cmd - self.alloc.A @ u_0)), 1e-9)

    def test_nullspace_shift_is_affine(self):
        u_0 = self.rng.normal(size=8)
        X1, X2 = self.rng.normal(size=(2, 2))
        np.testing.assert_allclose(
            apply_nullspace(u_0, self.alloc, X1) + apply_nullspace(u_0, self.alloc, X2) - u_0,
            apply_nullspace(u_0, self.alloc, X1 + X2),
            atol=1e-12,
        )


class MbnoTests(SimpleTestCase):
    def setUp(self):
        self.alloc = default_allocation()
        self.u_min = np.zeros(8)
        self.u_max = np.full(8, 6.0)

    def random_instance(self, rng):
        """Motor bounds plus a u_0 known to admit a feasible shift."""
        u_min = rng.uniform(0.0, 0.5, size=8)
        u_max = rng.uniform(5.5, 7.0, size=8)
        u_c = rng.uniform(1.0, 5.0, size=8)
        u_0 = u_c - self.alloc.n_A @ rng.normal(scale=2.0, size=2)
        return u_0, u_min, u_max

    def assert_kkt(self, X, u_0, u_min, u_max):
        u_cmd = apply_nullspace(u_0, self.alloc, X)
        gradient = X + self.alloc.n_A.T @ u_0
        upper = np.abs(u_cmd - u_max) <= 1e-9
        lower = np.abs(u_cmd - u_min) <= 1e-9
        normals = np.vstack([self.alloc.n_A[upper], -self.alloc.n_A[lower]])
        if normals.shape[0] == 0:
            self.assertLessEqual(np.max(np.abs(gradient)), 1e-8)
            return
        _, residual = nnls(normals.T, -gradient)
        self.assertLessEqual(residual, 1e-8)

    def test_interior_unconstrained_optimum_is_returned(self):
        u_0 = nominal_allocation(self.alloc, [0.0, 0.0, 4.905], np.zeros(3)) + 0.3 * self.alloc.n_A[:, 0]
        X = mbno_solve(u_0, self.alloc, np.full(8, -10.0), np.full(8, 10.0))
        np.testing.assert_array_equal(X, -self.alloc.n_A.T @ u_0)

    def test_zero_command_is_optimal_at_origin(self):
        X = mbno_solve(np.zeros(8), self.alloc, self.u_min, self.u_max)
        np.testing.assert_array_equal(X, np.zeros(2))
        self.assertEqual(float(mbno_objective(X, np.zeros(8), self.alloc)), 0.0)

    def test_hover_solution_is_feasible_and_lifts_thrust(self):
        u_0 = nominal_allocation(self.alloc, [0.0, 0.0, 4.905], np.zeros(3))
        self.assertLess(np.min(u_0), 0.0)
        X = mbno_solve(u_0, self.alloc, self.u_min, self.u_max)
        u_cmd = apply_nullspace(u_0, self.alloc, X)
        self.assertTrue(np.all(u_cmd >= self.u_min) and np.all(u_cmd <= self.u_max))
        self.assert_kkt(X, u_0, self.u_min, self.u_max)

    def test_random_instances_satisfy_bounds_exactly_and_kkt(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            u_0, u_min, u_max = self.random_instance(rng)
            X = mbno_solve(u_0, self.alloc, u_min, u_max)
            u_cmd = apply_nullspace(u_0, self.alloc, X)
            self.assertTrue(np.all(u_cmd >= u_min))
            self.assertTrue(np.all(u_cmd <= u_max))
            self.assert_kkt(X, u_0, u_min, u_max)

    def grid_minimum(self, u_0, u_min, u_max):
        """Zooming grid search started from a feasible shift, so every level has a feasible point."""
        center, _ = feasible_center(u_0, self.alloc, u_min, u_max)
        q = self.alloc.n_A.T @ u_0
        half, best = 2.0 * np.linalg.norm(center + q) + 1e-3, np.inf
        while half > 1e-5:
            axis = np.linspace(-half, half, 41)
            grid = center + np.stack(np.meshgrid(axis, axis, indexing='ij'), axis=-1).reshape(-1, 2)
            u_grid = u_0 + grid @ self.alloc.n_A.T
            inside = np.all((u_grid >= u_min) & (u_grid <= u_max), axis=1)
            value = np.where(inside, mbno_objective(grid, u_0, self.alloc), np.inf)
            index = int(np.argmin(value))
            best, center, half = min(best, value[index]), grid[index], half / 2.0
        return best

    def test_random_instances_against_grid_search(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            u_0, u_min, u_max = self.random_instance(rng)
            X = mbno_solve(u_0, self.alloc, u_min, u_max)
            u_cmd = apply_nullspace(u_0, self.alloc, X)
            self.assertTrue(np.all(u_cmd >= u_min) and np.all(u_cmd <= u_max))
            best = float(mbno_objective(X, u_0, self.alloc))
            grid_best = self.grid_minimum(u_0, u_min, u_max)
            self.assertLessEqual(best, grid_best + 1e-9)
            self.assertLessEqual(grid_best - best, 1e-4)

    def test_infeasible_bounds_raise_with_diagnostic(self):
        u_0 = nominal_allocation(self.alloc, [40.0, 0.0, 0.0], np.zeros(3))
        with self.assertRaises(InfeasibleAllocationError) as ctx:
            mbno_solve(u_0, self.alloc, self.u_min, self.u_max)
        error = ctx.exception
        self.assertEqual(error.x_diagnostic.shape, (2,))
        self.assertGreater(error.max_violation, 0.0)
        at_diag = bound_violation(apply_nullspace(u_0, self.alloc, error.x_diagnostic), self.u_min, self.u_max)
        at_zero = bound_violation(u_0, self.u_min, self.u_max)
        self.assertAlmostEqual(at_diag, error.max_violation, places=6)
        self.assertLessEqual(at_diag, at_zero + 1e-9)

    def test_feasible_center_has_positive_margin_at_hover(self):
        u_0 = nominal_allocation(self.alloc, [0.0, 0.0, 4.905], np.zeros(3))
        X, margin = feasible_center(u_0, self.alloc, self.u_min, self.u_max)
        self.assertGreater(margin, 0.5)
        u_cmd = apply_nullspace(u_0, self.alloc, X)
        self.assertGreaterEqual(np.min(u_cmd), margin - 1e-7)
        self.assertLessEqual(np.max(u_cmd), 6.0 - margin + 1e-7)
