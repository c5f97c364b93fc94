from .shared_testing_functions import assert_vectors_almost_equal
import numpy as np
from polyakconvexity.cone_utilities import ConeSpec
from polyakconvexity.duality_utilities import dual_function, duality_gap_estimate, finite_minimax_gap, \
    lagrangian_payoff, saddle_point_check, sample_dual_cone
from polyakconvexity.localization_utilities import compute_multiplier, solve_localization
from polyakconvexity.problem_io import load_registry
import unittest


def solved(name):
    bundle = load_registry(name)
    sol = solve_localization(bundle.problem, bundle.x0, bundle.eps)
    return bundle.problem, compute_multiplier(bundle.problem, sol, samples=500)


class TestSampleDualCone(unittest.TestCase):
    def test_samples_lie_in_the_dual_cone(self):
        cone = ConeSpec.product(ConeSpec.nonpositive_orthant(2), ConeSpec.zero(1))
        lambdas = sample_dual_cone(cone, 200, np.random.default_rng(0))
        self.assertEqual(lambdas.shape, (200, 3))
        for lam in lambdas:
            self.assertTrue(cone.dual_contains(lam))
            self.assertLessEqual(np.linalg.norm(lam), 10.0 + 1e-12)


class TestSaddlePoint(unittest.TestCase):
    def test_multipliers_give_saddle_points(self):
        for name in ("disk-inactive", "disk-active"):
            P, sol = solved(name)
            result = saddle_point_check(P, sol, samples=1000, seed=1)
            self.assertTrue(result, name)
            self.assertLessEqual(abs(result.details["complementarity"]), 1e-8)

    def test_corrupted_multiplier(self):
        P, sol = solved("disk-active")
        result = saddle_point_check(P, sol, samples=1000, seed=1, lam=sol.lambda_eps + 1.0)
        self.assertFalse(result)
        self.assertIn(result.witness[0], ("multiplier", "x"))

    def test_multiplier_outside_the_dual_cone(self):
        P, sol = solved("disk-inactive")
        result = saddle_point_check(P, sol, lam=[-1.0])
        self.assertFalse(result)
        self.assertEqual(result.witness[0], "multiplier")

    def test_nonzero_multiplier_on_inactive_constraint(self):
        # complementarity fails since g(x_eps) = -0.59
        P, sol = solved("disk-inactive")
        result = saddle_point_check(P, sol, lam=[0.5])
        self.assertFalse(result)
        self.assertAlmostEqual(result.details["complementarity"], -0.295, places=5)


class TestDualFunction(unittest.TestCase):
    def test_dual_value_below_lagrangian_at_solution(self):
        for name in ("disk-inactive", "disk-active"):
            P, sol = solved(name)
            for lam in (sol.lambda_eps, np.zeros(1), np.array([2.0])):
                value, x = dual_function(P, sol.x0, sol.eps, lam, seed=0, include=(sol.x_eps,))
                self.assertLessEqual(value, float(P.lagrangian(lam, sol.x_eps)) + 1e-12)
                self.assertTrue(P.space.ball(sol.x0, sol.eps).contains(x, tol=1e-12))

    def test_unconstrained_part(self):
        # with lambda = 0 the dual function is min x1 over the ball
        P, sol = solved("disk-inactive")
        value, x = dual_function(P, sol.x0, sol.eps, [0.0])
        self.assertAlmostEqual(value, 0.4, places=6)
        assert_vectors_almost_equal(self, x, [0.4, 0.5], atol=1e-3)


class TestDualityGap(unittest.TestCase):
    def test_no_gap_at_regular_points(self):
        for name in ("disk-inactive", "disk-active"):
            P, sol = solved(name)
            gap = duality_gap_estimate(P, sol, samples=5, starts=4, seed=0)
            self.assertGreaterEqual(gap, -1e-6, name)
            self.assertLessEqual(gap, 1e-5, name)

    def test_explicit_grid(self):
        P, sol = solved("disk-active")
        # lambda = 0 alone gives the unconstrained minimum 0.70711 - 0.1 below the primal value
        gap = duality_gap_estimate(P, sol, lambda_grid=[[0.0]], starts=4)
        self.assertAlmostEqual(gap, sol.value - (0.70711 - 0.1), places=5)
        # negative entries are projected onto the dual cone
        self.assertAlmostEqual(duality_gap_estimate(P, sol, lambda_grid=[[-3.0]], starts=4), gap, places=7)


class TestFiniteMinimax(unittest.TestCase):
    def test_payoff_matrix(self):
        P, sol = solved("disk-inactive")
        payoff = lagrangian_payoff(P, [[0.0], [1.0]], [sol.x0, sol.x_eps])
        assert_vectors_almost_equal(self, payoff, [[0.5, 0.4], [0.0, -0.19]], atol=1e-6)

    def test_saddle_point(self):
        report = finite_minimax_gap([[1.0, 2.0], [0.0, 3.0]])
        self.assertEqual((report.upper, report.lower), (1.0, 1.0))
        self.assertEqual(report.gap, 0.0)
        self.assertEqual(report.saddle_points, ((0, 0),))
        self.assertTrue(report.has_saddle_point)

    def test_matching_pennies(self):
        report = finite_minimax_gap([[1.0, -1.0], [-1.0, 1.0]])
        self.assertEqual((report.upper, report.lower, report.gap), (1.0, -1.0, 2.0))
        self.assertFalse(report.has_saddle_point)

    def test_gap_is_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            self.assertGreaterEqual(finite_minimax_gap(rng.normal(size=(4, 5))).gap, 0.0)


if __name__ == "__main__":
    unittest.main()
