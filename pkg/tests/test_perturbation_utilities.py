from .shared_testing_functions import assert_vectors_almost_equal
import math
import numpy as np
from polyakconvexity.cone_utilities import ConeSpec
from polyakconvexity.localization_utilities import compute_multiplier, ConstrainedProblem, solve_localization
from polyakconvexity.perturbation_utilities import calm_from_below_estimate, calmness_check, sample_value_function, \
    subgradient_check, value_function, ValueFunctionSample
from polyakconvexity.polymap_utilities import PolyMap, stack_maps
from polyakconvexity.problem_io import load_registry
import unittest


def solved(name):
    bundle = load_registry(name)
    sol = solve_localization(bundle.problem, bundle.x0, bundle.eps)
    return bundle.problem, compute_multiplier(bundle.problem, sol, samples=500)


class TestValueFunction(unittest.TestCase):
    def test_unperturbed_value(self):
        for name in ("disk-inactive", "disk-active"):
            P, sol = solved(name)
            sample = value_function(P, sol, [0.0])
            self.assertTrue(sample.feasible)
            self.assertAlmostEqual(sample.v_of_y, sol.value, places=7, msg=name)

    def test_inactive_constraint_stays_inactive(self):
        P, sol = solved("disk-inactive")
        for y in (-0.05, -0.01, 0.02, 0.05):
            sample = value_function(P, sol, [y])
            self.assertAlmostEqual(sample.v_of_y, 0.4, places=6)
            assert_vectors_almost_equal(self, sample.y, [y], atol=0)

    def test_active_constraint_moves_with_perturbation(self):
        # tightening the exterior constraint raises the value
        P, sol = solved("disk-active")
        self.assertGreater(value_function(P, sol, [0.02]).v_of_y, sol.value)
        self.assertLess(value_function(P, sol, [-0.02]).v_of_y, sol.value)

    def test_infeasible_perturbation(self):
        P, sol = solved("disk-inactive")
        sample = value_function(P, sol, [10.0], budget=2)
        self.assertFalse(sample.feasible)
        self.assertEqual(sample.v_of_y, math.inf)
        self.assertIsNone(sample.x)

    def test_samples_exclude_zero(self):
        P, sol = solved("disk-inactive")
        samples = sample_value_function(P, sol, radius_y=0.05, samples=20, seed=3)
        self.assertEqual(len(samples), 20)
        for sample in samples:
            self.assertGreater(abs(sample.y[0]), 0.0)
            self.assertLessEqual(abs(sample.y[0]), 0.05 + 1e-12)


class TestSubgradient(unittest.TestCase):
    def test_multiplier_is_a_subgradient(self):
        for name in ("disk-inactive", "disk-active"):
            P, sol = solved(name)
            result = subgradient_check(P, sol, samples=1000, seed=0)
            self.assertTrue(result, name)
            self.assertEqual(result.details["checked"] + result.details["skipped"], 1000)
            self.assertGreater(result.details["checked"], 0)

    def test_corrupted_multiplier(self):
        P, sol = solved("disk-inactive")
        values = sample_value_function(P, sol, samples=30, seed=0)
        self.assertTrue(subgradient_check(P, sol, values=values))
        result = subgradient_check(P, sol, lam=[1.0], values=values)
        self.assertFalse(result)
        self.assertIsInstance(result.witness, ValueFunctionSample)
        self.assertGreater(result.witness.y[0], 0.0)

    def test_infeasible_samples_are_skipped(self):
        P, sol = solved("disk-inactive")
        values = [ValueFunctionSample(np.array([10.0]), math.inf, False)]
        result = subgradient_check(P, sol, values=values)
        self.assertTrue(result)
        self.assertEqual((result.details["checked"], result.details["skipped"]), (0, 1))


class TestCalmness(unittest.TestCase):
    def test_calm_at_regular_points(self):
        for name in ("disk-inactive", "disk-active"):
            P, sol = solved(name)
            estimate = calmness_check(P, sol, r=0.05, samples=30, seed=0)
            self.assertTrue(estimate, name)
            self.assertAlmostEqual(estimate.bound, -float(np.abs(sol.lambda_eps).sum()) - 1e-4)
            self.assertGreater(estimate.checked, 0)

    def test_inactive_quotient_vanishes(self):
        P, sol = solved("disk-inactive")
        estimate = calmness_check(P, sol, r=0.05, samples=20, seed=1)
        self.assertAlmostEqual(estimate.quotient_lower_bound, 0.0, delta=1e-4)

    def test_trivial_annihilator_checks_nothing(self):
        # in one dimension the annihilator of a nonzero multiplier is trivial
        P, sol = solved("disk-active")
        estimate = calmness_check(P, sol, samples=20, restrict_to_annihilator=True)
        self.assertEqual(estimate.checked, 0)
        self.assertEqual(estimate.bound, -1e-4)
        self.assertFalse(estimate)

    def test_annihilator_restriction(self):
        # an inactive second constraint x1 <= 2 gives a one-dimensional annihilator
        bundle = load_registry("disk-active")
        extra = PolyMap(2, (((1.0, (1, 0)), (-2.0, (0, 0))),))
        P = ConstrainedProblem(bundle.problem.objective, stack_maps(bundle.problem.constraint, extra),
                               ConeSpec.nonpositive_orthant(2), bundle.problem.space)
        sol = compute_multiplier(P, solve_localization(P, bundle.x0, bundle.eps), samples=500)
        self.assertEqual(float(sol.lambda_eps[1]), 0.0)
        estimate = calmness_check(P, sol, samples=20, seed=2, restrict_to_annihilator=True)
        self.assertGreater(estimate.checked, 0)
        self.assertEqual(estimate.bound, -1e-4)
        self.assertAlmostEqual(float(estimate.worst_y[0]), 0.0, places=12)
        self.assertTrue(estimate)

    def test_shrinking_radii(self):
        P, sol = solved("disk-active")
        estimates = calm_from_below_estimate(P, sol, samples=10)
        self.assertEqual([e.r for e in estimates], [0.05, 0.025, 0.0125])
        self.assertTrue(all(estimates))


if __name__ == "__main__":
    unittest.main()
