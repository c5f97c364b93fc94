from .shared_testing_functions import assert_vectors_almost_equal
from hypothesis import given, settings, strategies as st
import numpy as np
from polyakconvexity.cone_utilities import check_normal_cone, ConeSpec, dual_cone_generators, NONPOSITIVE, ZERO
from polyakconvexity.exceptions import DimensionMismatch, DomainError, PointNotInCone
import unittest

HALF_LINE = ConeSpec.nonpositive_orthant(1)
MIXED = ConeSpec.product(ConeSpec.nonpositive_orthant(2), ConeSpec.zero(1))


class TestConeSpec(unittest.TestCase):
    def test_blocks(self):
        self.assertEqual(MIXED.blocks, ((NONPOSITIVE, 2), (ZERO, 1)))
        self.assertEqual(MIXED.dim, 3)
        self.assertEqual(list(MIXED.nonpositive_mask), [True, True, False])
        with self.assertRaises(DomainError):
            ConeSpec((("positive", 1),))
        with self.assertRaises(DomainError):
            ConeSpec(((ZERO, 0),))

    def test_membership_and_projection(self):
        self.assertTrue(MIXED.contains([-1.0, 0.0, 0.0]))
        self.assertFalse(MIXED.contains([-1.0, 0.0, 0.1]))
        self.assertFalse(MIXED.contains([0.5, -1.0, 0.0]))
        assert_vectors_almost_equal(self, MIXED.project([0.5, -1.0, 3.0]), [0.0, -1.0, 0.0], atol=0)
        self.assertAlmostEqual(MIXED.violation([3.0, -1.0, 4.0]), 5.0)
        with self.assertRaises(DimensionMismatch):
            MIXED.contains([0.0, 0.0])

    @given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=3, max_size=3))
    @settings(max_examples=200, deadline=None)
    def test_projection_is_idempotent_and_feasible(self, y):
        projected = MIXED.project(y)
        self.assertTrue(MIXED.contains(projected))
        assert_vectors_almost_equal(self, MIXED.project(projected), projected, atol=0)

    def test_dual_cone(self):
        self.assertTrue(MIXED.dual_contains([1.0, 0.0, -5.0]))
        self.assertFalse(MIXED.dual_contains([-1.0, 0.0, 0.0]))
        assert_vectors_almost_equal(self, MIXED.project_dual([-1.0, 2.0, -5.0]), [0.0, 2.0, -5.0], atol=0)

    def test_active_set(self):
        self.assertEqual(list(MIXED.active_set([-1.0, 0.0, 0.0])), [1, 2])
        self.assertEqual(list(HALF_LINE.active_set([-0.5])), [])


class TestDualConeGenerators(unittest.TestCase):
    def test_generators_lie_in_the_dual_cone(self):
        description = dual_cone_generators(MIXED)
        self.assertEqual(description.generators.shape, (4, 3))
        for generator in description.generators:
            self.assertTrue(MIXED.dual_contains(generator))
            for c in MIXED.generators():
                self.assertLessEqual(float(generator @ c), 0.0)

    def test_annihilator_and_normal_generators(self):
        description = dual_cone_generators(MIXED, y=[-1.0, 0.0, 0.0])
        self.assertEqual(description.annihilator_basis.shape, (2, 3))
        assert_vectors_almost_equal(self, description.annihilator_basis @ np.array([-1.0, 0.0, 0.0]), [0.0, 0.0],
                                    atol=1e-12)
        # the inactive first coordinate contributes no normal direction
        for generator in description.normal_generators:
            self.assertEqual(generator[0], 0.0)
        self.assertEqual(dual_cone_generators(HALF_LINE, y=[0.0]).annihilator_basis.shape, (1, 1))


class TestCheckNormalCone(unittest.TestCase):
    def test_interior_point(self):
        self.assertTrue(check_normal_cone([0.0], [-0.5], HALF_LINE))

    def test_boundary_point(self):
        self.assertTrue(check_normal_cone([1.0], [0.0], HALF_LINE))

    def test_interior_point_with_nonzero_multiplier(self):
        result = check_normal_cone([1.0], [-0.5], HALF_LINE)
        self.assertFalse(result)
        assert_vectors_almost_equal(self, result.witness, [0.0], atol=0)
        self.assertAlmostEqual(result.details["inner_product"], 0.5)

    def test_zero_block_accepts_any_sign(self):
        self.assertTrue(check_normal_cone([2.0, 0.0, -3.0], [0.0, -1.0, 0.0], MIXED))
        self.assertFalse(check_normal_cone([-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], MIXED))

    def test_point_outside(self):
        with self.assertRaises(PointNotInCone):
            check_normal_cone([1.0], [0.5], HALF_LINE)


if __name__ == "__main__":
    unittest.main()
