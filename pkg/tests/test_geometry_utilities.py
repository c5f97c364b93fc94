from .shared_testing_functions import exponents, vectors
from hypothesis import given, settings, strategies as st
from io import StringIO
from math import inf, sqrt
import numpy as np
from polyakconvexity.exceptions import DomainError, PreconditionViolated, UnsupportedExponent
from polyakconvexity.geometry_utilities import ball_inclusion_check, Ball, modulus_bruteforce_2d, \
    modulus_closed_form, modulus_lower_bound, modulus_random_search, MODULUS_EPS_GRID, NormSpace, power_type2_constant
from polyakconvexity.progress import Progress
from polyakconvexity.sampling_utilities import parallel_starmap, sample_ball_points, sample_unit_sphere, seeded_chunks
import unittest


class TestNormSpace(unittest.TestCase):
    @given(exponents(), vectors(3), vectors(3))
    @settings(max_examples=200, deadline=None)
    def test_triangle_inequality(self, p, x, y):
        space = NormSpace(3, p)
        self.assertLessEqual(space.norm(x + y), space.norm(x) + space.norm(y) + 1e-9)

    @given(exponents(), vectors(3), st.floats(-10, 10, allow_nan=False))
    @settings(max_examples=200, deadline=None)
    def test_absolute_homogeneity(self, p, x, t):
        space = NormSpace(3, p)
        self.assertAlmostEqual(space.norm(t * x), abs(t) * space.norm(x), delta=1e-9 * (1 + abs(t) * space.norm(x)))

    @given(exponents(), vectors(4))
    @settings(max_examples=200, deadline=None)
    def test_norm_gradient_attains_the_norm(self, p, x):
        space = NormSpace(4, p)
        g = space.norm_gradient(x)
        if space.norm(x) == 0:
            self.assertEqual(space.dual_norm(g), 0.0)
        else:
            self.assertAlmostEqual(float(g @ x), space.norm(x), delta=1e-9 * space.norm(x))
            self.assertAlmostEqual(space.dual_norm(g), 1.0, places=9)

    def test_invalid_spaces(self):
        with self.assertRaises(UnsupportedExponent):
            NormSpace(2, 1.0)
        with self.assertRaises(UnsupportedExponent):
            NormSpace(2, 0.5)
        with self.assertRaises(DomainError):
            NormSpace(0, 2.0)

    def test_dual_exponent_and_equivalence_factor(self):
        self.assertEqual(NormSpace(2, 2.0).dual_exponent, 2.0)
        self.assertAlmostEqual(NormSpace(2, 3.0).dual_exponent, 1.5)
        self.assertEqual(NormSpace(2, inf).dual_exponent, 1.0)
        self.assertAlmostEqual(NormSpace(4, inf).equivalence_factor(), 2.0)
        self.assertAlmostEqual(NormSpace(4, 2.0).equivalence_factor(), 1.0)

    def test_ball_membership(self):
        ball = Ball([1.0, 1.0], 0.5, NormSpace(2, inf))
        self.assertTrue(ball.contains([1.5, 0.5]))
        self.assertFalse(ball.contains([1.6, 1.0]))
        self.assertEqual(list(ball.contains(np.array([[1.0, 1.0], [2.0, 2.0]]))), [True, False])
        with self.assertRaises(DomainError):
            Ball([0.0, 0.0], -1.0, NormSpace(2))


class TestSampling(unittest.TestCase):
    def test_sphere_samples_have_unit_norm(self):
        rng = np.random.default_rng(0)
        for p in (1.5, 2.0, 3.0, 4.0, inf):
            for dim in (1, 2, 3, 5):
                points = sample_unit_sphere(dim, p, 500, rng)
                self.assertEqual(points.shape, (500, dim))
                self.assertTrue(np.allclose(NormSpace(dim, p).norm(points), 1.0, atol=1e-12))

    def test_ball_samples_and_surface_share(self):
        rng = np.random.default_rng(1)
        for p in (1.5, 2.0, inf):
            space = NormSpace(3, p)
            points = sample_ball_points(3, p, [1.0, -1.0, 2.0], 0.3, 1000, rng, surface_fraction=0.7)
            distances = space.norm(points - np.array([1.0, -1.0, 2.0]))
            self.assertTrue(np.all(distances <= 0.3 + 1e-12))
            self.assertGreaterEqual(int(np.sum(np.isclose(distances, 0.3, rtol=0, atol=1e-12))), 700)

    def test_seeded_chunks_cover_total_deterministically(self):
        chunks = seeded_chunks(1001, 42, chunk_size=250)
        self.assertEqual([count for count, _ in chunks], [250, 250, 250, 250, 1])
        again = seeded_chunks(1001, 42, chunk_size=250)
        for (_, first), (_, second) in zip(chunks, again):
            self.assertTrue(np.array_equal(np.random.default_rng(first).random(5),
                                           np.random.default_rng(second).random(5)))
        self.assertEqual(seeded_chunks(0, 42), [])

    def test_serial_starmap_keeps_order(self):
        self.assertEqual(parallel_starmap(pow, [(2, 3), (3, 2), (5, 0)]), [8, 9, 1])
        self.assertEqual(parallel_starmap(pow, []), [])

    def test_progress_bar(self):
        stream = StringIO()
        progress = Progress(3, length=6, name="Test:", stream=stream)
        progress.increment()
        progress.done()
        self.assertIn("Test: [##....] 1/3 chunks", stream.getvalue())
        self.assertTrue(stream.getvalue().endswith("\n"))
        self.assertIn("[######] 3/3 chunks", stream.getvalue())


class TestModulusOfConvexity(unittest.TestCase):
    def test_hilbert_space_closed_form(self):
        space = NormSpace(2, 2.0)
        self.assertAlmostEqual(modulus_closed_form(space, 1.0), 1 - sqrt(0.75), places=15)
        self.assertEqual(modulus_closed_form(space, 2.0), 1.0)
        self.assertEqual(modulus_closed_form(space, 0.0), 0.0)

    def test_closed_form_rejects_unsupported_inputs(self):
        with self.assertRaises(UnsupportedExponent):
            modulus_closed_form(NormSpace(2, 1.5), 0.5)
        with self.assertRaises(UnsupportedExponent):
            modulus_closed_form(NormSpace(2, inf), 0.5)
        with self.assertRaises(DomainError):
            modulus_closed_form(NormSpace(2, 2.0), 2.5)

    def test_bruteforce_matches_closed_form(self):
        grid = MODULUS_EPS_GRID[3::4]  # 50 values spread over (0, 2]
        self.assertEqual(len(grid), 50)
        for p in (2.0, 3.0, 4.0):
            space = NormSpace(2, p)
            for eps in grid:
                self.assertAlmostEqual(modulus_bruteforce_2d(space, eps), modulus_closed_form(space, eps), delta=1e-4)

    def test_quadratic_lower_bound_below_two(self):
        space = NormSpace(2, 1.5)
        for eps in MODULUS_EPS_GRID[::10]:
            self.assertGreaterEqual(modulus_bruteforce_2d(space, eps, grid=360), eps * eps / 16 - 1e-9)
            self.assertAlmostEqual(modulus_lower_bound(space, eps), eps * eps / 16)

    def test_max_norm_modulus_vanishes(self):
        space = NormSpace(2, inf)
        for eps in (0.1, 0.5, 1.0, 1.5):
            self.assertLess(modulus_bruteforce_2d(space, eps), 1e-9)

    def test_random_planes_do_not_beat_the_coordinate_plane(self):
        for p in (2.0, 3.0):
            space = NormSpace(3, p)
            for eps in (0.5, 1.0, 1.5):
                self.assertGreaterEqual(modulus_random_search(space, eps, planes=30, seed=0),
                                        modulus_closed_form(space, eps) - 1e-4)


class TestPowerType2(unittest.TestCase):
    def test_constants(self):
        self.assertEqual(power_type2_constant(NormSpace(2, 2.0)).c, 0.125)
        self.assertAlmostEqual(power_type2_constant(NormSpace(2, 1.5)).c, 1 / 16)

    def test_grid_verification(self):
        for p, c in ((2.0, 1 / 8), (1.5, 1 / 16)):
            space = NormSpace(2, p)
            for eps in MODULUS_EPS_GRID[::8]:
                self.assertGreaterEqual(modulus_bruteforce_2d(space, eps, grid=360), c * eps * eps - 1e-9)

    def test_fails_above_two(self):
        constant = power_type2_constant(NormSpace(2, 4.0))
        self.assertFalse(constant.holds)
        self.assertLess(constant.violating_eps, 0.01)
        eps = constant.violating_eps
        self.assertLess(modulus_closed_form(NormSpace(2, 4.0), eps), 1e-3 * eps * eps)

    def test_fails_for_max_norm(self):
        constant = power_type2_constant(NormSpace(3, inf))
        self.assertFalse(constant.holds)
        self.assertIsNotNone(constant.violating_eps)


class TestBallInclusion(unittest.TestCase):
    def test_random_triples_pass_with_certified_constant(self):
        """10^4 triples, half in each space."""
        rng = np.random.default_rng(3)
        for p in (1.5, 2.0):
            space = NormSpace(2, p)
            c = power_type2_constant(space).c
            for _ in range(5000):
                x0 = rng.uniform(-1, 1, size=2)
                r = rng.uniform(0.1, 2.0)
                x1, x2 = space.ball(x0, r).sample(2, rng, surface_fraction=0.5)
                result = ball_inclusion_check(space, x0, x1, x2, r, c, samples=50, seed=rng)
                self.assertTrue(result, f"p={p}, x0={x0}, x1={x1}, x2={x2}, r={r}")

    def test_inflated_constant_produces_witness(self):
        space = NormSpace(2, 2.0)
        result = ball_inclusion_check(space, [0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], 1.0, 1.0, samples=200, seed=0)
        self.assertFalse(result)
        self.assertGreater(space.norm(result.witness), 1.0)

    def test_points_outside_big_ball(self):
        with self.assertRaises(PreconditionViolated):
            ball_inclusion_check(NormSpace(2), [0.0, 0.0], [2.0, 0.0], [0.0, 0.0], 1.0, 0.125)


if __name__ == "__main__":
    unittest.main()
