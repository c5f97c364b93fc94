from hypothesis import strategies as st
from math import inf
import numpy as np
from polyakconvexity.polymap_utilities import PolyMap

EXPONENTS = (1.5, 2.0, 3.0, 4.0, inf)


def exponents():
    return st.sampled_from(EXPONENTS)


def vectors(dim, bound=10.0):
    # coordinates are either zero or at least 1e-6 in size so that p-th powers never underflow
    coordinates = st.floats(-bound, bound, allow_nan=False, allow_infinity=False).map(
        lambda v: 0.0 if abs(v) < 1e-6 else v)
    return st.lists(coordinates, min_size=dim, max_size=dim).map(np.array)


def generate_random_quadratic_map(n_in, n_out, rng, scale=1.0):
    """Random polynomial map of degree at most 2 with coefficients uniform in [-scale, scale]."""
    components = []
    for _ in range(n_out):
        terms = []
        for i in range(n_in):
            terms.append((rng.uniform(-scale, scale), tuple(int(k == i) for k in range(n_in))))
            for j in range(i, n_in):
                exps = [0] * n_in
                exps[i] += 1
                exps[j] += 1
                terms.append((rng.uniform(-scale, scale), tuple(exps)))
        terms.append((rng.uniform(-scale, scale), (0,) * n_in))
        components.append(tuple(terms))
    return PolyMap(n_in, tuple(components))


def generate_random_cubic_map(n_in, n_out, rng, scale=1.0):
    """Random polynomial map with pure cubes added to a random quadratic part."""
    quadratic = generate_random_quadratic_map(n_in, n_out, rng, scale=scale)
    components = []
    for terms in quadratic.components:
        cubes = tuple((rng.uniform(-scale, scale), tuple(3 * int(k == i) for k in range(n_in))) for i in range(n_in))
        components.append(terms + cubes)
    return PolyMap(n_in, tuple(components))


def assert_vectors_almost_equal(self, first, second, atol=1e-8):
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    self.assertEqual(first.shape, second.shape)
    self.assertTrue(np.allclose(first, second, rtol=0.0, atol=atol), f"{first} != {second} (atol={atol})")
