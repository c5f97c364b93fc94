"""Polynomial maps R^n -> R^m with exact derivatives, and Lipschitz estimates of their derivative."""
from .exceptions import DimensionMismatch, DomainError
from .geometry_utilities import Ball, NormSpace
from .sampling_utilities import as_generator, sample_unit_sphere
from dataclasses import dataclass, field
from itertools import product
import logging
import math
import numpy as np
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

OPERATOR_NORM_DIRECTIONS = 2000
MAX_SIGN_PATTERN_DIM = 10


@dataclass(frozen=True)
class PolyMap:
    """Polynomial map with ``n_in`` variables and one polynomial per output component.

    Each component is a sequence of ``(coefficient, exponents)`` terms, where ``exponents`` has length ``n_in``. Terms
    are kept in the given order (repeated monomials are allowed and simply add up).
    """
    n_in: int
    components: tuple
    _exponents: np.ndarray = field(init=False, repr=False, compare=False)
    _coefficients: np.ndarray = field(init=False, repr=False, compare=False)
    _selector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n_in) != self.n_in or self.n_in < 1:
            raise DomainError(f"n_in must be a positive integer, got {self.n_in}")
        components = tuple(tuple((float(c), tuple(int(e) for e in exps)) for c, exps in terms)
                           for terms in self.components)
        if not components:
            raise DomainError("a polynomial map needs at least one component")

        for i, terms in enumerate(components):
            for _, exps in terms:
                if len(exps) != self.n_in:
                    raise DimensionMismatch(f"component {i} has a term with {len(exps)} exponents, expected {self.n_in}")
                if min(exps, default=0) < 0:
                    raise DomainError(f"component {i} has a negative exponent in {exps}")

        rows = [i for i, terms in enumerate(components) for _ in terms]
        exponents = np.array([exps for terms in components for _, exps in terms], dtype=int).reshape(-1, self.n_in)
        coefficients = np.array([c for terms in components for c, _ in terms], dtype=float)
        selector = np.zeros((len(rows), len(components)))
        selector[np.arange(len(rows)), rows] = 1.0

        object.__setattr__(self, "n_in", int(self.n_in))
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "_exponents", exponents)
        object.__setattr__(self, "_coefficients", coefficients)
        object.__setattr__(self, "_selector", selector)

    @property
    def n_out(self):
        return len(self.components)

    @property
    def degree(self):
        nonzero = self._coefficients != 0
        if not nonzero.any():
            return 0
        return int(self._exponents[nonzero].sum(axis=1).max())

    def __call__(self, x):
        return evaluate(self, x)

    def component(self, i):
        return PolyMap(self.n_in, (self.components[i],))

    def shifted(self, a):
        """The map ``x -> f(x + a)``, expanded back into monomials."""
        a = _check_vector(self, a)
        components = []
        for terms in self.components:
            collected = {}
            for coefficient, exps in terms:
                per_axis = [[(math.comb(e, k) * a[i] ** (e - k), k) for k in range(e + 1)] for i, e in enumerate(exps)]
                for choice in product(*per_axis):
                    value = coefficient * math.prod(w for w, _ in choice)
                    key = tuple(k for _, k in choice)
                    collected[key] = collected.get(key, 0.0) + value
            components.append(tuple((c, k) for k, c in collected.items() if c != 0.0))
        return PolyMap(self.n_in, tuple(components))


def zero_map(n_in, n_out):
    return PolyMap(n_in, tuple(() for _ in range(n_out)))


def identity_map(n):
    return affine_map(np.eye(n))


def affine_map(A, b=None):
    """The map ``x -> A x + b``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    b = np.zeros(m) if b is None else np.asarray(b, dtype=float)
    components = []
    for i in range(m):
        terms = [(A[i, j], tuple(int(k == j) for k in range(n))) for j in range(n) if A[i, j] != 0]
        if b[i] != 0:
            terms.append((b[i], (0,) * n))
        components.append(tuple(terms))
    return PolyMap(n, tuple(components))


def stack_maps(*maps):
    """Stacks the components of maps sharing the same input dimension."""
    n_in = maps[0].n_in
    for f in maps:
        if f.n_in != n_in:
            raise DimensionMismatch(f"cannot stack maps with {f.n_in} and {n_in} inputs")
    return PolyMap(n_in, tuple(terms for f in maps for terms in f.components))


def add_constant(f, b):
    """The map ``x -> f(x) + b``; zero entries of ``b`` leave their component untouched."""
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != f.n_out:
        raise DimensionMismatch(f"offset of length {b.shape[0]} for a map with {f.n_out} components")
    constant = (0,) * f.n_in
    return PolyMap(f.n_in, tuple(terms + ((float(bi), constant),) if bi != 0 else terms
                                 for terms, bi in zip(f.components, b)))


def _check_vector(f, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (f.n_in,):
        raise DimensionMismatch(f"expected points with {f.n_in} coordinates, got shape {x.shape}")
    return x


def _monomials(x, exponents):
    """Values of each monomial (columns) at each point (rows) of a 2D ``x``."""
    return np.prod(x[:, None, :] ** exponents[None, :, :], axis=2)


def evaluate(f, x):
    """Exact evaluation of ``f`` at a point, or at each row of a 2D array.

    :type f: PolyMap
    :rtype: numpy.ndarray
    """
    x = _check_vector(f, x)
    points = np.atleast_2d(x)
    values = (_monomials(points, f._exponents) * f._coefficients) @ f._selector
    return values[0] if x.ndim == 1 else values


def jacobian(f, x):
    """Exact Jacobian (``n_out`` x ``n_in``) at a point, or a stack of Jacobians for a 2D ``x``."""
    x = _check_vector(f, x)
    points = np.atleast_2d(x)
    columns = []
    for j in range(f.n_in):
        powers = f._exponents[:, j]
        lowered = f._exponents.copy()
        lowered[:, j] = np.maximum(powers - 1, 0)
        columns.append((_monomials(points, lowered) * (f._coefficients * powers)) @ f._selector)
    jac = np.stack(columns, axis=2)
    return jac[0] if x.ndim == 1 else jac


def hessian(f, x):
    """Second-derivative tensor ``H[i, j, k] = d^2 f_i / dx_j dx_k`` at a point."""
    x = _check_vector(f, x)
    point = x.reshape(1, -1)
    H = np.zeros((f.n_out, f.n_in, f.n_in))
    for j in range(f.n_in):
        for k in range(j, f.n_in):
            weights = f._exponents[:, j] * (f._exponents[:, k] - (j == k))
            lowered = f._exponents.copy()
            lowered[:, j] -= 1
            lowered[:, k] -= 1
            usable = weights > 0
            lowered[~usable] = 0
            values = (_monomials(point, lowered) * (f._coefficients * weights * usable)) @ f._selector
            H[:, j, k] = values[0]
            H[:, k, j] = values[0]
    return H


def remainder(f, xbar, h):
    """First-order remainder ``f(xbar + h) - f(xbar) - Df(xbar) h``."""
    xbar = _check_vector(f, xbar)
    h = _check_vector(f, h)
    return evaluate(f, xbar + h) - evaluate(f, xbar) - jacobian(f, xbar) @ h


def midpoint_defect(f, x1, x2, space_out=None):
    """Distance ``||(f(x1) + f(x2))/2 - f((x1 + x2)/2)||`` in the range norm (Euclidean by default)."""
    x1 = _check_vector(f, x1)
    x2 = _check_vector(f, x2)
    space_out = NormSpace(f.n_out) if space_out is None else space_out
    defect = 0.5 * (evaluate(f, x1) + evaluate(f, x2)) - evaluate(f, 0.5 * (x1 + x2))
    return float(space_out.norm(defect))


def _sample_directions(space, samples, rng):
    """Unit vectors of ``space``: random sphere points, signed coordinate vectors and (small dim) sign patterns."""
    n = space.dim
    eye = np.eye(n)
    candidates = [sample_unit_sphere(n, space.p, samples, rng), eye, -eye]
    if n <= MAX_SIGN_PATTERN_DIM:
        signs = np.array(list(product([-1.0, 1.0], repeat=n)))
        candidates.append(signs / space.norm(signs)[:, None])
    return np.vstack(candidates)


def operator_norm(matrix, space_in, space_out, samples=OPERATOR_NORM_DIRECTIONS, seed=0):
    """Operator norm of ``matrix`` from ``space_in`` to ``space_out``.

    Exact for Euclidean norms on both sides (largest singular value) and for max norms on both sides (largest absolute
    row sum). Other pairings are estimated from below by sampling unit directions followed by a Nelder-Mead polish.

    :return: (value, method) with method one of ``'spectral'``, ``'max_row_sum'`` or ``'sampled'``
    :rtype: tuple[float, str]
    """
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.shape != (space_out.dim, space_in.dim):
        raise DimensionMismatch(f"matrix of shape {A.shape} does not map R^{space_in.dim} to R^{space_out.dim}")
    if not A.any():
        return 0.0, "exact"
    if space_in.p == 2.0 and space_out.p == 2.0:
        return float(np.linalg.norm(A, 2)), "spectral"
    if space_in.is_infinite and space_out.is_infinite:
        return float(np.abs(A).sum(axis=1).max()), "max_row_sum"

    rng = as_generator(seed)
    directions = _sample_directions(space_in, samples, rng)
    ratios = space_out.norm(directions @ A.T)
    best = int(np.argmax(ratios))

    def negative_ratio(v):
        nv = space_in.norm(v)
        return 0.0 if nv == 0 else -float(space_out.norm(A @ v)) / nv

    polished = minimize(negative_ratio, directions[best], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    return max(float(ratios[best]), -float(polished.fun)), "sampled"


def _bilinear_norm(H, space_in, space_out, samples, rng):
    r"""Estimate of :math:`\sup_{\|h\|=1} \|H[h, \cdot]\|` for a symmetric second-derivative tensor ``H``."""
    if not H.any():
        return 0.0
    euclidean = space_in.p == 2.0 and space_out.p == 2.0
    # the pairwise search below is quadratic in the number of directions
    directions = _sample_directions(space_in, samples if euclidean else min(samples, 300), rng)
    sections = np.einsum("ijk,ak->aij", H, directions)

    if euclidean:
        def section_norm(h):
            M = np.einsum("ijk,k->ij", H, h / space_in.norm(h))
            return float(np.linalg.norm(M, 2))

        values = np.linalg.svd(sections, compute_uv=False).max(axis=1)
    else:
        # sup over pairs (h, v) of unit vectors of ||H[h, v]||
        pairs = np.einsum("aij,bj->abi", sections, directions)
        values = space_out.norm(pairs).max(axis=1)

        def section_norm(h):
            M = np.einsum("ijk,k->ij", H, h / space_in.norm(h))
            return operator_norm(M, space_in, space_out, samples=200, seed=0)[0]

    best = int(np.argmax(values))
    polished = minimize(lambda h: -section_norm(h) if space_in.norm(h) > 0 else 0.0, directions[best],
                        method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
    return max(float(values[best]), -float(polished.fun))


@dataclass(frozen=True)
class LipschitzEstimate:
    """Lipschitz modulus of ``Df`` on ``region``; ``kind`` is ``'exact'`` or ``'sampled_lower_bound'``."""
    value: float
    kind: str
    region: Ball
    method: str = ""


def lipschitz_of_derivative(f, region, space_in=None, space_out=None, samples=OPERATOR_NORM_DIRECTIONS, seed=0):
    """Lipschitz modulus of the derivative of ``f`` on ``region``.

    For degree <= 2 the second derivative is constant and its operator norm is the modulus on any region. For higher
    degree the value is a sampled lower bound: the largest of ``||Df(x) - Df(x')|| / ||x - x'||`` over sampled pairs
    and ``||D^2 f(x)||`` over sampled points.

    :param f: polynomial map
    :type f: PolyMap
    :param region: ball on which the modulus is taken
    :type region: Ball
    :param space_in: domain norm, defaults to the region's space
    :type space_in: NormSpace
    :param space_out: range norm, defaults to Euclidean
    :type space_out: NormSpace
    :param samples: number of sampled directions (degree <= 2) or pairs (higher degree)
    :type samples: int
    :param seed: random seed
    :rtype: LipschitzEstimate
    """
    if not region.radius > 0:
        raise DomainError(f"region radius must be positive, got {region.radius}")
    space_in = region.space if space_in is None else space_in
    space_out = NormSpace(f.n_out) if space_out is None else space_out
    rng = as_generator(seed)

    if f.degree <= 1:
        return LipschitzEstimate(0.0, "exact", region, method="affine")
    if f.degree == 2:
        value = _bilinear_norm(hessian(f, region.center), space_in, space_out, samples, rng)
        return LipschitzEstimate(value, "exact", region, method="constant second derivative")

    first = region.sample(samples, rng)
    second = region.sample(samples, rng)
    jac_first = jacobian(f, first)
    jac_second = jacobian(f, second)
    best = 0.0
    for a, b, Ja, Jb in zip(first, second, jac_first, jac_second):
        gap = float(space_in.norm(a - b))
        if gap > 1e-12:
            best = max(best, operator_norm(Ja - Jb, space_in, space_out, samples=200, seed=0)[0] / gap)

    for point in first[:min(samples, 200)]:
        best = max(best, _bilinear_norm(hessian(f, point), space_in, space_out, 200, rng))

    logger.debug("sampled lower bound %.6g for lip(Df) on %r", best, region)
    return LipschitzEstimate(best, "sampled_lower_bound", region, method="sampled pairs and second derivatives")
