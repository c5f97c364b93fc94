"""Finite-dimensional p-norm spaces: norms, balls, moduli of convexity and the power-type-2 condition."""
from .exceptions import DomainError, PreconditionViolated, UnsupportedExponent
from .sampling_utilities import as_generator, sample_ball_points, sample_unit_sphere, SURFACE_FRACTION
from dataclasses import dataclass, field
import math
import numpy as np
from scipy.optimize import minimize_scalar

MODULUS_EPS_GRID = tuple(round(0.01 * k, 2) for k in range(1, 201))
BISECTION_STEPS = 60


@dataclass
class CheckResult:
    """Outcome of a sampled check: ``passed`` plus, on failure, the first witness found."""
    passed: bool
    witness: object = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


@dataclass(frozen=True)
class NormSpace:
    r""":math:`\mathbb{R}^{dim}` with the norm :math:`\|\cdot\|_p`, :math:`1 < p \leq \infty`."""
    dim: int
    p: float = 2.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.dim}")
        p = float(self.p)
        if not p > 1:
            raise UnsupportedExponent(f"p must lie in (1, inf], got {self.p}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "p", p)

    @property
    def is_infinite(self):
        return math.isinf(self.p)

    @property
    def dual_exponent(self):
        if self.is_infinite:
            return 1.0
        return self.p / (self.p - 1.0)

    def norm(self, x):
        """Norm of a vector, or of each row of a 2D array."""
        return np.linalg.norm(np.asarray(x, dtype=float), ord=self.p, axis=-1)

    def dual_norm(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), ord=self.dual_exponent, axis=-1)

    def norm_gradient(self, x):
        """A unit-dual-norm functional attaining the norm at ``x`` (the gradient where the norm is smooth)."""
        x = np.asarray(x, dtype=float)
        nx = self.norm(x)
        if nx == 0:
            return np.zeros_like(x)
        if self.is_infinite:
            g = np.zeros_like(x)
            i = int(np.argmax(np.abs(x)))
            g[i] = np.sign(x[i])
            return g
        return np.sign(x) * (np.abs(x) / nx) ** (self.p - 1.0)

    def equivalence_factor(self):
        r"""Constant :math:`k` with :math:`\|x\|_2 / k \leq \|x\|_p \leq k \|x\|_2` in this dimension."""
        inv_p = 0.0 if self.is_infinite else 1.0 / self.p
        return self.dim ** abs(0.5 - inv_p)

    def ball(self, center, radius):
        return Ball(center, radius, self)

    def sample_sphere(self, n, rng):
        return sample_unit_sphere(self.dim, self.p, n, rng)


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float
    space: NormSpace

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(-1)
        if center.shape[0] != self.space.dim:
            raise DomainError(f"ball center has dimension {center.shape[0]}, expected {self.space.dim}")
        if not self.radius >= 0:
            raise DomainError(f"ball radius must be nonnegative, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, x, tol=0.0):
        """Membership ``norm(x - center) <= radius + tol``, vectorized over rows."""
        return self.space.norm(np.asarray(x, dtype=float) - self.center) <= self.radius + tol

    def sample(self, n, rng, surface_fraction=SURFACE_FRACTION):
        return sample_ball_points(self.space.dim, self.space.p, self.center, self.radius, n, rng,
                                  surface_fraction=surface_fraction)

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius!r}, p={self.space.p!r})"


@dataclass(frozen=True)
class PowerTypeConstant:
    r"""Constant :math:`c` with :math:`\delta(\epsilon) \geq c \epsilon^2`, or ``c=None`` when no such constant exists."""
    c: float = None
    violating_eps: float = None
    reason: str = ""

    @property
    def holds(self):
        return self.c is not None


def _check_eps(eps):
    if not 0.0 <= eps <= 2.0:
        raise DomainError(f"eps must lie in [0, 2], got {eps}")


def modulus_closed_form(space, eps):
    r"""Exact modulus of convexity of :math:`\ell_p^n`, :math:`p \geq 2`.

    :math:`1 - \sqrt{1 - \epsilon^2/4}` for p = 2 and :math:`1 - (1 - (\epsilon/2)^p)^{1/p}` for p > 2.

    :param space: a space with ``2 <= p < inf``
    :type space: NormSpace
    :param eps: distance between the two unit vectors
    :type eps: float
    :rtype: float
    """
    if space.is_infinite or space.p < 2:
        raise UnsupportedExponent(f"no closed form for the modulus of convexity with p={space.p}")
    _check_eps(eps)

    if eps == 2.0:
        return 1.0
    if space.p == 2.0:
        return 1.0 - math.sqrt(1.0 - eps * eps / 4.0)
    # 1 - (1 - t)^(1/p) written to keep precision when t = (eps/2)^p is tiny
    return -math.expm1(math.log1p(-(eps / 2.0) ** space.p) / space.p)


def modulus_lower_bound(space, eps):
    r"""Lower bound :math:`\frac{p-1}{8}\epsilon^2` for the modulus of convexity of :math:`\ell_p^n`, :math:`1<p<2`."""
    if not 1.0 < space.p < 2.0:
        raise UnsupportedExponent(f"the quadratic lower bound is only available for 1 < p < 2, got p={space.p}")
    _check_eps(eps)
    return (space.p - 1.0) / 8.0 * eps * eps


def _section_points(space, basis, thetas):
    """Points of the unit sphere in the 2D section spanned by the rows of ``basis``, at angles ``thetas``."""
    directions = np.cos(thetas)[:, None] * basis[0] + np.sin(thetas)[:, None] * basis[1]
    return directions / space.norm(directions)[:, None]


def _section_deficits(space, basis, thetas, eps):
    """For each starting angle, the midpoint deficit 1 - ||(u1 + u2)/2|| of the pair at distance ``eps``.

    The partner of ``u(theta)`` is found by bisection over the half turn ``theta + t``, ``t`` in [0, pi], on which the
    distance from ``u(theta)`` rises from 0 to 2.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    first = _section_points(space, basis, thetas)
    lo = np.zeros_like(thetas)
    hi = np.full_like(thetas, math.pi)

    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        distance = space.norm(first - _section_points(space, basis, thetas + mid))
        below = distance < eps
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)

    second = _section_points(space, basis, thetas + 0.5 * (lo + hi))
    return 1.0 - space.norm(0.5 * (first + second))


def _coordinate_basis(dim):
    basis = np.zeros((2, dim))
    basis[0, 0] = 1.0
    basis[1, 1] = 1.0
    return basis


def modulus_bruteforce_2d(space, eps, grid=720):
    r"""Numerical estimate of the modulus of convexity on the :math:`(x_1, x_2)` coordinate plane.

    Every evaluated pair is feasible, so the result bounds the true modulus from above (up to bisection precision). A
    grid over the starting angle is refined with a bounded scalar minimization around the best grid point.

    :param space: space with ``dim >= 2``
    :type space: NormSpace
    :param eps: distance between the two unit vectors, in [0, 2]
    :type eps: float
    :param grid: number of starting angles on the full turn
    :type grid: int
    :rtype: float
    """
    if space.dim < 2:
        raise DomainError(f"a 2-dimensional section needs dim >= 2, got {space.dim}")
    _check_eps(eps)
    if eps == 0.0:
        return 0.0
    if eps >= 2.0 - 1e-12:
        return 1.0

    basis = _coordinate_basis(space.dim)
    thetas = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
    deficits = _section_deficits(space, basis, thetas, eps)
    best = int(np.argmin(deficits))
    step = 2.0 * math.pi / grid

    refined = minimize_scalar(lambda t: float(_section_deficits(space, basis, [t], eps)[0]),
                              bounds=(thetas[best] - step, thetas[best] + step), method="bounded",
                              options={"xatol": 1e-10})
    return float(min(deficits[best], refined.fun))


def modulus_random_search(space, eps, planes=100, grid=360, seed=None):
    """Upper estimate of the modulus of convexity over random 2-dimensional sections of the whole space.

    Useful for checking that no section does better than the coordinate plane searched by
    :func:`modulus_bruteforce_2d`.

    :rtype: float
    """
    if space.dim < 2:
        raise DomainError(f"a 2-dimensional section needs dim >= 2, got {space.dim}")
    _check_eps(eps)
    if eps == 0.0:
        return 0.0

    rng = as_generator(seed)
    thetas = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
    best = math.inf
    for _ in range(planes):
        q, _ = np.linalg.qr(rng.standard_normal((space.dim, 2)))
        best = min(best, float(np.min(_section_deficits(space, q.T, thetas, eps))))
    return best


def _log_modulus_closed_form(p, eps):
    """log of the p >= 2 closed-form modulus, stable when (eps/2)^p underflows."""
    log_t = p * math.log(eps / 2.0)
    if log_t < -700.0:
        return log_t - math.log(p)
    return math.log(-math.expm1(math.log1p(-math.exp(log_t)) / p))


def power_type2_constant(space):
    r"""The constant :math:`c > 0` with :math:`\delta(\epsilon) \geq c\epsilon^2` on [0, 2], when one exists.

    p = 2 gives 1/8 and 1 < p < 2 gives (p - 1)/8. For p > 2 the modulus behaves like :math:`(\epsilon/2)^p/p`, which
    is :math:`o(\epsilon^2)`, and for p = inf it vanishes identically; both are reported as a failing value carrying a
    violating :math:`\epsilon` at which :math:`\delta(\epsilon) < 10^{-3}\epsilon^2`.

    :type space: NormSpace
    :rtype: PowerTypeConstant
    """
    p = space.p
    if p == 2.0:
        return PowerTypeConstant(c=0.125, reason="Hilbert space")
    if p < 2.0:
        return PowerTypeConstant(c=(p - 1.0) / 8.0, reason="lower bound (p-1)/8 for 1 < p < 2")
    if space.is_infinite:
        return PowerTypeConstant(violating_eps=1.0, reason="the max-norm modulus of convexity vanishes on [0, 2)")

    threshold = math.log(1e-3)
    for k in range(3, 308):
        eps = 10.0 ** -k
        if _log_modulus_closed_form(p, eps) - 2.0 * math.log(eps) < threshold:
            return PowerTypeConstant(violating_eps=eps,
                                     reason=f"delta(eps)/eps^2 < 1e-3 at eps={eps:g}, so no c > 0 works")
    return PowerTypeConstant(reason=f"delta(eps)/eps^2 ~ eps^{p - 2:g} tends to 0, so no c > 0 works")


def ball_inclusion_check(space, x0, x1, x2, r, c, samples=2000, seed=None, tol=1e-10):
    r"""Checks :math:`B((x_1+x_2)/2, c\|x_1-x_2\|^2/r) \subseteq B(x_0, r)` on surface-biased samples of the small ball.

    :param space: ambient space
    :type space: NormSpace
    :param x0: center of the big ball
    :param x1: first point of B(x0, r)
    :param x2: second point of B(x0, r)
    :param r: radius of the big ball
    :type r: float
    :param c: power-type constant
    :type c: float
    :param samples: number of sampled points of the small ball
    :type samples: int
    :param seed: random seed
    :param tol: relative slack allowed on the big ball's radius
    :type tol: float
    :return: passed, or the sampled point farthest outside B(x0, r) as witness
    :rtype: CheckResult
    """
    if not r > 0:
        raise DomainError(f"radius must be positive, got {r}")
    x0, x1, x2 = (np.asarray(v, dtype=float) for v in (x0, x1, x2))
    big = Ball(x0, r, space)
    for name, x in (("x1", x1), ("x2", x2)):
        if not big.contains(x, tol=tol * r):
            raise PreconditionViolated(f"{name} lies outside B(x0, {r}): distance {float(space.norm(x - x0)):.6g}")

    midpoint = 0.5 * (x1 + x2)
    small_radius = c * float(space.norm(x1 - x2)) ** 2 / r
    details = {"midpoint": midpoint, "small_radius": small_radius}

    if small_radius == 0.0:
        points = midpoint[None, :]
    else:
        points = Ball(midpoint, small_radius, space).sample(samples, seed)

    excess = space.norm(points - x0) - r
    worst = int(np.argmax(excess))
    details["max_excess"] = float(excess[worst])
    if excess[worst] > tol * r:
        return CheckResult(False, witness=points[worst], details=details)
    return CheckResult(True, details=details)
