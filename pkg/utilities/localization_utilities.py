"""Constrained problems localized to a ball: image map, localized solutions and their Lagrange multipliers."""
from .cone_utilities import ConeSpec
from .exceptions import DimensionMismatch, EpsilonNonpositive, Infeasible, MultiplierNotFound, NotRegular
from .geometry_utilities import Ball, CheckResult, NormSpace
from .polymap_utilities import add_constant, evaluate, jacobian, PolyMap, stack_maps
from .regularity_utilities import gauss_newton_preimage, surjectivity_check
from .sampling_utilities import as_generator
from dataclasses import dataclass, field, replace
import logging
import math
import numpy as np
from scipy.optimize import linprog, lsq_linear, minimize
import warnings

logger = logging.getLogger(__name__)

PENALTY_ROUNDS = 12
FEASIBILITY_TOL = 1e-8
BOUNDARY_TOL = 1e-4
ACTIVITY_TOL = 1e-6
MULTIPLIER_TOL = 1e-4
DISCREPANCY_TOL = 1e-3
SEPARATION_BOUND = 1e3


@dataclass(frozen=True)
class ConstrainedProblem:
    r"""Minimize :math:`\varphi(x)` subject to :math:`g(x) \in C` over ``space``."""
    objective: PolyMap
    constraint: PolyMap
    cone: ConeSpec
    space: NormSpace

    def __post_init__(self):
        if self.objective.n_out != 1:
            raise DimensionMismatch(f"the objective must be scalar, got {self.objective.n_out} components")
        for name, f in (("objective", self.objective), ("constraint", self.constraint)):
            if f.n_in != self.space.dim:
                raise DimensionMismatch(f"{name} has {f.n_in} variables but the space has dimension {self.space.dim}")
        if self.constraint.n_out != self.cone.dim:
            raise DimensionMismatch(f"constraint has {self.constraint.n_out} components but the cone has dimension "
                                    f"{self.cone.dim}")

    @property
    def dim(self):
        return self.space.dim

    def phi(self, x):
        values = evaluate(self.objective, x)
        return values[..., 0] if np.ndim(values) > 1 else float(values[0])

    def g(self, x):
        return evaluate(self.constraint, x)

    def grad_phi(self, x):
        return jacobian(self.objective, x)[0]

    def violation(self, x):
        return self.cone.violation(self.g(x))

    def is_feasible(self, x, tol=FEASIBILITY_TOL):
        return self.violation(x) <= tol

    def lagrangian(self, lam, x):
        r""":math:`L(\lambda, x) = \varphi(x) + \langle \lambda, g(x) \rangle`, vectorized over rows of ``x``."""
        return self.phi(x) + self.g(x) @ np.asarray(lam, dtype=float)

    def stacked_map(self):
        return stack_maps(self.objective, self.constraint)

    def perturbed(self, y):
        """The problem with constraint ``g(x) + y`` in C."""
        return replace(self, constraint=add_constant(self.constraint, y))


@dataclass(frozen=True, eq=False)
class LocalizedSolution:
    """Solution of the problem restricted to B(x0, eps), with multipliers once :func:`compute_multiplier` ran.

    ``nu_eps`` is the multiplier of the ball constraint and ``boundary_gap = | ||x_eps - x0|| - eps |``.
    """
    x_eps: np.ndarray
    value: float
    x0: np.ndarray
    eps: float
    boundary_gap: float
    lambda_eps: np.ndarray = None
    nu_eps: float = None
    diagnostics: dict = field(default_factory=dict)


def image_map(P, x0, x):
    r"""The image map :math:`x \mapsto (\varphi(x) - \varphi(x_0), g(x))`.

    :rtype: tuple[float, numpy.ndarray]
    """
    x0 = np.asarray(x0, dtype=float)
    x = np.asarray(x, dtype=float)
    if x0.shape != (P.dim,) or x.shape != (P.dim,):
        raise DimensionMismatch(f"points must have {P.dim} coordinates")
    return P.phi(x) - P.phi(x0), P.g(x)


def _feasible_samples(P, x0, eps, samples, rng):
    """Sampled points of B(x0, eps), infeasible ones moved to ``g^{-1}(proj_C(g(x)))`` by Gauss-Newton when possible."""
    ball = Ball(x0, eps, P.space)
    points = []
    for x in ball.sample(samples, rng):
        gx = P.g(x)
        if P.cone.violation(gx) > 0:
            restored = gauss_newton_preimage(P.constraint, P.cone.project(gx), x)
            if not restored.converged:
                continue
            x = restored.x
        if ball.contains(x) and P.is_feasible(x):
            points.append(x)
    return np.array(points).reshape(-1, P.dim)


def local_optimality_search(P, x0, eps, samples=2000, seed=0):
    """Whether no sampled feasible point of B(x0, eps) improves the objective at ``x0`` by more than 1e-10.

    False means ``x0`` is certainly not a solution of the localized problem; True only means no descent was found.

    :raises Infeasible: if ``x0`` is not feasible
    :rtype: bool
    """
    x0 = np.asarray(x0, dtype=float)
    if not P.is_feasible(x0):
        raise Infeasible(f"x0={x0.tolist()} is not feasible (cone violation {P.violation(x0):.3g})")
    if eps <= 0:
        return True
    points = _feasible_samples(P, x0, eps, samples, as_generator(seed))
    return not bool(np.any(P.phi(points) < P.phi(x0) - 1e-10)) if points.size else True


def _ball_constraints(center, radius, space):
    """SLSQP inequality constraints describing B(center, radius) in ``space``."""
    n = space.dim
    if space.is_infinite:
        eye = np.eye(n)
        return [{"type": "ineq", "fun": lambda x: np.concatenate([radius - (x - center), radius + (x - center)]),
                 "jac": lambda x: np.vstack([-eye, eye])}]
    p = space.p
    return [{"type": "ineq", "fun": lambda x: np.array([radius ** p - np.sum(np.abs(x - center) ** p)]),
             "jac": lambda x: (-p * np.sign(x - center) * np.abs(x - center) ** (p - 1.0))[None, :]}]


def _cone_constraints(P):
    mask = P.cone.nonpositive_mask
    constraints = []
    if mask.any():
        constraints.append({"type": "ineq", "fun": lambda x: -P.g(x)[mask],
                            "jac": lambda x: -jacobian(P.constraint, x)[mask]})
    if (~mask).any():
        constraints.append({"type": "eq", "fun": lambda x: P.g(x)[~mask],
                            "jac": lambda x: jacobian(P.constraint, x)[~mask]})
    return constraints


def _penalized(P, x0, eps, rho):
    """Quadratic penalty of cone and ball violations added to the objective, with its gradient."""
    space = P.space

    def value_and_grad(x):
        gx = P.g(x)
        residual = gx - P.cone.project(gx)
        distance = float(space.norm(x - x0))
        excess = max(0.0, distance - eps)
        value = P.phi(x) + 0.5 * rho * (residual @ residual + excess * excess)
        grad = P.grad_phi(x) + rho * jacobian(P.constraint, x).T @ residual
        if excess > 0:
            grad = grad + rho * excess * space.norm_gradient(x - x0)
        return value, grad

    return value_and_grad


def _radial_clip(x, center, radius, space):
    distance = float(space.norm(x - center))
    if distance > radius:
        return center + (x - center) * (radius / distance)
    return x


def _local_minimize(P, x0, eps, start, penalty_rounds=PENALTY_ROUNDS, extra_ball=None):
    """One start: penalty rounds with BFGS (penalty x10 per round), then an SLSQP polish on the exact constraints."""
    x = np.array(start, dtype=float)
    rounds = 0
    for k in range(penalty_rounds):
        rounds = k + 1
        result = minimize(_penalized(P, x0, eps, 10.0 ** k), x, jac=True, method="BFGS", options={"gtol": 1e-12})
        x = result.x
        if P.violation(x) <= 1e-6 and float(P.space.norm(x - x0)) <= eps * (1.0 + 1e-6):
            break

    constraints = _cone_constraints(P) + _ball_constraints(x0, eps, P.space)
    if extra_ball is not None:
        constraints += _ball_constraints(extra_ball[0], extra_ball[1], P.space)
    polished = minimize(P.phi, x, jac=P.grad_phi, method="SLSQP", constraints=constraints,
                        options={"maxiter": 500, "ftol": 1e-14})
    x = _radial_clip(polished.x, x0, eps, P.space)
    if extra_ball is not None:
        x = _radial_clip(x, extra_ball[0], extra_ball[1], P.space)
    return x, rounds


def minimize_over_ball(P, x0, eps, starts, penalty_rounds=PENALTY_ROUNDS, extra_ball=None, tol=FEASIBILITY_TOL):
    """Best feasible point of B(x0, eps) (and of ``extra_ball`` if given) over the given starting points.

    Values within 1e-12 of the best count as ties and the lexicographically smallest point wins.

    :return: (x, value, diagnostics), or (None, inf, diagnostics) if no start produced a feasible point
    """
    x0 = np.asarray(x0, dtype=float)
    found = []
    max_rounds = 0
    for start in starts:
        x, rounds = _local_minimize(P, x0, eps, start, penalty_rounds=penalty_rounds, extra_ball=extra_ball)
        max_rounds = max(max_rounds, rounds)
        if P.is_feasible(x, tol=tol):
            found.append((P.phi(x), x))

    diagnostics = {"starts": len(starts), "feasible_starts": len(found), "penalty_rounds": max_rounds}
    if not found:
        return None, math.inf, diagnostics
    best_value = min(value for value, _ in found)
    tied = [x for value, x in found if value <= best_value + 1e-12]
    x = min(tied, key=lambda point: tuple(point))
    return x, P.phi(x), diagnostics


def solve_localization(P, x0, eps, budget=8, seed=0, penalty_rounds=PENALTY_ROUNDS):
    """Solves the problem restricted to B(x0, eps) by multi-start penalized descent and SLSQP polishing.

    The starts are ``x0`` and ``budget - 1`` sampled points of the ball. At a regular ``x0`` the solution is expected on
    the sphere of the ball; ``boundary_gap`` records how far it is, with a warning beyond 1e-4.

    :param P: constrained problem
    :type P: ConstrainedProblem
    :param x0: feasible reference point
    :param eps: localization radius
    :type eps: float
    :param budget: number of starting points
    :type budget: int
    :param seed: random seed
    :raises EpsilonNonpositive: if ``eps <= 0``
    :raises Infeasible: if ``x0`` is infeasible or no feasible point was found
    :raises NotRegular: if the derivative of ``(phi, g)`` at ``x0`` is not onto
    :rtype: LocalizedSolution
    """
    if not eps > 0:
        raise EpsilonNonpositive(f"eps must be positive, got {eps}")
    x0 = np.asarray(x0, dtype=float)
    if not P.is_feasible(x0):
        raise Infeasible(f"x0={x0.tolist()} is not feasible (cone violation {P.violation(x0):.3g})")
    regularity = surjectivity_check(P.stacked_map(), x0)
    if not regularity:
        raise NotRegular(regularity.rank, regularity.n_out)

    rng = as_generator(seed)
    starts = [x0] + list(Ball(x0, eps, P.space).sample(max(budget - 1, 0), rng, surface_fraction=0.5))
    x, value, diagnostics = minimize_over_ball(P, x0, eps, starts, penalty_rounds=penalty_rounds)
    if x is None:
        raise Infeasible(f"no feasible point of B(x0, {eps}) was found from {len(starts)} starts")

    boundary_gap = abs(float(P.space.norm(x - x0)) - eps)
    if boundary_gap > BOUNDARY_TOL:
        warnings.warn(f"the localized solution lies {boundary_gap:.3g} inside the sphere of B(x0, {eps}); "
                      f"eps may be too large for this problem")
    diagnostics["feasibility_residual"] = P.violation(x)
    logger.info("localized solution %s with value %.9g (boundary gap %.3g)", x.tolist(), value, boundary_gap)
    return LocalizedSolution(x_eps=x, value=value, x0=x0, eps=eps, boundary_gap=boundary_gap, diagnostics=diagnostics)


def _lagrangian_slack(P, lam, x_eps, points):
    r""":math:`\min_j L(\lambda, x_j) - L(\lambda, x_\epsilon)` over sampled points."""
    if not points.size:
        return 0.0
    return float(np.min(P.lagrangian(lam, points)) - P.lagrangian(lam, x_eps[None, :])[0])


def compute_multiplier(P, sol, samples=2000, seed=0, tol=MULTIPLIER_TOL, activity_tol=ACTIVITY_TOL):
    r"""Lagrange multipliers :math:`(\lambda_\epsilon, \nu_\epsilon)` of a localized solution.

    Primary method: bounded least squares for :math:`\nabla\varphi(x_\epsilon) + J_g(x_\epsilon)^T\lambda + \nu d = 0`
    with :math:`\lambda` in the negative dual cone, zero on inactive constraints, :math:`\nu \geq 0` and ``d`` the
    ball-constraint normal at :math:`x_\epsilon` (``nu = 0`` if the ball is inactive). Cross-check: a linear program over
    sampled points of the ball that finds the multiplier (objective coefficient normalized to 1) whose Lagrangian is
    smallest at :math:`x_\epsilon` with the least worst-case violation. Both are recorded in the diagnostics; their
    Lagrangian-minimality slacks differing by more than 1e-3 raises a warning.

    :param P: constrained problem
    :type P: ConstrainedProblem
    :param sol: solution from :func:`solve_localization`
    :type sol: LocalizedSolution
    :raises MultiplierNotFound: if neither method reaches residual ``tol``
    :rtype: LocalizedSolution
    """
    x_eps, x0, eps = sol.x_eps, sol.x0, sol.eps
    mask = P.cone.nonpositive_mask
    gx = P.g(x_eps)
    inactive = mask & (gx < -activity_tol)
    ball_active = sol.boundary_gap <= activity_tol * max(1.0, eps)
    rng = as_generator(seed)

    # least squares over the multipliers that are not forced to zero
    free = ~inactive
    columns = [jacobian(P.constraint, x_eps).T[:, free]]
    lower = [np.where(mask[free], 0.0, -np.inf)]
    if ball_active:
        columns.append(P.space.norm_gradient(x_eps - x0)[:, None])
        lower.append(np.zeros(1))
    A = np.hstack(columns)
    b = -P.grad_phi(x_eps)
    lam_ls = np.zeros(P.cone.dim)
    nu_ls = 0.0
    if A.shape[1]:
        fit = lsq_linear(A, b, bounds=(np.concatenate(lower), np.full(A.shape[1], np.inf)), method="bvls")
        lam_ls[free] = fit.x[:int(free.sum())]
        nu_ls = float(fit.x[-1]) if ball_active else 0.0
        residual_ls = float(np.linalg.norm(A @ fit.x - b))
    else:
        residual_ls = float(np.linalg.norm(b))

    # separation over sampled points of the ball: min t s.t. L(lam, x_j) - L(lam, x_eps) >= -t
    points = Ball(x0, eps, P.space).sample(samples, rng)
    dphi = P.phi(points) - P.phi(x_eps)
    dg = P.g(points) - gx
    m = P.cone.dim
    bounds = [(0.0, 0.0) if inactive[i] else ((0.0, SEPARATION_BOUND) if mask[i] else
                                                (-SEPARATION_BOUND, SEPARATION_BOUND)) for i in range(m)]
    separation = linprog(np.concatenate([np.zeros(m), [1.0]]), A_ub=np.hstack([-dg, -np.ones((len(points), 1))]),
                         b_ub=dphi, bounds=bounds + [(0.0, None)], method="highs")
    if separation.success:
        lam_lp = separation.x[:m]
        residual_lp = float(separation.x[m])
    else:
        lam_lp = np.full(m, np.nan)
        residual_lp = math.inf

    slack_ls = _lagrangian_slack(P, lam_ls, x_eps, points)
    slack_lp = _lagrangian_slack(P, lam_lp, x_eps, points) if separation.success else -math.inf
    discrepancy = abs(slack_ls - slack_lp)
    diagnostics = dict(sol.diagnostics, stationarity_residual=residual_ls, separation_residual=residual_lp,
                       lambda_least_squares=lam_ls, lambda_separation=lam_lp, slack_least_squares=slack_ls,
                       slack_separation=slack_lp, multiplier_discrepancy=bool(discrepancy > DISCREPANCY_TOL))

    if discrepancy > DISCREPANCY_TOL:
        warnings.warn(f"multiplier methods disagree: Lagrangian-minimality slacks {slack_ls:.3g} (least squares) "
                      f"and {slack_lp:.3g} (separation)")

    if residual_ls <= tol:
        diagnostics["multiplier_method"] = "least_squares"
        diagnostics["complementarity"] = float(lam_ls @ gx)
        return replace(sol, lambda_eps=lam_ls, nu_eps=nu_ls, diagnostics=diagnostics)
    if residual_lp <= tol:
        diagnostics["multiplier_method"] = "separation"
        diagnostics["complementarity"] = float(lam_lp @ gx)
        logger.info("least squares residual %.3g too large, using the separation multiplier", residual_ls)
        return replace(sol, lambda_eps=lam_lp, nu_eps=math.nan, diagnostics=diagnostics)
    raise MultiplierNotFound(f"stationarity residual {residual_ls:.3g} and separation residual {residual_lp:.3g} "
                             f"both exceed {tol:g}")


def check_lagrangian_min(P, sol, samples=2000, seed=0, tol=1e-8, lam=None):
    r"""Checks :math:`L(\lambda, x) \geq L(\lambda, x_\epsilon) - tol` on surface-biased samples of B(x0, eps).

    :param lam: multiplier to test, defaults to ``sol.lambda_eps``
    :return: passed, or the sampled point with the lowest Lagrangian as witness
    :rtype: CheckResult
    """
    lam = sol.lambda_eps if lam is None else np.asarray(lam, dtype=float)
    points = Ball(sol.x0, sol.eps, P.space).sample(samples, as_generator(seed))
    gaps = P.lagrangian(lam, points) - P.lagrangian(lam, sol.x_eps[None, :])[0]
    worst = int(np.argmin(gaps))
    details = {"min_gap": float(gaps[worst])}
    if gaps[worst] < -tol:
        return CheckResult(False, witness=points[worst], details=details)
    return CheckResult(True, details=details)


def verify_localized_optimality(P, sol, samples=2000, seed=0, tol=1e-8):
    """Checks that no sampled feasible point of B(x0, eps) has objective below ``sol.value - tol``.

    :rtype: CheckResult
    """
    points = _feasible_samples(P, sol.x0, sol.eps, samples, as_generator(seed))
    if not points.size:
        return CheckResult(True, details={"feasible_points": 0})
    values = P.phi(points)
    worst = int(np.argmin(values))
    details = {"feasible_points": len(points), "min_value": float(values[worst])}
    if values[worst] < sol.value - tol:
        return CheckResult(False, witness=points[worst], details=details)
    return CheckResult(True, details=details)
