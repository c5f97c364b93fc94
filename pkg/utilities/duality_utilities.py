"""Saddle points of the Lagrangian of a localized problem, its dual function, and duality gaps."""
from .cone_utilities import dual_cone_generators
from .geometry_utilities import Ball, CheckResult
from .localization_utilities import _ball_constraints, check_lagrangian_min
from .polymap_utilities import jacobian
from .sampling_utilities import as_generator
from dataclasses import dataclass
import logging
import math
import numpy as np
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

MAX_MULTIPLIER_MAGNITUDE = 10.0
COMPLEMENTARITY_TOL = 1e-8
DUAL_STARTS = 8


def sample_dual_cone(cone, n, rng, magnitude=MAX_MULTIPLIER_MAGNITUDE):
    """Random nonnegative combinations of the negative dual cone's generators, each of norm at most ``magnitude``.

    :rtype: numpy.ndarray of shape (n, cone.dim)
    """
    generators = dual_cone_generators(cone).generators
    weights = rng.exponential(size=(n, generators.shape[0])) * (rng.random((n, generators.shape[0])) < 0.7)
    combos = weights @ generators
    norms = np.linalg.norm(combos, axis=1)
    scale = magnitude * rng.random(n) / np.where(norms > 0, norms, 1.0)
    return combos * scale[:, None]


def saddle_point_check(P, sol, samples=2000, seed=0, tol=1e-8, lam=None):
    r"""Checks that :math:`(\lambda_\epsilon, x_\epsilon)` is a saddle point of the Lagrangian on
    :math:`C^\ominus \times B(x_0, \epsilon)`.

    First :math:`\lambda_\epsilon \in C^\ominus` and :math:`\langle \lambda_\epsilon, g(x_\epsilon) \rangle = 0` are
    verified. Then :math:`L(\lambda, x_\epsilon) \leq L(\lambda_\epsilon, x_\epsilon) + tol` is tested on sampled
    multipliers of magnitude up to 10 and :math:`L(\lambda_\epsilon, x_\epsilon) \leq L(\lambda_\epsilon, x) + tol` on
    sampled points of the ball.

    :param P: constrained problem
    :type P: ConstrainedProblem
    :param sol: localized solution with multipliers
    :type sol: LocalizedSolution
    :param lam: multiplier to test, defaults to ``sol.lambda_eps``
    :return: passed, or a witness ``('multiplier', lam)``, ``('lambda', lam)`` or ``('x', x)`` naming the failed part
    :rtype: CheckResult
    """
    lam = sol.lambda_eps if lam is None else np.asarray(lam, dtype=float)
    gx = P.g(sol.x_eps)
    complementarity = float(lam @ gx)
    details = {"complementarity": complementarity}
    if not P.cone.dual_contains(lam, tol=tol) or abs(complementarity) > max(tol, COMPLEMENTARITY_TOL):
        return CheckResult(False, witness=("multiplier", lam), details=details)

    rng = as_generator(seed)
    lambdas = sample_dual_cone(P.cone, samples, rng)
    left = (lambdas - lam) @ gx
    worst = int(np.argmax(left)) if len(left) else None
    details["max_left_excess"] = float(left[worst]) if worst is not None else -math.inf
    if worst is not None and left[worst] > tol:
        return CheckResult(False, witness=("lambda", lambdas[worst]), details=details)

    right = check_lagrangian_min(P, sol, samples=samples, seed=rng, tol=tol, lam=lam)
    details["min_right_gap"] = right.details["min_gap"]
    if not right:
        return CheckResult(False, witness=("x", right.witness), details=details)
    return CheckResult(True, details=details)


def dual_function(P, x0, eps, lam, starts=DUAL_STARTS, seed=0, include=()):
    r"""Estimate of :math:`\inf_{x \in B(x_0,\epsilon)} L(\lambda, x)` by multi-start SLSQP.

    The estimate is the smallest Lagrangian value found, so it never lies below the true infimum; points in ``include``
    are always evaluated.

    :return: (value, minimizer)
    :rtype: tuple[float, numpy.ndarray]
    """
    x0 = np.asarray(x0, dtype=float)
    lam = np.asarray(lam, dtype=float)
    rng = as_generator(seed)
    constraints = _ball_constraints(x0, eps, P.space)

    def lagrangian(x):
        return float(P.lagrangian(lam, x))

    def gradient(x):
        return P.grad_phi(x) + jacobian(P.constraint, x).T @ lam

    ball = Ball(x0, eps, P.space)
    candidates = [np.asarray(x, dtype=float) for x in include]
    for start in [x0] + list(ball.sample(max(starts - 1, 0), rng)):
        result = minimize(lagrangian, start, jac=gradient, method="SLSQP", constraints=constraints,
                          options={"maxiter": 500, "ftol": 1e-14})
        candidates.append(result.x)

    best_value, best_x = math.inf, None
    for x in candidates:
        if not ball.contains(x, tol=1e-12):
            continue
        value = lagrangian(x)
        if value < best_value:
            best_value, best_x = value, x
    return best_value, best_x


def duality_gap_estimate(P, sol, lambda_grid=None, samples=20, starts=DUAL_STARTS, seed=0):
    """Primal value minus the best sampled dual value.

    The multipliers tried are ``lambda_grid`` (projected onto the negative dual cone) or, by default, ``lambda_eps``,
    zero and ``samples`` random elements of the negative dual cone. Since ``x_eps`` is evaluated in every dual
    function estimate, the returned gap is never negative beyond rounding.

    :param P: constrained problem
    :type P: ConstrainedProblem
    :param sol: localized solution with multipliers
    :type sol: LocalizedSolution
    :rtype: float
    """
    rng = as_generator(seed)
    if lambda_grid is None:
        lambdas = [np.zeros(P.cone.dim)] + list(sample_dual_cone(P.cone, samples, rng))
        if sol.lambda_eps is not None:
            lambdas.insert(0, sol.lambda_eps)
    else:
        lambdas = [P.cone.project_dual(lam) for lam in np.atleast_2d(np.asarray(lambda_grid, dtype=float))]

    dual, best_lambda = -math.inf, None
    for lam in lambdas:
        value, _ = dual_function(P, sol.x0, sol.eps, lam, starts=starts, seed=rng, include=(sol.x_eps,))
        if value > dual:
            dual, best_lambda = value, lam
    gap = sol.value - dual
    logger.info("primal %.9g, dual %.9g at lambda=%s, gap %.3g", sol.value, dual, np.asarray(best_lambda).tolist(), gap)
    return gap


def lagrangian_payoff(P, lambdas, points):
    r"""Matrix of Lagrangian values :math:`L(\lambda_i, x_j)` for finite sets of multipliers and points."""
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return P.phi(points)[None, :] + lambdas @ P.g(points).T


@dataclass(frozen=True)
class MinimaxReport:
    """Minimax (``upper``) and maximin (``lower``) values of a finite payoff matrix, rows maximizing."""
    upper: float
    lower: float
    best_rows: np.ndarray
    best_columns: np.ndarray
    saddle_points: tuple

    @property
    def gap(self):
        return self.upper - self.lower

    @property
    def has_saddle_point(self):
        return bool(self.saddle_points)


def finite_minimax_gap(payoff, tol=1e-12):
    r"""Compares :math:`\min_j \max_i M_{ij}` with :math:`\max_i \min_j M_{ij}` for a finite payoff matrix.

    The difference is always nonnegative; a saddle point ``(i, j)`` is an entry that is the largest of its column and
    the smallest of its row, which exists exactly when the difference vanishes.

    :param payoff: matrix with rows indexed by the maximizing player
    :rtype: MinimaxReport
    """
    M = np.atleast_2d(np.asarray(payoff, dtype=float))
    column_max = M.max(axis=0)
    row_min = M.min(axis=1)
    upper = float(column_max.min())
    lower = float(row_min.max())
    best_rows = np.flatnonzero(row_min >= lower - tol)
    best_columns = np.flatnonzero(column_max <= upper + tol)
    saddle_points = tuple((int(i), int(j)) for i in best_rows for j in best_columns
                          if M[i, j] >= column_max[j] - tol and M[i, j] <= row_min[i] + tol)
    return MinimaxReport(upper, lower, best_rows, best_columns, saddle_points)
