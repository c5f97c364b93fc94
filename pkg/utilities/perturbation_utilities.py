"""The localized value function under perturbations ``g(x) + y in C``: subgradients at zero and calmness."""
from .geometry_utilities import CheckResult, NormSpace
from .localization_utilities import minimize_over_ball
from .sampling_utilities import as_generator, sample_ball_points
from dataclasses import dataclass
import logging
import math
import numpy as np

logger = logging.getLogger(__name__)

CALMNESS_MARGIN = 1e-4


@dataclass(frozen=True, eq=False)
class ValueFunctionSample:
    """Localized optimal value at perturbation ``y``; ``v_of_y`` is ``inf`` and ``x`` is None when infeasible."""
    y: np.ndarray
    v_of_y: float
    feasible: bool
    x: np.ndarray = None


def _perturbed_minimum(P, sol, y, budget, rng, extra_ball=None):
    Py = P.perturbed(y)
    warm = [sol.x_eps, sol.x0]
    x, value, _ = minimize_over_ball(Py, sol.x0, sol.eps, warm, penalty_rounds=0, extra_ball=extra_ball)
    if x is None and budget > 0:
        center, radius = (sol.x0, sol.eps) if extra_ball is None else extra_ball
        starts = sample_ball_points(P.dim, P.space.p, center, min(radius, sol.eps), budget, rng, surface_fraction=0.5)
        x, value, _ = minimize_over_ball(Py, sol.x0, sol.eps, list(starts), extra_ball=extra_ball)
    return x, value


def value_function(P, sol, y, budget=4, seed=0):
    """Value of the localization around ``sol.x0`` with radius ``sol.eps`` of the problem perturbed by ``y``.

    Solved by SLSQP warm-started at ``x_eps`` and ``x0``, falling back to ``budget`` penalized multi-starts.

    :param P: constrained problem
    :type P: ConstrainedProblem
    :param sol: localized solution of the unperturbed problem
    :type sol: LocalizedSolution
    :param y: perturbation of the constraint values
    :rtype: ValueFunctionSample
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    x, value = _perturbed_minimum(P, sol, y, budget, as_generator(seed))
    if x is None:
        return ValueFunctionSample(y, math.inf, False)
    return ValueFunctionSample(y, value, True, x)


def _perturbation_samples(m, radius, samples, rng):
    """Perturbations in the Euclidean ball of radius ``radius`` in R^m, with zero excluded."""
    ys = sample_ball_points(m, 2.0, np.zeros(m), radius, samples, rng)
    return ys[np.linalg.norm(ys, axis=1) > 1e-12]


def sample_value_function(P, sol, radius_y=0.05, samples=1000, seed=0, budget=4):
    """Value function samples at perturbations drawn from the Euclidean ball of radius ``radius_y``.

    :rtype: list[ValueFunctionSample]
    """
    rng = as_generator(seed)
    return [value_function(P, sol, y, budget=budget, seed=rng)
            for y in _perturbation_samples(P.cone.dim, radius_y, samples, rng)]


def subgradient_check(P, sol, radius_y=0.05, samples=1000, seed=0, tol=1e-6, lam=None, budget=4, values=None):
    r"""Checks :math:`v(y) - v(0) \geq \langle \lambda_\epsilon, y \rangle - tol` for sampled ``||y|| <= radius_y``.

    Perturbations with an infeasible localized problem are skipped (their value is :math:`+\infty`).

    :param lam: multiplier to test, defaults to ``sol.lambda_eps``
    :param values: precomputed samples from :func:`sample_value_function`, drawn here if omitted
    :return: passed, or the violating :class:`ValueFunctionSample` as witness
    :rtype: CheckResult
    """
    lam = sol.lambda_eps if lam is None else np.asarray(lam, dtype=float)
    if values is None:
        values = sample_value_function(P, sol, radius_y=radius_y, samples=samples, seed=seed, budget=budget)
    checked = skipped = 0
    worst = math.inf
    for sample in values:
        y = sample.y
        if not sample.feasible:
            skipped += 1
            continue
        checked += 1
        slack = sample.v_of_y - sol.value - float(lam @ y)
        worst = min(worst, slack)
        if slack < -tol:
            return CheckResult(False, witness=sample, details={"checked": checked, "skipped": skipped,
                                                                "min_slack": slack})
    return CheckResult(True, details={"checked": checked, "skipped": skipped, "min_slack": worst})


@dataclass(frozen=True)
class CalmnessEstimate:
    r"""Sampled infimum of :math:`(\varphi(x) - \varphi(x_\epsilon)) / \|y\|` and the bound :math:`-\|\lambda_\epsilon\| - 10^{-4}`."""
    quotient_lower_bound: float
    bound: float
    r: float
    checked: int
    skipped: int
    worst_y: np.ndarray = None

    @property
    def passed(self):
        # nothing was checked when every perturbation is infeasible or the annihilator is trivial
        return self.checked > 0 and self.quotient_lower_bound >= self.bound

    def __bool__(self):
        return self.passed


def calmness_check(P, sol, r=0.05, samples=200, seed=0, restrict_to_annihilator=False, lam=None, budget=2):
    r"""Estimates the calmness quotient of the localized problem at ``x_eps``.

    Samples perturbations :math:`0 < \|y\| \leq r` and minimizes the perturbed objective over
    :math:`B(x_0,\epsilon) \cap B(x_\epsilon, r)`; the quotient is :math:`(v - \varphi(x_\epsilon)) / \|y\|`. Its sampled
    infimum must be at least :math:`-\|\lambda_\epsilon\| - 10^{-4}` (perturbations are measured in the Euclidean norm).
    With ``restrict_to_annihilator`` the perturbations are projected onto the orthogonal complement of
    :math:`\lambda_\epsilon`, where the bound tightens to :math:`-10^{-4}`.

    :rtype: CalmnessEstimate
    """
    lam = sol.lambda_eps if lam is None else np.asarray(lam, dtype=float)
    rng = as_generator(seed)
    ys = _perturbation_samples(P.cone.dim, r, samples, rng)
    lam_norm = float(NormSpace(P.cone.dim).dual_norm(lam))
    bound = -lam_norm - CALMNESS_MARGIN
    if restrict_to_annihilator:
        if lam_norm > 0:
            unit = lam / np.linalg.norm(lam)
            ys = ys - np.outer(ys @ unit, unit)
            ys = ys[np.linalg.norm(ys, axis=1) > 1e-12]
        bound = -CALMNESS_MARGIN

    checked = skipped = 0
    infimum, worst_y = math.inf, None
    for y in ys:
        x, value = _perturbed_minimum(P, sol, y, budget, rng, extra_ball=(sol.x_eps, r))
        if x is None:
            skipped += 1
            continue
        checked += 1
        quotient = (value - sol.value) / float(np.linalg.norm(y))
        if quotient < infimum:
            infimum, worst_y = quotient, y
    logger.info("calmness quotient %.6g (bound %.6g) over %d perturbations, %d infeasible", infimum, bound, checked,
                skipped)
    return CalmnessEstimate(infimum, bound, r, checked, skipped, worst_y)


def calm_from_below_estimate(P, sol, radii=(0.05, 0.025, 0.0125), samples=100, seed=0):
    """Calmness quotients over shrinking radii; the quotient should stay bounded below as the radius decreases.

    :rtype: list[CalmnessEstimate]
    """
    return [calmness_check(P, sol, r=r, samples=samples, seed=seed) for r in radii]
