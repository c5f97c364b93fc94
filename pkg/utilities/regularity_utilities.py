"""Gauss-Newton preimages, surjectivity of the derivative, and metric regularity / linear openness estimates."""
from .exceptions import NotSurjective, PreconditionViolated, ValidationFailed
from .geometry_utilities import Ball, CheckResult, NormSpace
from .polymap_utilities import evaluate, jacobian
from .sampling_utilities import as_generator, parallel_starmap, seeded_chunks
from dataclasses import dataclass, replace
import logging
import math
import numpy as np

logger = logging.getLogger(__name__)

SINGULAR_VALUE_TOLERANCE = 1e-10
MU_SAFETY_FACTOR = 2.0
GAUSS_NEWTON_MAX_ITER = 100
GAUSS_NEWTON_TOL = 1e-10
GAUSS_NEWTON_MIN_STEP = 2.0 ** -20
NUM_RESTARTS = 8
MAX_HALVINGS = 6


@dataclass(frozen=True)
class PreimageResult:
    x: np.ndarray
    residual: float
    converged: bool
    iterations: int


def gauss_newton_preimage(f, y, start, max_iter=GAUSS_NEWTON_MAX_ITER, tol=GAUSS_NEWTON_TOL,
                          min_step=GAUSS_NEWTON_MIN_STEP):
    """Solves ``f(x) = y`` by Gauss-Newton with least-norm steps ``-pinv(Df(x)) (f(x) - y)``.

    The step length is halved while the (Euclidean) residual does not decrease; the iteration stops once the residual
    is at most ``tol``, after ``max_iter`` iterations, or when no step of length at least ``min_step`` helps.

    :param f: polynomial map
    :type f: PolyMap
    :param y: target value
    :param start: starting point
    :rtype: PreimageResult
    """
    x = np.array(start, dtype=float)
    y = np.asarray(y, dtype=float)
    r = evaluate(f, x) - y
    res = float(np.linalg.norm(r))
    iterations = 0

    while res > tol and iterations < max_iter:
        iterations += 1
        step = -np.linalg.pinv(jacobian(f, x)) @ r
        t = 1.0
        while t >= min_step:
            candidate = x + t * step
            r_candidate = evaluate(f, candidate) - y
            res_candidate = float(np.linalg.norm(r_candidate))
            if res_candidate < res:
                x, r, res = candidate, r_candidate, res_candidate
                break
            t /= 2.0
        else:
            break

    return PreimageResult(x, res, res <= tol, iterations)


def distance_to_preimage_upper_bound(f, x, y, space, starts=NUM_RESTARTS, seed=None, target=None,
                                     tol=GAUSS_NEWTON_TOL):
    """Upper bound on ``dist(x, f^{-1}(y))`` from Gauss-Newton runs started at ``x`` and ``starts`` perturbations of it.

    Any converged run yields a preimage and hence an upper bound; the smallest one is returned together with its
    preimage. Restarts are skipped once the bound is at most ``target``.

    :return: (distance, preimage), or (inf, None) if no run converged
    :rtype: tuple[float, numpy.ndarray]
    """
    x = np.asarray(x, dtype=float)
    best_distance, best_preimage = math.inf, None

    result = gauss_newton_preimage(f, y, x, tol=tol)
    if result.converged:
        best_distance, best_preimage = float(space.norm(result.x - x)), result.x
    if target is not None and best_distance <= target:
        return best_distance, best_preimage

    rng = as_generator(seed)
    scale = max(float(np.linalg.norm(evaluate(f, x) - y)), 1e-6)
    for _ in range(starts):
        result = gauss_newton_preimage(f, y, x + scale * rng.standard_normal(x.shape[0]), tol=tol)
        if result.converged:
            distance = float(space.norm(result.x - x))
            if distance < best_distance:
                best_distance, best_preimage = distance, result.x
        if target is not None and best_distance <= target:
            break

    return best_distance, best_preimage


@dataclass(frozen=True)
class SurjectivityResult:
    passed: bool
    rank: int
    n_out: int
    singular_values: np.ndarray

    def __bool__(self):
        return self.passed


def surjectivity_check(f, x0, tol=SINGULAR_VALUE_TOLERANCE):
    """Whether ``Df(x0)`` is onto, i.e. has ``n_out`` singular values above ``tol``.

    :rtype: SurjectivityResult
    """
    singular_values = np.linalg.svd(np.atleast_2d(jacobian(f, x0)), compute_uv=False)
    rank = int(np.sum(singular_values > tol))
    return SurjectivityResult(rank == f.n_out, rank, f.n_out, singular_values)


@dataclass(frozen=True)
class RegularityCertificate:
    r"""Metric regularity constant ``mu`` of ``f`` around :math:`(x_0, f(x_0))`.

    ``delta_mu`` and ``zeta`` are the domain and range radii on which ``worst_ratio``, the largest sampled ratio
    :math:`dist(x, f^{-1}(y)) / \|y - f(x)\|`, was measured. ``validated`` implies ``worst_ratio <= mu``.
    """
    mu: float
    sigma_min: float
    delta_mu: float = None
    zeta: float = None
    validated: bool = False
    worst_ratio: float = math.nan
    samples_checked: int = 0
    halvings: int = 0


def metric_reg_constant(f, x0, space_in=None, space_out=None):
    """Unvalidated regularity constant ``mu = 2 / sigma_min(Df(x0))``, scaled by norm-equivalence factors if p != 2.

    :raises NotSurjective: if ``Df(x0)`` is not onto
    :rtype: RegularityCertificate
    """
    space_in = NormSpace(f.n_in) if space_in is None else space_in
    space_out = NormSpace(f.n_out) if space_out is None else space_out
    surjectivity = surjectivity_check(f, x0)
    if not surjectivity:
        raise NotSurjective(surjectivity.rank, f.n_out)

    sigma_min = float(surjectivity.singular_values[f.n_out - 1])
    mu = MU_SAFETY_FACTOR / sigma_min * space_in.equivalence_factor() * space_out.equivalence_factor()
    return RegularityCertificate(mu=mu, sigma_min=sigma_min)


def _regularity_ratios(f, x0, fx0, delta, zeta, space_in, space_out, mu, count, seed):
    """Worker: ratios ``dist(x, f^{-1}(y)) / ||y - f(x)||`` on ``count`` sampled (x, y) pairs."""
    rng = as_generator(seed)
    xs = Ball(x0, delta, space_in).sample(count, rng)
    ys = Ball(fx0, zeta, space_out).sample(count, rng)
    records = []
    for x, y in zip(xs, ys):
        gap = float(space_out.norm(y - evaluate(f, x)))
        if gap < 1e-14:
            records.append((0.0, x, y))
            continue
        distance, _ = distance_to_preimage_upper_bound(f, x, y, space_in, seed=rng, target=mu * gap)
        records.append((distance / gap, x, y))
    return records


def validate_metric_regularity(f, x0, cert, delta_mu=None, zeta=None, space_in=None, space_out=None, r=1.0,
                               samples=1000, seed=0, max_halvings=MAX_HALVINGS, single_threaded=True,
                               show_progress=False):
    r"""Checks :math:`dist(x, f^{-1}(y)) \leq \mu \|y - f(x)\|` on samples of :math:`B(x_0,\delta_\mu) \times B(f(x_0),\zeta)`.

    Distances are bounded from above with multi-start Gauss-Newton. If some ratio exceeds ``mu`` (or some target has no
    preimage found), both radii are halved and the check is repeated, at most ``max_halvings`` times.

    :param f: polynomial map
    :type f: PolyMap
    :param x0: reference point
    :param cert: certificate from :func:`metric_reg_constant`
    :type cert: RegularityCertificate
    :param delta_mu: domain radius, defaults to ``r``
    :type delta_mu: float
    :param zeta: range radius, defaults to the sampled largest ``||f(x) - f(x0)||`` over ``B(x0, delta_mu)``
    :type zeta: float
    :param samples: number of sampled pairs per attempt
    :type samples: int
    :param seed: random seed
    :param max_halvings: maximum number of radius halvings
    :type max_halvings: int
    :raises ValidationFailed: carrying the worst offending (x, y) of the last attempt
    :rtype: RegularityCertificate
    """
    space_in = NormSpace(f.n_in) if space_in is None else space_in
    space_out = NormSpace(f.n_out) if space_out is None else space_out
    x0 = np.asarray(x0, dtype=float)
    fx0 = evaluate(f, x0)
    delta = r if delta_mu is None else delta_mu
    root = np.random.SeedSequence(seed)
    zeta_seed, *attempt_seeds = root.spawn(max_halvings + 2)

    if zeta is None:
        points = Ball(x0, delta, space_in).sample(samples, zeta_seed)
        zeta = float(np.max(space_out.norm(evaluate(f, points) - fx0)))
        zeta = zeta if zeta > 0 else delta

    worst = (math.nan, None, None)
    for halving in range(max_halvings + 1):
        params = [(f, x0, fx0, delta, zeta, space_in, space_out, cert.mu, count, chunk_seed)
                  for count, chunk_seed in seeded_chunks(samples, attempt_seeds[halving])]
        records = [record for chunk in parallel_starmap(_regularity_ratios, params, single_threaded=single_threaded,
                                                        show_progress=show_progress, name="Regularity:")
                   for record in chunk]
        worst = max(records, key=lambda record: record[0])

        if worst[0] <= cert.mu:
            logger.info("metric regularity validated with mu=%.6g on radii %.6g / %.6g", cert.mu, delta, zeta)
            return replace(cert, delta_mu=delta, zeta=zeta, validated=True, worst_ratio=float(worst[0]),
                           samples_checked=len(records), halvings=halving)

        logger.info("worst ratio %.6g exceeds mu=%.6g on radii %.6g / %.6g, halving", worst[0], cert.mu, delta, zeta)
        delta /= 2.0
        zeta /= 2.0

    raise ValidationFailed(worst[1], worst[2], float(worst[0]), cert.mu)


def certify_metric_regularity(f, x0, space_in=None, space_out=None, r=1.0, samples=1000, seed=0, **kwargs):
    """Surjectivity check, constant estimate and validation in one call."""
    cert = metric_reg_constant(f, x0, space_in=space_in, space_out=space_out)
    return validate_metric_regularity(f, x0, cert, space_in=space_in, space_out=space_out, r=r, samples=samples,
                                      seed=seed, **kwargs)


def linear_openness_check(f, x0, cert, space_in=None, space_out=None, samples=200, seed=0, radius=None):
    r"""Checks :math:`f(B(x, r)) \supseteq B(f(x), \sigma r)` with :math:`\sigma = 1/\mu` at sampled ``x`` near ``x0``.

    Targets are taken on the sphere of radius :math:`\sigma r (1 - 10^{-3})` around ``f(x)``; each must have a
    Gauss-Newton preimage in ``B(x, r)``.

    :param cert: validated certificate
    :type cert: RegularityCertificate
    :param radius: the radius ``r``, defaults to half the certificate's ``delta_mu``
    :type radius: float
    :return: passed, or ``(x, target)`` of the first failure as witness
    :rtype: CheckResult
    """
    if not cert.validated:
        raise PreconditionViolated("linear openness needs a validated regularity certificate")
    space_in = NormSpace(f.n_in) if space_in is None else space_in
    space_out = NormSpace(f.n_out) if space_out is None else space_out
    sigma = 1.0 / cert.mu
    r = 0.5 * cert.delta_mu if radius is None else radius
    rng = as_generator(seed)

    xs = Ball(x0, max(cert.delta_mu - r, 0.0), space_in).sample(samples, rng)
    directions = space_out.sample_sphere(samples, rng)
    details = {"sigma": sigma, "radius": r}
    for x, u in zip(xs, directions):
        target = evaluate(f, x) + sigma * r * (1.0 - 1e-3) * u
        distance, _ = distance_to_preimage_upper_bound(f, x, target, space_in, seed=rng, target=r)
        if distance > r * (1.0 + 1e-9):
            return CheckResult(False, witness=(x, target), details=details)
    return CheckResult(True, details=details)
