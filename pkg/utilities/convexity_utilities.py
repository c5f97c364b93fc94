"""Convexity of images of small balls: admissible radius, midpoint certification and nonconvexity witnesses."""
from .exceptions import ConditionFails, DimensionTooLarge, EpsilonNonpositive, NotSurjective, PreconditionViolated
from .geometry_utilities import Ball, CheckResult, NormSpace, power_type2_constant
from .polymap_utilities import evaluate, hessian, jacobian, lipschitz_of_derivative
from .regularity_utilities import certify_metric_regularity, distance_to_preimage_upper_bound, \
    gauss_newton_preimage, surjectivity_check, NUM_RESTARTS
from .sampling_utilities import as_generator, parallel_starmap, seeded_chunks
from dataclasses import dataclass, field, replace
from itertools import product
import logging
import math
import numpy as np
from scipy.optimize import minimize

logger = logging.getLogger(__name__)

DEFAULT_THETA = 0.9
MIN_PAIR_SEPARATION = 1e-9
GRID_POINTS_PER_AXIS = 200
GRID_REFINEMENT = 4
ACCEPTANCE_FACTOR = 10.0
CONFIRMED_CANDIDATES = 3
SCREENING_POINTS_PER_AXIS = {1: 401, 2: 81, 3: 21}
MAX_GRID_DIM = 3

CERTIFIED = "certified"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RadiusBound:
    """Admissible radius ``eps0 = theta * min(r, delta_mu, 4c / (mu (L + 1)))`` with all of its inputs."""
    eps0: float
    r: float
    c: float
    mu: float
    L: float
    delta_mu: float
    zeta: float
    theta: float
    formula_used: str
    lipschitz_kind: str = "exact"


def estimate_radius(f, x0, space, r=1.0, theta=DEFAULT_THETA, space_out=None, samples=1000, seed=0,
                    single_threaded=True):
    """Estimates the radius below which ``f`` maps balls around ``x0`` onto convex sets.

    :param f: polynomial map
    :type f: PolyMap
    :param x0: center
    :param space: domain space, which must satisfy the power-type-2 condition
    :type space: NormSpace
    :param r: radius of the region on which ``lip(Df)`` and metric regularity are estimated
    :type r: float
    :param theta: safety factor in (0, 1)
    :type theta: float
    :param space_out: range space, Euclidean by default
    :type space_out: NormSpace
    :param samples: samples used for the regularity validation
    :type samples: int
    :param seed: random seed
    :raises ConditionFails: if the modulus of convexity of ``space`` is not of power type 2
    :raises NotSurjective: if ``Df(x0)`` is not onto
    :raises ValidationFailed: if metric regularity cannot be validated
    :rtype: RadiusBound
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    constant = power_type2_constant(space)
    if not constant.holds:
        raise ConditionFails(f"the power-type-2 condition fails for p={space.p}: {constant.reason}")

    space_out = NormSpace(f.n_out) if space_out is None else space_out
    cert = certify_metric_regularity(f, x0, space_in=space, space_out=space_out, r=r, samples=samples, seed=seed,
                                     single_threaded=single_threaded)
    lipschitz = lipschitz_of_derivative(f, Ball(x0, r, space), space_in=space, space_out=space_out, seed=seed)

    curvature_bound = 4.0 * constant.c / (cert.mu * (lipschitz.value + 1.0))
    eps0 = theta * min(r, cert.delta_mu, curvature_bound)
    logger.info("eps0=%.9g from r=%.9g, delta_mu=%.9g, 4c/(mu(L+1))=%.9g", eps0, r, cert.delta_mu, curvature_bound)
    return RadiusBound(eps0=eps0, r=r, c=constant.c, mu=cert.mu, L=lipschitz.value, delta_mu=cert.delta_mu,
                       zeta=cert.zeta, theta=theta, formula_used="theta * min(r, delta_mu, 4c/(mu(L+1)))",
                       lipschitz_kind=lipschitz.kind)


@dataclass(frozen=True)
class PairRecord:
    x1: np.ndarray
    x2: np.ndarray
    ybar: np.ndarray
    residual: float
    norm_excess: float


@dataclass(frozen=True)
class Witness:
    """Two image points whose midpoint ``ybar`` stays at least ``gap_lower_bound`` away from the image of the ball."""
    y1: np.ndarray
    y2: np.ndarray
    ybar: np.ndarray
    gap_lower_bound: float
    x1: np.ndarray = None
    x2: np.ndarray = None
    slack: float = math.nan


def _verdict(witnesses, candidates, max_residual, max_excess, tol_res, tol_ball):
    if witnesses:
        return REFUTED
    if candidates or max_residual > tol_res or max_excess > tol_ball:
        return INCONCLUSIVE
    return CERTIFIED


@dataclass(frozen=True)
class ConvexityCertificate:
    """Outcome of midpoint certification of ``f(B(x0, eps))``.

    Certificates over disjoint pair samples combine with :meth:`merge`, with :meth:`empty` as identity.
    """
    eps: float
    pairs_tested: int = 0
    pairs_skipped: int = 0
    max_preimage_residual: float = 0.0
    max_norm_excess: float = 0.0
    witnesses: tuple = ()
    candidates: tuple = ()
    tol_res: float = 1e-8
    tol_ball: float = 1e-6
    records: tuple = ()
    eps0: float = None
    verdict: str = field(default=CERTIFIED)

    @classmethod
    def empty(cls, eps, tol_res=1e-8, tol_ball=1e-6):
        return cls(eps=eps, tol_res=tol_res, tol_ball=tol_ball)

    def merge(self, other):
        if self.eps != other.eps:
            raise ValueError(f"cannot merge certificates for eps={self.eps} and eps={other.eps}")
        max_residual = max(self.max_preimage_residual, other.max_preimage_residual)
        max_excess = max(self.max_norm_excess, other.max_norm_excess)
        witnesses = self.witnesses + other.witnesses
        candidates = self.candidates + other.candidates
        tol_res = min(self.tol_res, other.tol_res)
        tol_ball = min(self.tol_ball, other.tol_ball)
        return ConvexityCertificate(
            eps=self.eps, pairs_tested=self.pairs_tested + other.pairs_tested,
            pairs_skipped=self.pairs_skipped + other.pairs_skipped, max_preimage_residual=max_residual,
            max_norm_excess=max_excess, witnesses=witnesses, candidates=candidates, tol_res=tol_res, tol_ball=tol_ball,
            records=self.records + other.records, eps0=self.eps0 if self.eps0 is not None else other.eps0,
            verdict=_verdict(witnesses, candidates, max_residual, max_excess, tol_res, tol_ball))

    @property
    def margin(self):
        """``eps / eps0`` when the admissible radius is known."""
        return None if self.eps0 is None else self.eps / self.eps0


def _norm_to_ball(x, x0, space, eps):
    """Relative excess of ``x`` beyond the sphere of B(x0, eps)."""
    return max(0.0, float(space.norm(x - x0)) / eps - 1.0)


def _min_norm_preimage(f, ybar, x0, space, start):
    """Point of ``f^{-1}(ybar)`` of smallest ``space`` distance to ``x0``, by SLSQP from ``start``."""
    n = f.n_in
    equality = {"type": "eq", "fun": lambda x: evaluate(f, x[:n]) - ybar,
                "jac": lambda x: np.hstack([jacobian(f, x[:n]), np.zeros((f.n_out, x.shape[0] - n))])}

    if space.is_infinite:
        eye = np.eye(n)
        inequality = {"type": "ineq",
                      "fun": lambda z: np.concatenate([z[n] - (z[:n] - x0), z[n] + (z[:n] - x0)]),
                      "jac": lambda z: np.vstack([np.hstack([-eye, np.ones((n, 1))]),
                                                  np.hstack([eye, np.ones((n, 1))])])}
        start = np.append(start, float(space.norm(start - x0)))
        objective = np.zeros(n + 1)
        objective[n] = 1.0
        result = minimize(lambda z: z[n], start, jac=lambda z: objective, method="SLSQP",
                          constraints=[equality, inequality], options={"maxiter": 200, "ftol": 1e-14})
        return result.x[:n]

    p = space.p
    result = minimize(lambda x: float(np.sum(np.abs(x - x0) ** p)), start,
                      jac=lambda x: p * np.sign(x - x0) * np.abs(x - x0) ** (p - 1.0), method="SLSQP",
                      constraints=[equality], options={"maxiter": 200, "ftol": 1e-14})
    return result.x


def _midpoint_preimage(f, x0, space, eps, ybar, xbar, rng, tol_res, tol_ball):
    """Searches a preimage of ``ybar`` in B(x0, eps): Gauss-Newton from ``xbar``, restarts, then SLSQP.

    :return: (preimage, residual, relative norm excess, success)
    """
    attempts = []

    def attempt(x):
        residual = float(np.linalg.norm(evaluate(f, x) - ybar))
        excess = _norm_to_ball(x, x0, space, eps)
        attempts.append((x, residual, excess))
        return residual <= tol_res and excess <= tol_ball

    if attempt(gauss_newton_preimage(f, ybar, xbar).x):
        return attempts[-1] + (True,)

    for _ in range(NUM_RESTARTS):
        start = xbar + 0.5 * eps * rng.standard_normal(f.n_in) / math.sqrt(f.n_in)
        if attempt(gauss_newton_preimage(f, ybar, start).x):
            return attempts[-1] + (True,)

    converged = [a for a in attempts if a[1] <= tol_res]
    if converged:
        # a preimage exists but lies outside the ball: look for the closest one
        closest = min(converged, key=lambda a: a[2])[0]
        polished = gauss_newton_preimage(f, ybar, _min_norm_preimage(f, ybar, x0, space, closest)).x
        if attempt(polished):
            return attempts[-1] + (True,)
        converged = [a for a in attempts if a[1] <= tol_res]
        return min(converged, key=lambda a: a[2]) + (False,)

    return min(attempts, key=lambda a: a[1]) + (False,)


def _certify_chunk(f, x0, space, eps, tol_res, tol_ball, record_samples, count, seed):
    """Worker: certificate over ``count`` sampled pairs."""
    rng = as_generator(seed)
    ball = Ball(x0, eps, space)
    first = ball.sample(count, rng)
    second = ball.sample(count, rng)
    f_first = evaluate(f, first)
    f_second = evaluate(f, second)

    tested = skipped = 0
    max_residual = max_excess = 0.0
    candidates, records = [], []
    for x1, x2, y1, y2 in zip(first, second, f_first, f_second):
        if float(space.norm(x1 - x2)) < MIN_PAIR_SEPARATION:
            skipped += 1
            continue
        tested += 1
        ybar = 0.5 * (y1 + y2)
        _, residual, excess, success = _midpoint_preimage(f, ball.center, space, eps, ybar, 0.5 * (x1 + x2), rng,
                                                          tol_res, tol_ball)
        max_residual = max(max_residual, residual)
        max_excess = max(max_excess, excess)
        record = PairRecord(x1, x2, ybar, residual, excess)
        if not success:
            candidates.append(record)
        if record_samples:
            records.append(record)

    candidates = tuple(candidates)
    return ConvexityCertificate(eps=eps, pairs_tested=tested, pairs_skipped=skipped, max_preimage_residual=max_residual,
                                max_norm_excess=max_excess, candidates=candidates, tol_res=tol_res, tol_ball=tol_ball,
                                records=tuple(records),
                                verdict=_verdict((), candidates, max_residual, max_excess, tol_res, tol_ball))


def _candidate_badness(record, eps):
    return max(record.residual, record.norm_excess * eps)


def certify_convexity(f, x0, space, eps, n_pairs=2000, seed=0, tol_res=1e-8, tol_ball=1e-6, space_out=None,
                      record_samples=False, confirm=CONFIRMED_CANDIDATES, eps0=None, single_threaded=True,
                      show_progress=False):
    """Midpoint certification of the convexity of ``f(B(x0, eps))``.

    For sampled pairs ``x1, x2`` of the ball (biased towards its sphere), the midpoint ``ybar`` of their images must have
    a preimage in the ball: residual at most ``tol_res`` and norm at most ``eps * (1 + tol_ball)``. Pairs with no such
    preimage are candidates; the ``confirm`` worst of them are checked with :func:`grid_gap_lower_bound` (only for
    ``n_in <= 3``), and a positive certified gap turns the verdict into ``refuted``. Otherwise failures leave the
    verdict ``inconclusive``. A ``certified`` verdict means no violation was found at this sampling resolution.

    :param f: polynomial map
    :type f: PolyMap
    :param x0: ball center
    :param space: domain space
    :type space: NormSpace
    :param eps: ball radius
    :type eps: float
    :param n_pairs: number of sampled pairs
    :type n_pairs: int
    :param seed: random seed
    :param record_samples: if True, keep every pair's record (for CSV output)
    :type record_samples: bool
    :param eps0: admissible radius, if known, to report the margin ``eps / eps0``
    :type eps0: float
    :param single_threaded: if True, run in serial. Otherwise, use all CPU cores to run in parallel
    :type single_threaded: bool
    :rtype: ConvexityCertificate
    """
    if not eps > 0:
        raise EpsilonNonpositive(f"eps must be positive, got {eps}")
    x0 = np.asarray(x0, dtype=float)

    params = [(f, x0, space, eps, tol_res, tol_ball, record_samples, count, chunk_seed)
              for count, chunk_seed in seeded_chunks(n_pairs, seed)]
    cert = ConvexityCertificate.empty(eps, tol_res=tol_res, tol_ball=tol_ball)
    for chunk_cert in parallel_starmap(_certify_chunk, params, single_threaded=single_threaded,
                                       show_progress=show_progress, name="Certifying:"):
        cert = cert.merge(chunk_cert)
    cert = replace(cert, eps0=eps0)

    if cert.candidates and f.n_in <= MAX_GRID_DIM and confirm > 0:
        worst = sorted(cert.candidates, key=lambda record: -_candidate_badness(record, eps))[:confirm]
        witnesses = []
        for record in worst:
            bound = grid_gap_lower_bound(f, x0, space, eps, record.ybar, space_out=space_out)
            if bound.accepted:
                witnesses.append(Witness(evaluate(f, record.x1), evaluate(f, record.x2), record.ybar,
                                         bound.lower_bound, record.x1, record.x2, bound.slack))
        if witnesses:
            cert = replace(cert, witnesses=tuple(witnesses), verdict=REFUTED)

    logger.info("certify_convexity eps=%.9g: %s after %d pairs (%d candidates)", eps, cert.verdict, cert.pairs_tested,
                len(cert.candidates))
    return cert


@dataclass(frozen=True)
class GapBound:
    """Certified lower bound on ``min ||f(x) - ybar||`` over the ball, with the per-cell slack at the finest level."""
    lower_bound: float
    slack: float
    grid_minimum: float
    accepted: bool
    rigorous: bool = True


def _euclidean_to_out_factor(space_out):
    """``k`` with ``||v||_2 <= k ||v||_out``."""
    if space_out.p >= 2.0:
        return space_out.equivalence_factor()
    return 1.0


def _cell_bounds(f, nodes, ybar, rho, L):
    """Per node: ``||f(z) - ybar||_2`` and the slack ``||Df(z)||_2 rho + L rho^2 / 2`` covering its cell."""
    distances = np.linalg.norm(evaluate(f, nodes) - ybar, axis=1)
    jac_norms = np.linalg.norm(jacobian(f, nodes), ord=2, axis=(1, 2))
    return distances, jac_norms * rho + 0.5 * L * rho * rho


def _second_derivative_bound(f, x0, space, eps):
    """Euclidean Lipschitz modulus of ``Df`` on the bounding box of the ball, and whether it is exact."""
    box = Ball(x0, 1.5 * eps, NormSpace(f.n_in, np.inf))
    if f.degree <= 2:
        H = hessian(f, box.center)
        return float(np.sqrt(np.sum(H ** 2))), True
    estimate = lipschitz_of_derivative(f, box, space_in=NormSpace(f.n_in), space_out=NormSpace(f.n_out), samples=500)
    return 1.5 * estimate.value, False


def _kept_nodes(axes_nodes, x0, space, eps, half_width):
    """Grid nodes whose cell (box of half-width ``half_width``) may meet B(x0, eps)."""
    nodes = np.stack([g.ravel() for g in np.meshgrid(*axes_nodes, indexing="ij")], axis=1)
    reach = half_width if space.is_infinite else half_width * len(axes_nodes) ** (1.0 / space.p)
    return nodes[space.norm(nodes - x0) <= eps + reach]


def grid_gap_lower_bound(f, x0, space, eps, ybar, per_axis=GRID_POINTS_PER_AXIS, refine=GRID_REFINEMENT,
                         space_out=None):
    r"""Certified lower bound on :math:`\min_{x \in B(x_0, \epsilon)} \|f(x) - \bar y\|` from a dense grid.

    The bounding box of the ball is covered by cells of width ``h`` centered at grid nodes; every cell that may meet the
    ball contributes ``||f(z) - ybar|| - s(z)``, where ``s(z) = ||Df(z)|| rho + L rho^2 / 2`` bounds the variation of
    ``f`` over the cell (``rho`` the cell's half-diagonal). Cells within ``2 max s`` of the coarse minimum are split
    ``refine`` times per axis and re-bounded. The gap is accepted as a witness when the bound exceeds 10 times the
    finest slack. For degree >= 3 the curvature modulus is a sampled estimate and the bound is flagged non-rigorous.

    :param per_axis: grid points per axis on the bounding box
    :type per_axis: int
    :rtype: GapBound
    """
    n = f.n_in
    if n > MAX_GRID_DIM:
        raise DimensionTooLarge(f"grid confirmation needs n_in <= {MAX_GRID_DIM}, got {n}")
    x0 = np.asarray(x0, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    space_out = NormSpace(f.n_out) if space_out is None else space_out
    L, rigorous = _second_derivative_bound(f, x0, space, eps)

    h = 2.0 * eps / (per_axis - 1)
    rho = 0.5 * h * math.sqrt(n)
    axes_nodes = [np.linspace(c - eps, c + eps, per_axis) for c in x0]

    # slabs along the first axis keep memory bounded in three dimensions
    values, slacks, slab_nodes = [], [], []
    for start in range(0, per_axis, 25):
        nodes = _kept_nodes([axes_nodes[0][start:start + 25]] + axes_nodes[1:], x0, space, eps, 0.5 * h)
        if nodes.shape[0]:
            distances, slack = _cell_bounds(f, nodes, ybar, rho, L)
            values.append(distances)
            slacks.append(slack)
            slab_nodes.append(nodes)
    distances = np.concatenate(values)
    slack = np.concatenate(slacks)
    nodes = np.vstack(slab_nodes)

    grid_minimum = float(distances.min())
    suspicious = distances <= grid_minimum + 2.0 * slack.max()
    lower = distances[~suspicious] - slack[~suspicious]
    coarse_bound = float(lower.min()) if lower.size else math.inf

    child_h = h / refine
    child_rho = 0.5 * child_h * math.sqrt(n)
    offsets = (np.arange(refine) - (refine - 1) / 2.0) * child_h
    child_offsets = np.array(list(product(offsets, repeat=n)))
    reach = 0.5 * child_h if space.is_infinite else 0.5 * child_h * n ** (1.0 / space.p)

    fine_bound, fine_slack = math.inf, 0.0
    parents = nodes[suspicious]
    for start in range(0, parents.shape[0], 2000):
        children = (parents[start:start + 2000, None, :] + child_offsets[None, :, :]).reshape(-1, n)
        children = children[space.norm(children - x0) <= eps + reach]
        if children.shape[0]:
            child_distances, child_slack = _cell_bounds(f, children, ybar, child_rho, L)
            fine_bound = min(fine_bound, float(np.min(child_distances - child_slack)))
            fine_slack = max(fine_slack, float(child_slack.max()))

    lower_bound = min(coarse_bound, fine_bound) / _euclidean_to_out_factor(space_out)
    accepted = lower_bound > ACCEPTANCE_FACTOR * fine_slack and lower_bound > 0
    return GapBound(lower_bound, fine_slack, grid_minimum, bool(accepted), rigorous)


def find_nonconvexity_witness(f, x0, space, eps, budget=2000, seed=0, per_axis=GRID_POINTS_PER_AXIS, space_out=None,
                              confirm=CONFIRMED_CANDIDATES):
    """Searches two points of ``f(B(x0, eps))`` whose midpoint is certifiably outside it.

    ``budget`` pairs sampled mostly on the sphere are screened by the distance of their image midpoint to the images of a
    coarse grid of the ball; the best ``confirm`` of them are confirmed with :func:`grid_gap_lower_bound`.

    :raises DimensionTooLarge: if ``n_in > 3``
    :return: the confirmed witness with the largest gap bound, or None
    :rtype: Witness or None
    """
    n = f.n_in
    if n > MAX_GRID_DIM:
        raise DimensionTooLarge(f"witness search needs n_in <= {MAX_GRID_DIM}, got {n}")
    if not eps > 0:
        raise EpsilonNonpositive(f"eps must be positive, got {eps}")
    x0 = np.asarray(x0, dtype=float)
    rng = as_generator(seed)

    per_screen = SCREENING_POINTS_PER_AXIS[n]
    axes_nodes = [np.linspace(c - eps, c + eps, per_screen) for c in x0]
    screen = _kept_nodes(axes_nodes, x0, space, eps, 0.0)
    screen_images = evaluate(f, screen)

    ball = Ball(x0, eps, space)
    first = ball.sample(budget, rng, surface_fraction=0.9)
    second = ball.sample(budget, rng, surface_fraction=0.9)
    midpoints = 0.5 * (evaluate(f, first) + evaluate(f, second))

    scores = np.empty(budget)
    for start in range(0, budget, 200):
        block = midpoints[start:start + 200]
        scores[start:start + 200] = np.min(np.linalg.norm(block[:, None, :] - screen_images[None, :, :], axis=2),
                                           axis=1)

    best = None
    for index in np.argsort(-scores, kind="stable")[:confirm]:
        bound = grid_gap_lower_bound(f, x0, space, eps, midpoints[index], per_axis=per_axis, space_out=space_out)
        logger.debug("screened gap %.6g confirmed as %.6g (accepted=%s)", scores[index], bound.lower_bound,
                     bound.accepted)
        if bound.accepted and (best is None or bound.lower_bound > best.gap_lower_bound):
            best = Witness(evaluate(f, first[index]), evaluate(f, second[index]), midpoints[index], bound.lower_bound,
                           first[index], second[index], bound.slack)
    return best


def boundary_preimage_check(f, x0, space, eps, samples=200, seed=0, delta=1e-4, directions=20, space_out=None,
                            certificate=None):
    """Checks that interior points of B(x0, eps) map to interior points of its image.

    For ``x`` sampled in B(x0, eps (1 - 1e-3)) and ``directions`` unit vectors ``u``, each target ``f(x) + delta u`` must
    have a preimage in the ball, so ``f(x)`` is not on the boundary of the image.

    :param certificate: if given, must be a certified :class:`ConvexityCertificate` for this ``eps``
    :raises NotSurjective: if ``Df(x0)`` is not onto
    :rtype: CheckResult
    """
    surjectivity = surjectivity_check(f, x0)
    if not surjectivity:
        raise NotSurjective(surjectivity.rank, f.n_out)
    if certificate is not None and certificate.verdict != CERTIFIED:
        raise PreconditionViolated(f"the image of the ball is not certified convex (verdict {certificate.verdict})")

    space_out = NormSpace(f.n_out) if space_out is None else space_out
    rng = as_generator(seed)
    ball = Ball(x0, eps, space)
    xs = Ball(x0, eps * (1.0 - 1e-3), space).sample(samples, rng, surface_fraction=0.5)

    for x in xs:
        fx = evaluate(f, x)
        for u in space_out.sample_sphere(directions, rng):
            target = fx + delta * u
            result = gauss_newton_preimage(f, target, x)
            if result.converged and ball.contains(result.x, tol=1e-12):
                continue
            _, preimage = distance_to_preimage_upper_bound(f, x, target, space, seed=rng)
            if preimage is None or not ball.contains(preimage, tol=1e-12):
                return CheckResult(False, witness=(x, target), details={"delta": delta})
    return CheckResult(True, details={"delta": delta, "points": samples, "directions": directions})
