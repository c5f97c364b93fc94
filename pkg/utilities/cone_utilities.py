"""Polyhedral constraint cones: nonpositive orthants, zero blocks and their products."""
from .exceptions import DimensionMismatch, DomainError, PointNotInCone
from .geometry_utilities import CheckResult
from dataclasses import dataclass
import numpy as np

NONPOSITIVE = "nonpositive"
ZERO = "zero"


@dataclass(frozen=True)
class ConeSpec:
    """Product of blocks ``(kind, m)`` with kind ``'nonpositive'`` (R_-^m) or ``'zero'`` ({0}^m)."""
    blocks: tuple

    def __post_init__(self):
        blocks = tuple((str(kind), int(m)) for kind, m in self.blocks)
        for kind, m in blocks:
            if kind not in (NONPOSITIVE, ZERO):
                raise DomainError(f"unknown cone block {kind!r}")
            if m < 1:
                raise DomainError(f"cone block {kind!r} needs a positive size, got {m}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def nonpositive_orthant(cls, m):
        return cls(((NONPOSITIVE, m),))

    @classmethod
    def zero(cls, m):
        return cls(((ZERO, m),))

    @classmethod
    def product(cls, *cones):
        return cls(tuple(block for cone in cones for block in cone.blocks))

    @property
    def dim(self):
        return sum(m for _, m in self.blocks)

    @property
    def nonpositive_mask(self):
        return np.concatenate([np.full(m, kind == NONPOSITIVE) for kind, m in self.blocks])

    def _check(self, y):
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.dim:
            raise DimensionMismatch(f"vector of length {y.shape[0]} does not live in a cone of dimension {self.dim}")
        return y

    def contains(self, y, tol=0.0):
        y = self._check(y)
        mask = self.nonpositive_mask
        return bool(np.all(y[mask] <= tol) and np.all(np.abs(y[~mask]) <= tol))

    def project(self, y):
        """Euclidean projection onto the cone."""
        y = self._check(y)
        return np.where(self.nonpositive_mask, np.minimum(y, 0.0), 0.0)

    def violation(self, y):
        """Euclidean distance from ``y`` to the cone."""
        y = self._check(y)
        return float(np.linalg.norm(y - self.project(y)))

    def dual_contains(self, lam, tol=0.0):
        """Membership in the negative dual cone ``{lam : <lam, c> <= 0 for all c in C}``."""
        lam = self._check(lam)
        return bool(np.all(lam[self.nonpositive_mask] >= -tol))

    def project_dual(self, lam):
        lam = self._check(lam)
        return np.where(self.nonpositive_mask, np.maximum(lam, 0.0), lam)

    def generators(self):
        """Generators of the cone itself (rows); zero blocks contribute none."""
        eye = np.eye(self.dim)
        return -eye[self.nonpositive_mask]

    def active_set(self, y, tol=1e-9):
        """Indices where ``y`` touches the boundary: active nonpositive coordinates and every zero coordinate."""
        y = self._check(y)
        mask = self.nonpositive_mask
        return np.flatnonzero(~mask | (np.abs(y) <= tol))


@dataclass(frozen=True)
class DualConeDescription:
    """Generators (rows) of the negative dual cone and, for a point ``y``, of its intersection with ``y``'s annihilator."""
    generators: np.ndarray
    annihilator_basis: np.ndarray = None
    normal_generators: np.ndarray = None


def dual_cone_generators(cone, y=None, tol=1e-9):
    """Generators of the negative dual cone of ``cone``; with ``y`` also those of its intersection with ``y``'s annihilator.

    The annihilator basis spans the orthogonal complement of ``y`` (all of R^m when ``y = 0``).

    :type cone: ConeSpec
    :rtype: DualConeDescription
    """
    eye = np.eye(cone.dim)
    mask = cone.nonpositive_mask
    generators = np.vstack([eye[mask], eye[~mask], -eye[~mask]])
    if y is None:
        return DualConeDescription(generators)

    y = cone._check(y)
    if np.linalg.norm(y) <= tol:
        annihilator = eye
    else:
        _, _, vt = np.linalg.svd(y[None, :])
        annihilator = vt[1:]

    active = np.zeros(cone.dim, dtype=bool)
    active[cone.active_set(y, tol=tol)] = True
    normal = np.vstack([eye[mask & active], eye[~mask], -eye[~mask]])
    return DualConeDescription(generators, annihilator, normal)


def check_normal_cone(lam, y, cone, tol=1e-9):
    """Checks ``<lam, c - y> <= tol`` for all ``c`` in ``cone``, i.e. that ``lam`` is normal to the cone at ``y``.

    Exact for polyhedral cones: the test points are ``0``, ``2y`` and ``y + d`` for each generator ``d`` of the cone.

    :raises PointNotInCone: if ``y`` is not in the cone
    :return: passed, or the first test point ``c`` violating the inequality as witness
    :rtype: CheckResult
    """
    lam = cone._check(lam)
    y = cone._check(y)
    if not cone.contains(y, tol=tol):
        raise PointNotInCone(f"{y.tolist()} is not in the cone (distance {cone.violation(y):.3g})")

    test_points = [np.zeros_like(y), 2.0 * y] + [y + d for d in cone.generators()]
    for c in test_points:
        if float(lam @ (c - y)) > tol:
            return CheckResult(False, witness=c, details={"inner_product": float(lam @ (c - y))})
    return CheckResult(True)
