class PolyakConvexityError(ValueError):
    """Base class for all errors raised by polyakconvexity."""


class UnsupportedExponent(PolyakConvexityError):
    pass


class DomainError(PolyakConvexityError):
    pass


class PreconditionViolated(PolyakConvexityError):
    pass


class DimensionMismatch(PolyakConvexityError):
    pass


class NotSurjective(PolyakConvexityError):
    """The Jacobian at the reference point does not have full row rank."""

    def __init__(self, rank, n_out):
        self.rank = rank
        self.n_out = n_out
        super().__init__(f"Jacobian has rank {rank} < {n_out}, so the derivative is not onto")


class NotRegular(PolyakConvexityError):
    """The stacked derivative of (objective, constraint) is not onto at x0."""

    def __init__(self, rank, n_out):
        self.rank = rank
        self.n_out = n_out
        super().__init__(f"x0 is not a regular point: stacked Jacobian has rank {rank} < {n_out}")


class ValidationFailed(PolyakConvexityError):
    """Metric regularity could not be validated even after shrinking the radii.

    Carries the worst offending domain point ``x`` and target ``y``.
    """

    def __init__(self, x, y, worst_ratio, mu):
        self.x = x
        self.y = y
        self.worst_ratio = worst_ratio
        self.mu = mu
        super().__init__(f"metric regularity validation failed: worst ratio {worst_ratio:.6g} exceeds mu={mu:.6g}")


class ConditionFails(PolyakConvexityError):
    pass


class DimensionTooLarge(PolyakConvexityError):
    pass


class Infeasible(PolyakConvexityError):
    pass


class EpsilonNonpositive(PolyakConvexityError):
    pass


class MultiplierNotFound(PolyakConvexityError):
    pass


class PointNotInCone(PolyakConvexityError):
    pass


class ParseError(PolyakConvexityError):
    def __init__(self, message, line, column=1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class SemanticError(PolyakConvexityError):
    pass


class NotFound(PolyakConvexityError):
    pass
