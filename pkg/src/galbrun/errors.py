"""Exception and warning types shared across the package.

Validation failures (bad input data) are ValueError subclasses; numerical
breakdowns (singular factorizations, ill-conditioned bases) are RuntimeError
subclasses so callers can map them to distinct exit codes.
"""


class FieldSyntaxError(ValueError):
    """Raised for malformed coefficient expressions (with source position)."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = "%s (at position %d)" % (message, position)
        super().__init__(message)


class MissingDerivative(ValueError):
    """A derivative of a field was requested but never declared."""


class ConstraintViolation(ValueError):
    """A declared box constraint or interpolation constraint is violated."""

    def __init__(self, message, field=None, point=None, value=None):
        self.field = field
        self.point = point
        self.value = value
        super().__init__(message)


class BoundaryFlowViolation(ValueError):
    """The background flow has a nonzero normal component on the boundary."""

    def __init__(self, message, point=None, normal_flow=None):
        self.point = point
        self.normal_flow = normal_flow
        super().__init__(message)


class InconsistentDerivative(ValueError):
    """A declared derivative field disagrees with a finite-difference check."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)


class MissingCreg(ValueError):
    """A condition requiring a div/grad regularity constant got none."""


class InvalidRange(ValueError):
    """Bad mesh range or cell count."""


class UnsupportedDegree(ValueError):
    """Polynomial degree outside the supported set {1, 2}."""


class DimensionMismatch(ValueError):
    """Spaces or matrices that must share a mesh/dof layout do not."""


class PreconditionViolated(ValueError):
    """An operation's precondition does not hold for the given input."""


class QuadratureInsufficient(UserWarning):
    """Quadrature order may be too low for non-polynomial coefficients."""


class CutoffAmbiguous(RuntimeError):
    """Singular values cluster at a rank-decision cutoff."""

    def __init__(self, message, tail=None):
        self.tail = tail
        super().__init__(message)


class IllConditionedBases(RuntimeError):
    """Subspace bases are too ill-conditioned to build projectors."""


class EmptySubspace(RuntimeError):
    """A diagnostic needs a nonempty subspace but got dimension zero."""


class DecompositionSizeError(RuntimeError):
    """Problem too large for the dense decomposition/whitening path."""


class SolverBreakdown(RuntimeError):
    """An iterative or direct linear-algebra routine failed to converge."""


class SingularMatrix(RuntimeError):
    """The system matrix is (numerically) singular."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class SingularGravityBlock(RuntimeError):
    """The gravity stiffness block is singular (no Dirichlet truncation)."""
