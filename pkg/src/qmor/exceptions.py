"""Exception hierarchy shared across the toolkit.

The CLI maps SchemaError to exit code 1 and every other QmorError to exit
code 2; everything else is a genuine bug.
"""


class QmorError(Exception):
    """Base class for all errors raised by qmor."""


class SchemaError(QmorError):
    """A scenario file or input record violates the published schema."""


class DimensionMismatchError(QmorError):
    """Operands act on different numbers of qubits or incompatible shapes."""


class AlgebraError(QmorError):
    """Internal consistency failure of the operator algebra."""


class InvalidStateError(QmorError):
    """A quantum state description fails normalization or positivity checks."""


class ClosureOverflowError(QmorError):
    """The generator closure exceeded the configured size limit."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NotClosedError(QmorError):
    """A variable set is not closed under the generator."""


class UnsupportedAffineError(QmorError):
    """The dynamics produce a constant (identity) term; only homogeneous
    linear systems are supported."""


class SingularMatrixError(QmorError):
    """Matrix is singular to working precision."""


class NotHurwitzError(QmorError):
    """Matrix has eigenvalues with non-negative real part."""


class IndefiniteMatrixError(QmorError):
    """A matrix that must be positive semidefinite is significantly
    indefinite."""


class ConvergenceError(QmorError):
    """An iterative kernel failed to converge."""


class ResidualError(QmorError):
    """A solver produced a solution whose residual exceeds tolerance."""


class DegenerateSplitError(QmorError):
    """Requested truncation order falls inside a cluster of nearly equal
    Hankel singular values."""


class StepSizeError(QmorError):
    """Time integration cannot proceed with a sensible step size."""


class IntegrationError(QmorError):
    """A trajectory violated a physical invariant during integration."""
