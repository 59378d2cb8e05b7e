"""Exception taxonomy shared across the workbench."""


class SpanforgeError(Exception):
    """Base class for all workbench-specific errors."""


class SolverFailure(SpanforgeError):
    """A backend numerical routine did not converge."""


class InconsistentSystem(SpanforgeError):
    """A linear system has no solution under the working tolerance."""


class ZeroConstraint(SpanforgeError):
    """The hyperplane constraint vector is (numerically) zero."""


class NoPositiveWitness(SpanforgeError):
    """Requested a positive witness on an input the program rejects."""


class NoNegativeWitness(SpanforgeError):
    """Requested a negative witness on an input the program accepts."""


class SparseFormatError(SpanforgeError, ValueError):
    """Malformed or mutually inconsistent sparse matrix description."""
