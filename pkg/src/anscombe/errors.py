"""Semantic exception hierarchy shared by all modules."""


class AnscombeError(Exception):
    """Base error for this package."""


class ValidationError(AnscombeError, ValueError):
    """Inputs violate a documented contract (domain, shape, schema)."""


class SingularInputError(ValidationError):
    """Input combination is a known singular point of a formula."""


class BracketError(AnscombeError):
    """Root bracketing failed: no sign change over the supplied interval."""


class ConvergenceError(AnscombeError):
    """An iterative procedure exceeded its iteration budget.

    ``last_iterate`` carries the final state so callers may still inspect it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SolverError(AnscombeError):
    """A boundary solver failed; the message names the offending step."""


class RangeError(AnscombeError):
    """A transform was requested outside the solved grid."""


class ResourceError(AnscombeError):
    """A computation would exceed the configured memory budget."""
