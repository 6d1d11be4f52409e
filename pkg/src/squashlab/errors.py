"""Exception hierarchy.

Validation errors (bad parameters, infeasible configurations) and numerical
failures (instability, degenerate steady states, ...) are kept apart so the
command line can map them to different exit codes.
"""


class SquashlabError(Exception):
    """Base class for all package errors."""


class ValidationError(SquashlabError, ValueError):
    """A precondition on the inputs was violated."""


class DomainError(ValidationError):
    pass


class SingularityError(ValidationError):
    """Broadband loop denominator (1 - g) vanishes."""


class InfeasibleDetectionError(ValidationError):
    """The two homodyne channels ask for more than unit total efficiency."""


class ConfigError(ValidationError):
    pass


class NumericalError(SquashlabError, ArithmeticError):
    """A computation could not produce a trustworthy result."""


class LoopResonanceError(NumericalError):
    pass


class InstabilityError(NumericalError):
    pass


class RateExtractionError(NumericalError):
    pass


class NoUniqueSteadyStateError(NumericalError):
    pass


class GridLengthError(NumericalError):
    pass
