"""Exception types shared across the package."""


class SemidiscreteError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(SemidiscreteError):
    """An operation was called with arguments outside its contract."""


class DomainError(SemidiscreteError):
    """A mathematical domain violation (e.g. log/power of a nonpositive value)."""


class ConfigError(SemidiscreteError):
    """A configuration file could not be parsed or validated."""


class OverflowDiagnostic(SemidiscreteError):
    """A coefficient or step evaluation produced a non-finite value.

    Carries the state at which the evaluation blew up so the offending
    trajectory point can be reported.
    """

    def __init__(self, message: str, t: float | None = None, x: float | None = None):
        super().__init__(message)
        self.t = t
        self.x = x


class PhiBoundError(SemidiscreteError):
    """A phi hook exceeded its declared global bound during simulation."""


class ReferenceOverflowError(SemidiscreteError):
    """The reference solution overflowed; the experiment cannot proceed.

    ``path_index`` identifies the offending path.
    """

    def __init__(self, message: str, path_index: int):
        super().__init__(message)
        self.path_index = path_index
