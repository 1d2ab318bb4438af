"""Exception types shared across the toolkit."""


class ElmorreyError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(ElmorreyError, ValueError):
    """Invalid grid, scheme or solver configuration."""


class DomainError(ElmorreyError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class FormatError(ElmorreyError, ValueError):
    """Malformed ELF3 field file."""


class PreconditionError(ElmorreyError):
    """Input violates a checker precondition (e.g. not a solution).

    ``details`` carries the measured quantity that caused the refusal.
    """

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class BoundaryContaminationError(ElmorreyError):
    """Field does not decay inside the box, so periodic wraparound is not negligible."""


class InstabilityError(ElmorreyError):
    """Time stepping produced non-finite values; ``state`` is the last finite one."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
