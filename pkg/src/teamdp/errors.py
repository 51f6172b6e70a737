"""Exception types shared across the package."""


class TeamDpError(Exception):
    """Base class for all teamdp errors."""


class ShapeMismatchError(TeamDpError):
    """A policy, measure or table does not match the team's spaces."""


class CapExceededError(TeamDpError):
    """An enumeration or memory cap would be exceeded.

    Carries the count that would be required so callers can report it.
    """

    def __init__(self, message, required=None, cap=None):
        super().__init__(message)
        self.required = required
        self.cap = cap


class AbsoluteContinuityError(TeamDpError):
    """A reference measure puts zero mass where a kernel puts positive mass."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class SpecFormatError(TeamDpError):
    """A document could not be parsed into a model object."""

    def __init__(self, message, lineno=None, colno=None):
        super().__init__(message)
        self.lineno = lineno
        self.colno = colno
