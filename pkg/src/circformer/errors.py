"""Exception hierarchy shared by all modules."""


class CircformerError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(CircformerError, ValueError):
    pass


class LengthError(ShapeError):
    """Transform length is not a power of two."""


class DomainError(CircformerError, ValueError):
    pass


class FeasibilityError(CircformerError):
    """A device plan exceeds its resource budget.

    ``deficits`` maps each violated resource component to the amount by
    which usage exceeds the limit.
    """

    def __init__(self, message, deficits=None):
        super().__init__(message)
        self.deficits = dict(deficits or {})


class CycleError(CircformerError):
    def __init__(self, message, edge=None):
        super().__init__(message)
        self.edge = edge


class UnschedulableError(CircformerError):
    pass


class ContainerError(CircformerError):
    """Malformed or inconsistent weight container."""
