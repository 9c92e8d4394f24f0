"""Exception types shared across the package."""


class SpinstabError(Exception):
    """Base class for all spinstab errors."""


class UsageError(SpinstabError, ValueError):
    """Caller violated a precondition (bad shapes, bad parameters, bad text)."""


class CapacityError(SpinstabError, RuntimeError):
    """Requested computation exceeds a configured enumeration or cost cap."""


class ObservableSyntaxError(UsageError):
    """Malformed observable text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position
