"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was called outside the regime where it is accurate."""


class ResourceLimitError(RuntimeError):
    """A request exceeds a practical size bound (e.g. kernel order)."""


class ConstructionError(ValueError):
    """An object could not be built from the given data (e.g. an empty support)."""
