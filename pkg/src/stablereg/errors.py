"""Exception types shared across the package."""


class ResourceLimitError(RuntimeError):
    """A size guard tripped (table length, enumeration count, ...)."""


class RegimeError(ValueError):
    """An operation was called outside the phase regime it is defined for."""
