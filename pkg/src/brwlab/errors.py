"""Error taxonomy shared by all modules.

UsageError maps to CLI exit code 2, ResourceCapError to exit code 3.
"""


class UsageError(ValueError):
    """Invalid arguments or argument combinations."""


class ResourceCapError(RuntimeError):
    """A configured cap (population, support, time, enumeration budget) was exceeded."""


class InvariantViolationError(RuntimeError):
    """An internal consistency assertion failed; indicates a bug, not bad input."""
