"""Exception hierarchy shared across the package.

Each class maps to one CLI exit status (see ``semalloc.cli``).
"""


class SemallocError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ConfigError(SemallocError):
    """A file could not be read or parsed."""

    code = "parse_error"


class ValidationError(SemallocError, ValueError):
    """An input violated a documented invariant.

    Args:
        path: Dotted location of the offending field, e.g. ``devices[1].bundle_size``.
        message: Human readable description.
    """

    code = "validation_error"

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class InfeasibleError(SemallocError):
    """A scenario has unmet demand and no eligible device to cover it."""

    code = "infeasible"


class BudgetExceededError(SemallocError):
    """The enumeration solver would visit more nodes than allowed."""

    code = "budget_exceeded"
