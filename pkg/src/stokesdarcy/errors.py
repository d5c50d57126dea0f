"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError/UsageError -> 2,
DomainError/NumericalError -> 3, OSError -> 4.
"""


class ConfigError(Exception):
    """Invalid configuration: bad schema, bad values, or an inconsistent setup."""


class UsageError(Exception):
    """A function was called outside its documented contract."""


class DomainError(Exception):
    """A mathematical operation was evaluated outside its domain."""


class NumericalError(Exception):
    """A computation produced a non-finite value."""

    def __init__(self, message: str, op_index: int | None = None, location=None):
        self.op_index = op_index
        self.location = location
        if op_index is not None:
            message = f"{message} (op index {op_index})"
        if location is not None:
            message = f"{message} at point {tuple(location)}"
        super().__init__(message)
