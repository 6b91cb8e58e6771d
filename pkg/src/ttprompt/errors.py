"""Exception types mapped to CLI exit codes (usage=1, data=2, numerical=3)."""


class UsageError(Exception):
    """Bad command-line arguments or configuration keys/values."""


class DataError(Exception):
    """Malformed or inconsistent input data (files, graphs, splits)."""


class NumericalError(Exception):
    """Non-finite values or a numerically impossible computation."""
