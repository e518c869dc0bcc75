"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: usage errors exit 1,
data errors exit 2, numeric failures exit 3.
"""


class PrunekitError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 1


class UsageError(PrunekitError):
    """Invalid arguments or configuration (CLI exit code 1)."""

    exit_code = 1


class DataError(PrunekitError):
    """Malformed or inconsistent input data (CLI exit code 2)."""

    exit_code = 2


class NumericError(PrunekitError):
    """Numerical failure: non-finite values, singular systems (CLI exit code 3)."""

    exit_code = 3
