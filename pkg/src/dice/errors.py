"""Error taxonomy shared by the library and the CLI.

Exit-code mapping lives in the CLI; library code raises these and never
calls sys.exit.
"""


class DiceError(Exception):
    """Base class for all package errors."""


class ValidationError(DiceError):
    """Bad shapes, bad values, bad config. CLI exit code 2."""


class FormatError(DiceError):
    """Malformed or truncated tensor/manifest files. CLI exit code 3."""


class NumericalError(DiceError):
    """Numerical failure, e.g. a non-positive-definite denominator. CLI exit code 4."""
