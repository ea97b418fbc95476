"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class DimensionError(ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class ConfigError(Exception):
    """Invalid or unknown configuration values."""


class DataError(Exception):
    """Dataset, checkpoint, or file contents violate their format."""


class FormatError(DataError):
    """An on-disk array file header/payload is malformed."""


class NumericalError(RuntimeError):
    """A solver or training run produced non-finite values."""
