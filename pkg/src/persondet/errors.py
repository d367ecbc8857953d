"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class ConfigError(Exception):
    """Invalid configuration: bad layer shapes, unknown presets, bad flags."""


class DataError(Exception):
    """Invalid or missing data: malformed manifests, out-of-bounds boxes."""


class NumericError(Exception):
    """Numerical failure during training, e.g. non-finite loss."""


class UsageError(Exception):
    """API misused, e.g. backward called before forward."""
