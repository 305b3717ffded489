"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
NumericalError -> 3, MissingInputError -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration value or malformed config file."""


class NumericalError(RuntimeError):
    """A numerical method failed (variance non-positive, NaN, time step underflow)."""


class MissingInputError(FileNotFoundError):
    """A pipeline stage was invoked without its prior-stage artifacts."""
