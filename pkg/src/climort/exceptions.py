"""Exception hierarchy.

Input and configuration problems derive from :class:`InputError`; numerical
failures during estimation derive from :class:`ModelError`. The CLI maps the
former to exit code 2 and the latter to exit code 1.
"""


class InputError(ValueError):
    """Malformed, missing or inconsistent input data."""


class ConfigError(InputError):
    """Invalid run configuration."""


class ModelError(RuntimeError):
    """Estimation or simulation could not be carried out."""


class RankDeficientError(ModelError):
    """Design matrix is not of full column rank."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class DegenerateSeriesError(ModelError):
    """Time series without variation where variation is required."""


class EquivalenceError(ModelError):
    """Summed per-iteration coefficients disagree with a single refit."""
