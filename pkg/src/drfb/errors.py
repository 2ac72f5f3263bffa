"""Exception hierarchy shared across the package."""


class DrfbError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(DrfbError, ValueError):
    pass


class DomainError(DrfbError, ValueError):
    pass


class UnsupportedModeError(DrfbError, NotImplementedError):
    """Raised when a nonzero current reaches the open-circuit output map."""


class DimensionError(DrfbError, ValueError):
    pass


class InstabilityError(DrfbError, RuntimeError):
    pass


class DivergenceError(DrfbError, RuntimeError):
    pass


class TelemetryError(DrfbError, ValueError):
    """Malformed, non-monotone or gapped telemetry."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class InfeasibleError(DrfbError, RuntimeError):
    """The gain-synthesis program has no strictly feasible point.

    ``suggested_betas`` lists the deterministic recovery schedule
    (beta divided by 10, three times).
    """

    def __init__(self, message, residual=None, suggested_betas=()):
        super().__init__(message)
        self.residual = residual
        self.suggested_betas = tuple(suggested_betas)


class NumericalFailureError(DrfbError, RuntimeError):
    pass


class ConfigError(DrfbError, ValueError):
    pass
