"""Exception hierarchy shared across the package."""


class EMLBError(Exception):
    """Base class for all errors raised by emlb."""


class ConfigError(EMLBError, ValueError):
    """Invalid configuration: bad grid, parameters, shapes or JSON input."""


class CompatibilityError(ConfigError):
    """Initial data violate the Gauss-law / solenoidal compatibility conditions."""


class DomainError(EMLBError, ValueError):
    """A field left the admissible state domain (vacuum, invalid enthalpy, ...)."""


class InputError(EMLBError, ValueError):
    """Malformed input to an analysis routine (e.g. too few time samples)."""


class BlowUpError(EMLBError, RuntimeError):
    """Numerical blow-up detected during time integration.

    The partially integrated series (if any) is attached as ``series`` so
    callers can still inspect what was computed before the failure.
    """

    def __init__(self, message, time=None, worst_mode=None, series=None):
        super().__init__(message)
        self.time = time
        self.worst_mode = worst_mode
        self.series = series
