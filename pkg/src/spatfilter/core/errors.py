"""Exception types shared across the toolkit."""


class SpatFilterError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(SpatFilterError):
    """A config value is missing, malformed or inconsistent."""


class DegenerateWeightsError(SpatFilterError):
    """Every weight in a pool is zero (log-weight -inf).

    Carries the (unit, time) context when raised inside a filter loop so
    the caller's fallback policy can report where the collapse happened.
    """

    def __init__(self, message="all weights are zero", unit=None, time_index=None):
        self.unit = unit
        self.time_index = time_index
        if unit is not None or time_index is not None:
            message = f"{message} at (u={unit}, n={time_index})"
        super().__init__(message)


class SingularInnovationError(SpatFilterError):
    """Kalman innovation covariance is not invertible."""
