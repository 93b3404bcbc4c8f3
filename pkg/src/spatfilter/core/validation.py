"""Input validation helpers shared by the library and estimator layers."""

from __future__ import annotations

import numpy as np

from .dims import SpatPompDims
from .errors import ConfigurationError

__all__ = ["check_data", "check_positive_int", "check_probability"]


def check_data(y, dims: SpatPompDims) -> np.ndarray:
    """Validate an observation matrix against the model dimensions.

    Accepts a (U, N) array-like of finite reals and returns it as a float
    ndarray.
    """
    arr = np.asarray(y, dtype=float)
    if arr.shape != (dims.n_units, dims.n_times):
        raise ConfigurationError(
            "data shape %s does not match (U, N) = (%d, %d)"
            % (arr.shape, dims.n_units, dims.n_times))
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("observations must be finite")
    return arr


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    iv = int(value)
    if iv != value or iv < minimum:
        raise ConfigurationError("%s must be an integer >= %d, got %r"
                                 % (name, minimum, value))
    return iv


def check_probability(value, name: str, open_left=True, open_right=True) -> float:
    fv = float(value)
    lo_ok = fv > 0.0 if open_left else fv >= 0.0
    hi_ok = fv < 1.0 if open_right else fv <= 1.0
    if not (lo_ok and hi_ok):
        raise ConfigurationError("%s must lie in the unit interval, got %r"
                                 % (name, value))
    return fv
