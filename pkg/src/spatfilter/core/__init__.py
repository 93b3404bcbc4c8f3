"""Shared machinery: model contract, neighborhoods, weights, resampling, RNG."""

from .dims import SpatPompDims
from .errors import (
    ConfigurationError,
    DegenerateWeightsError,
    SingularInnovationError,
    SpatFilterError,
)
from .model import SimulatedData, SpatPompModel, simulate_dataset
from .neighborhoods import Neighborhood, circle_distance, resolve_neighborhood
from .resampling import resample_indices
from .rng import Purpose, RngStream, derive_seed, rng_substream
from .weights import (
    LOGLIK_FLOOR,
    Diagnostics,
    LoglikResult,
    LogWeightTensor,
    ReplicateReducer,
    conditional_loglik,
    log_mean_exp,
    log_sum_exp,
    ordered_total,
)

__all__ = [
    "SpatPompDims",
    "ConfigurationError",
    "DegenerateWeightsError",
    "SingularInnovationError",
    "SpatFilterError",
    "SimulatedData",
    "SpatPompModel",
    "simulate_dataset",
    "Neighborhood",
    "circle_distance",
    "resolve_neighborhood",
    "resample_indices",
    "Purpose",
    "RngStream",
    "derive_seed",
    "rng_substream",
    "LOGLIK_FLOOR",
    "Diagnostics",
    "LoglikResult",
    "LogWeightTensor",
    "ReplicateReducer",
    "conditional_loglik",
    "log_mean_exp",
    "log_sum_exp",
    "ordered_total",
]
