"""Benchmark models implementing the SpatPOMP contract."""

from .brownian import (
    CorrelatedBmParams,
    CorrelatedBrownianMotion,
    bm_coupling_matrix,
    bm_kalman_matrices,
)
from .diffusion import (
    DiffusionToyParams,
    diffusion_adapted_moments,
    simulate_tracking,
)
from .lorenz96 import Lorenz96, Lorenz96Params
from .measles import (
    Demographics,
    MeaslesMetapop,
    MeaslesParams,
    discretized_gaussian_logpmf,
    load_case_csv,
    load_demographics_csv,
    measles_euler_step,
    measles_gravity,
    measles_seasonal_beta,
    measles_transmission_rate,
)
from .registry import MODEL_NAMES, build_model, model_family, parameter_transforms
from .sv import StochasticVolatilityToy, SvToyParams

__all__ = [
    "CorrelatedBmParams",
    "CorrelatedBrownianMotion",
    "bm_coupling_matrix",
    "bm_kalman_matrices",
    "DiffusionToyParams",
    "diffusion_adapted_moments",
    "simulate_tracking",
    "Lorenz96",
    "Lorenz96Params",
    "Demographics",
    "MeaslesMetapop",
    "MeaslesParams",
    "discretized_gaussian_logpmf",
    "load_case_csv",
    "load_demographics_csv",
    "measles_euler_step",
    "measles_gravity",
    "measles_seasonal_beta",
    "measles_transmission_rate",
    "MODEL_NAMES",
    "build_model",
    "model_family",
    "parameter_transforms",
    "StochasticVolatilityToy",
    "SvToyParams",
]
