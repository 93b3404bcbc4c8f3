"""Bagged filters and baselines for spatiotemporal state-space models."""

from . import baselines, core, estimators, inference, models
from .bagged import (
    BaggedConfig,
    GammaAccumulator,
    StateFunction,
    abf_loglik,
    abfir_loglik,
    bagged_state_estimate,
    ubf_loglik,
)
from .baselines import (
    BlockPartition,
    LinearGaussianSystem,
    bpf_loglik,
    enkf_loglik,
    girf_loglik,
    kalman_loglik,
    pf_filter_means,
    pf_loglik,
)
from .inference import (
    IabfConfig,
    McapInterval,
    ProfilePoint,
    iabf_maximize,
    mcap_interval,
    run_profile,
    run_slice,
)

__version__ = "0.1.0"
