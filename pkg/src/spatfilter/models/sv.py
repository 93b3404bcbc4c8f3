"""Stochastic-volatility toy: a case where Gaussian-rule assimilation fails.

The latent process is a one-dimensional Gaussian random walk and the
observation is N(0, X_n^2): the data are informative about |X_n| but
uncorrelated with X_n, so any filter that updates through the
state-observation covariance computes a zero gain and learns nothing.
Particle filters weight by the actual density and track |X_n| without
difficulty.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core.dims import SpatPompDims
from ..core.model import SpatPompModel
from ..core.rng import standard_normal
from ..core.weights import normal_logpdf

__all__ = ["SvToyParams", "StochasticVolatilityToy"]

# Variance floor keeping the observation density proper at x == 0.
_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class SvToyParams:
    n_times: int
    sigma_x: float = 1.0

    def __post_init__(self):
        if self.sigma_x <= 0:
            raise ValueError("sigma_x must be positive")


class StochasticVolatilityToy(SpatPompModel):

    state_dim = 1

    def __init__(self, params: SvToyParams):
        self.params = params
        self.dims = SpatPompDims(n_units=1, n_times=params.n_times)
        self.theta = {"sigma_x": params.sigma_x}

    def with_theta(self, **updates):
        return StochasticVolatilityToy(replace(self.params, **updates))

    def simulate_initial(self, rng, size=()):
        z = standard_normal(rng, size + (1,))
        return (self.params.sigma_x * z)[..., None]

    def simulate_transition(self, x, t0, t1, rng):
        if t1 == t0:
            return x
        z = standard_normal(rng, x.shape[:-1])
        return x + (self.params.sigma_x * np.sqrt(t1 - t0) * z)[..., None]

    def _obs_sd(self, x):
        return np.sqrt(x[..., 0] ** 2 + _VAR_FLOOR)

    def measurement_logdensity(self, n, y, x, scale=None):
        return normal_logpdf(y, 0.0, self._obs_sd(x))

    def simulate_measurement(self, n, x, rng):
        eta = standard_normal(rng, x.shape[:-1])
        return self._obs_sd(x) * eta

    def measurement_mean(self, n, x):
        return np.zeros(x.shape[:-1])

    def measurement_var(self, n, x, scale=None):
        return x[..., 0] ** 2 + _VAR_FLOOR
