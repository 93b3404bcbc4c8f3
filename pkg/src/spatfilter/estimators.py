"""Estimator-style wrappers around the filter functions.

Each filter is exposed as a scikit-learn compatible estimator: constructor
arguments are plain hyperparameters (``get_params`` / ``set_params`` /
``clone`` work as usual), ``fit(y)`` runs the filter on a (U, N) observation
matrix, and fitted attributes carry the results (``loglik_``,
``unit_logliks_``, ``diagnostics_``, ...).  ``score(y)`` returns the
log-likelihood estimate, so the filters compose with model-selection
utilities from the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import baselines
from .bagged import BaggedConfig, abf_loglik, abfir_loglik, ubf_loglik
from .core.errors import ConfigurationError
from .core.neighborhoods import Neighborhood

__all__ = [
    "UnadaptedBaggedFilter",
    "AdaptedBaggedFilter",
    "GuidedAdaptedBaggedFilter",
    "ParticleFilter",
    "BlockParticleFilter",
    "EnsembleKalmanFilter",
    "GuidedIntermediateFilter",
    "FILTER_ESTIMATORS",
]


class _BaseFilterEstimator(BaseEstimator):
    """Shared fit/score plumbing; subclasses implement ``_run``."""

    def fit(self, y, X=None):
        result = self._run(np.asarray(y, dtype=float))
        self.result_ = result
        self.loglik_ = result.total
        self.time_logliks_ = result.time_logliks
        self.unit_logliks_ = getattr(result, "unit_logliks", None)
        self.diagnostics_ = getattr(result, "diagnostics", None)
        return self

    def score(self, y, X=None):
        self.fit(y)
        return self.loglik_

    def _neighborhood(self):
        nb = self.neighborhood
        if nb is None:
            nb = Neighborhood.co_located_lags(2)
        if not isinstance(nb, Neighborhood):
            raise ConfigurationError("neighborhood must be a Neighborhood")
        return nb


class UnadaptedBaggedFilter(_BaseFilterEstimator):
    """Likelihood estimation from unconditioned replicate simulations."""

    def __init__(self, model=None, n_replicates=1000, neighborhood=None,
                 resample_scheme="systematic", random_state=0):
        self.model = model
        self.n_replicates = n_replicates
        self.neighborhood = neighborhood
        self.resample_scheme = resample_scheme
        self.random_state = random_state

    def _run(self, y):
        cfg = BaggedConfig(neighborhood=self._neighborhood(),
                           n_replicates=self.n_replicates,
                           resample_scheme=self.resample_scheme,
                           seed=self.random_state)
        return ubf_loglik(self.model, y, cfg)


class AdaptedBaggedFilter(_BaseFilterEstimator):
    """Bagged filter with per-replicate greedy data tracking."""

    def __init__(self, model=None, n_replicates=100, n_particles=20,
                 neighborhood=None, resample_scheme="systematic",
                 random_state=0):
        self.model = model
        self.n_replicates = n_replicates
        self.n_particles = n_particles
        self.neighborhood = neighborhood
        self.resample_scheme = resample_scheme
        self.random_state = random_state

    def _run(self, y):
        cfg = BaggedConfig(neighborhood=self._neighborhood(),
                           n_replicates=self.n_replicates,
                           n_particles=self.n_particles,
                           resample_scheme=self.resample_scheme,
                           seed=self.random_state)
        return abf_loglik(self.model, y, cfg)


class GuidedAdaptedBaggedFilter(_BaseFilterEstimator):
    """Bagged filter with guided intermediate resampling."""

    def __init__(self, model=None, n_replicates=100, n_particles=20,
                 n_intermediate=1, n_guide=20, neighborhood=None,
                 resample_scheme="systematic", random_state=0):
        self.model = model
        self.n_replicates = n_replicates
        self.n_particles = n_particles
        self.n_intermediate = n_intermediate
        self.n_guide = n_guide
        self.neighborhood = neighborhood
        self.resample_scheme = resample_scheme
        self.random_state = random_state

    def _run(self, y):
        cfg = BaggedConfig(neighborhood=self._neighborhood(),
                           n_replicates=self.n_replicates,
                           n_particles=self.n_particles,
                           n_intermediate=self.n_intermediate,
                           n_guide=self.n_guide,
                           resample_scheme=self.resample_scheme,
                           seed=self.random_state)
        return abfir_loglik(self.model, y, cfg)


class ParticleFilter(_BaseFilterEstimator):
    """Bootstrap particle filter with joint weights over all units."""

    def __init__(self, model=None, n_particles=1000,
                 resample_scheme="systematic", random_state=0):
        self.model = model
        self.n_particles = n_particles
        self.resample_scheme = resample_scheme
        self.random_state = random_state

    def _run(self, y):
        return baselines.pf_loglik(self.model, y, self.n_particles,
                                   seed=self.random_state,
                                   resample_scheme=self.resample_scheme)


class BlockParticleFilter(_BaseFilterEstimator):
    """Particle filter resampling disjoint unit blocks independently."""

    def __init__(self, model=None, n_particles=1000, block_size=2,
                 resample_scheme="systematic", random_state=0):
        self.model = model
        self.n_particles = n_particles
        self.block_size = block_size
        self.resample_scheme = resample_scheme
        self.random_state = random_state

    def _run(self, y):
        partition = baselines.BlockPartition.contiguous(
            self.model.dims.n_units, self.block_size)
        return baselines.bpf_loglik(self.model, y, self.n_particles,
                                    partition, seed=self.random_state,
                                    resample_scheme=self.resample_scheme)


class EnsembleKalmanFilter(_BaseFilterEstimator):
    """Stochastic ensemble filter with a Gaussian update rule."""

    def __init__(self, model=None, n_ensemble=1000, random_state=0):
        self.model = model
        self.n_ensemble = n_ensemble
        self.random_state = random_state

    def _run(self, y):
        res = baselines.enkf_loglik(self.model, y, self.n_ensemble,
                                    seed=self.random_state)
        self.filter_means_ = res.filter_means
        return res


class GuidedIntermediateFilter(_BaseFilterEstimator):
    """Global particle filter with lookahead guiding and substep resampling."""

    def __init__(self, model=None, n_particles=1000, n_guide=30, lookahead=1,
                 n_intermediate=1, resample_scheme="systematic",
                 random_state=0):
        self.model = model
        self.n_particles = n_particles
        self.n_guide = n_guide
        self.lookahead = lookahead
        self.n_intermediate = n_intermediate
        self.resample_scheme = resample_scheme
        self.random_state = random_state

    def _run(self, y):
        return baselines.girf_loglik(
            self.model, y, self.n_particles, n_guide=self.n_guide,
            lookahead=self.lookahead, n_intermediate=self.n_intermediate,
            seed=self.random_state, resample_scheme=self.resample_scheme)


FILTER_ESTIMATORS = {
    "ubf": UnadaptedBaggedFilter,
    "abf": AdaptedBaggedFilter,
    "abfir": GuidedAdaptedBaggedFilter,
    "pf": ParticleFilter,
    "bpf": BlockParticleFilter,
    "enkf": EnsembleKalmanFilter,
    "girf": GuidedIntermediateFilter,
}
