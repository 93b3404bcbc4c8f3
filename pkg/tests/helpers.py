"""Shared fixtures and the stored-weights reference implementation."""

from __future__ import annotations

import numpy as np

from spatfilter.bagged import BaggedConfig, _sweep, lag_log_gamma
from spatfilter.core import (
    Diagnostics,
    LogWeightTensor,
    ReplicateReducer,
    log_sum_exp,
    ordered_total,
    simulate_dataset,
)
from spatfilter.core.weights import LoglikResult
from spatfilter.models import CorrelatedBmParams, CorrelatedBrownianMotion

TABLE_BM_OFFSETS = [(1, 0), (2, 0), (0, 1), (0, 2)]


def bm_model(n_units=4, n_times=10, rho=0.4, tau=1.0):
    return CorrelatedBrownianMotion(
        CorrelatedBmParams(n_units=n_units, n_times=n_times, rho=rho, tau=tau))


def bm_data(n_units=4, n_times=10, seed=42, rho=0.4, tau=1.0):
    model = bm_model(n_units, n_times, rho, tau)
    return model, simulate_dataset(model, seed).y


class _RecordingObserver:
    """Captures the full measurement log-weight tensor from a sweep."""

    def __init__(self, dims, n_replicates, pool_size):
        self.lw = np.empty((dims.n_units, dims.n_times, n_replicates,
                            pool_size))
        self._row = 0

    def start_chunk(self, c):
        self._chunk = c

    def step(self, n, lw, pool):
        block = np.moveaxis(lw, 2, 0)
        self.lw[:, n - 1, self._row:self._row + self._chunk, :] = block

    def end_chunk(self):
        self._row += self._chunk


def abf_reference_loglik(model, data, config: BaggedConfig) -> LoglikResult:
    """Stored-weights form of the adapted bagged filter.

    Runs the identical propagation (same streams, same resampling), stores
    every measurement log-weight, and evaluates the per-(u, n) localized
    products directly from the full tensor rather than through streaming
    accumulation.  Exists only as a test oracle; memory is O(U N R J).
    """
    dims = model.dims
    r, j = config.n_replicates, config.n_particles
    rec = _RecordingObserver(dims, r, j)
    diag = Diagnostics()
    _sweep(model, np.asarray(data, float), config, "abf", rec, diag)
    tensor = LogWeightTensor(rec.lw)
    lw = tensor.values
    nb = config.neighborhood
    max_lag = nb.max_lag
    num_red = ReplicateReducer()
    den_red = ReplicateReducer()
    num = np.empty((r, dims.n_units, dims.n_times))
    den = np.empty_like(num)
    for i in range(r):
        lw_i = lw[:, :, i, :]
        for n in range(1, dims.n_times + 1):
            # Current-time factors: per-particle member sums, then the
            # augmented version including the observation's own weight.
            cur = np.zeros((1, j, dims.n_units))
            for tgt, src in nb.lag_layers(n, 0, dims):
                cur[:, :, tgt] += lw_i[src, n - 1, :].T[None]
            own = lw_i[:, n - 1, :].T[None]
            gamma0 = np.zeros((1, dims.n_units))
            touched = np.zeros(dims.n_units, dtype=bool)
            for tgt, _src in nb.lag_layers(n, 0, dims):
                touched[tgt] = True
            if touched.any():
                gamma0[:, touched] = log_sum_exp(cur[:, :, touched], axis=1) \
                    - np.log(j)
            gamma_plus = log_sum_exp(cur + own, axis=1) - np.log(j)
            log_num = gamma_plus.copy()
            log_den = gamma0.copy()
            for k in range(1, max_lag + 1):
                if n - k < 1:
                    continue
                vals = lag_log_gamma(lw_i[:, n - k - 1, :].T[None], nb, n, k,
                                     dims)
                if vals is not None:
                    log_num += vals
                    log_den += vals
            num[i, :, n - 1] = log_num[0]
            den[i, :, n - 1] = log_den[0]
    for i in range(r):
        num_red.add(num[i])
        den_red.add(den[i])
    log_num = num_red.value()
    log_den = den_red.value()
    with np.errstate(invalid="ignore"):
        ll = log_num - log_den
    ll = np.where(np.isfinite(ll), ll, config.loglik_floor)
    return LoglikResult(total=ordered_total(ll), unit_logliks=ll)
