"""Bagged filters: likelihood evaluation by replicated localized filtering.

All three filters share one structure: R independent replicates each carry a
single adapted trajectory; per observation time a pool of particles (or the
trajectory itself) is weighted by the unit-level measurement density, and
conditional log-likelihoods localize those weights over a space-time
neighborhood of each observation.

- Unadapted: replicates simulate the latent process blindly (one particle).
- Adapted: per time step, a pool of proposals is drawn per replicate and one
  survivor, chosen by the joint measurement weight over all units, continues
  the trajectory.
- Adapted with intermediate resampling: the step from one observation time
  to the next is split into sub-intervals; a simulated-moment guide scores
  partial progress toward the next observation so the pool can be culled
  gradually rather than in a single brutal selection.

Neighborhood weight products are accumulated in a streaming representation:
per replicate and target (u, n), only the per-lag log factors (logs of
particle-averaged neighborhood products) are retained, never a full
(U, N, R, J) weight tensor.  The equivalent stored-tensor form exists in the
test suite as an oracle and must agree to the last bit, which is why every
combination of neighborhood weights routes through the helpers here.

Replicate results are reduced in fixed-size chunks in replicate order, so a
run is bitwise reproducible for a given (seed, config) regardless of worker
count.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .core.dims import SpatPompDims
from .core.errors import ConfigurationError, DegenerateWeightsError
from .core.model import SpatPompModel
from .core.neighborhoods import Neighborhood
from .core.resampling import resample_indices, resample_single
from .core.rng import Purpose, rng_substream
from .core.validation import check_data, check_positive_int
from .core.weights import (
    LOGLIK_FLOOR,
    REDUCE_CHUNK,
    Diagnostics,
    LoglikResult,
    ReplicateReducer,
    log_sum_exp,
    ordered_total,
)

__all__ = ["BaggedConfig", "StateFunction", "GammaAccumulator",
           "ubf_loglik", "abf_loglik", "abfir_loglik",
           "bagged_state_estimate"]


@dataclass(frozen=True)
class BaggedConfig:
    """Settings shared by the bagged filter family.

    ``n_particles`` = 1 gives unadapted behavior under the adapted driver;
    ``n_intermediate`` = 1 makes the intermediate-resampling variant
    coincide with the adapted filter.  ``n_guide`` counts the guide
    simulations per replicate (intermediate-resampling only, >= 2).
    """

    neighborhood: Neighborhood
    n_replicates: int = 100
    n_particles: int = 1
    n_intermediate: int = 1
    n_guide: int = 0
    resample_scheme: str = "systematic"
    seed: int = 0
    loglik_floor: float = LOGLIK_FLOOR
    n_threads: int = 1

    def updated(self, **changes) -> "BaggedConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# Neighborhood log-product accumulation
# ---------------------------------------------------------------------------

def lag_log_gamma(lw: np.ndarray, nb: Neighborhood, m: int, k: int,
                  dims: SpatPompDims) -> Optional[np.ndarray]:
    """Per-lag localized log factor for a replicate batch.

    ``lw`` holds measurement log-weights at source time m - k with shape
    (C, J, U).  Returns (C, U): per target unit, the log of the
    particle-averaged product of member weights at this lag (0 for targets
    without members), or None when no target has members.  Member
    contributions accumulate in ascending member-unit order.
    """
    layers = nb.lag_layers(m, k, dims)
    if not layers:
        return None
    c, j, u = lw.shape
    acc = np.zeros((c, j, u))
    touched = np.zeros(u, dtype=bool)
    for tgt, src in layers:
        acc[:, :, tgt] += lw[:, :, src]
        touched[tgt] = True
    out = np.zeros((c, u))
    out[:, touched] = log_sum_exp(acc[:, :, touched], axis=1) - np.log(j)
    return out


def current_member_sums(lw: np.ndarray, nb: Neighborhood, n: int,
                        dims: SpatPompDims) -> np.ndarray:
    """Per-particle sums of current-time member log-weights; (C, J, U)."""
    layers = nb.lag_layers(n, 0, dims)
    acc = np.zeros_like(lw)
    for tgt, src in layers:
        acc[:, :, tgt] += lw[:, :, src]
    return acc


class GammaAccumulator:
    """Streaming per-replicate-chunk accumulation of neighborhood factors.

    At each source time n the measurement log-weights feed the pending
    factors of every target time m in n..n+K (lag k = m - n); once time n
    itself is processed, target n is complete and is emitted.  Retained
    state is O(U * K) per replicate, independent of the series length.
    """

    def __init__(self, nb: Neighborhood, dims: SpatPompDims, batch: int):
        self.nb = nb
        self.dims = dims
        self.batch = batch
        self.max_lag = nb.max_lag
        self._gamma = {}
        self._gamma_plus = {}

    def _empty(self):
        return np.zeros((self.batch, self.dims.n_units, self.max_lag + 1))

    def observe(self, n: int, lw: np.ndarray) -> None:
        """Fold measurement log-weights (C, J, U) at time n into the state."""
        for k in range(0, self.max_lag + 1):
            m = n + k
            if m > self.dims.n_times:
                break
            vals = lag_log_gamma(lw, self.nb, m, k, self.dims)
            if vals is None:
                continue
            self._gamma.setdefault(m, self._empty())[:, :, k] = vals
        # Augmented current-time factor: members at time n plus the
        # observation's own weight, averaged over the particle pool.
        acc = current_member_sums(lw, self.nb, n, self.dims) + lw
        self._gamma_plus[n] = log_sum_exp(acc, axis=1) - np.log(lw.shape[1])

    def emit(self, n: int):
        """Per-replicate (log numerator, log denominator) for targets at n.

        The numerator uses the augmented current-time factor, the
        denominator the plain one; both multiply the lagged factors in
        ascending lag order.
        """
        buf = self._gamma.pop(n, None)
        if buf is None:
            buf = self._empty()
        log_num = self._gamma_plus.pop(n).copy()
        log_den = buf[:, :, 0].copy()
        for k in range(1, self.max_lag + 1):
            log_num += buf[:, :, k]
            log_den += buf[:, :, k]
        return log_num, log_den

    def clone(self) -> "GammaAccumulator":
        """Deep copy of the pending state (parameter-lineage copying)."""
        out = GammaAccumulator(self.nb, self.dims, self.batch)
        out._gamma = {m: v.copy() for m, v in self._gamma.items()}
        out._gamma_plus = {m: v.copy() for m, v in self._gamma_plus.items()}
        return out

    def emit_lag_sum(self, n: int) -> np.ndarray:
        """Sum of the lagged factors only (lags >= 1), for state estimation."""
        buf = self._gamma.pop(n, None)
        if buf is None:
            buf = self._empty()
        self._gamma_plus.pop(n, None)
        out = np.zeros((self.batch, self.dims.n_units))
        for k in range(1, self.max_lag + 1):
            out += buf[:, :, k]
        return out


# ---------------------------------------------------------------------------
# Sweep engine shared by the filter variants
# ---------------------------------------------------------------------------

def _chunk_ranges(total: int, size: int = REDUCE_CHUNK):
    for start in range(0, total, size):
        yield start, min(start + size, total)


def _substreams(seed, lo, hi, n, purpose, lane=0):
    return [rng_substream(seed, replicate=i, time_index=n, purpose=purpose,
                          lane=lane) for i in range(lo, hi)]


def _resample_row(log_weights_row, scheme, rng, diag: Diagnostics):
    """Resampled indices for one replicate's pool, with uniform fallback."""
    size = log_weights_row.size
    if size == 1:
        return np.zeros(1, dtype=np.intp)
    try:
        return resample_indices(log_weights_row, scheme, rng)
    except DegenerateWeightsError:
        diag.degenerate_weight_events += 1
        return rng.integers(0, size, size=size)


def _resample_one(log_weights_row, scheme, rng, diag: Diagnostics) -> int:
    """Single surviving index; draw-aligned with ``_resample_row(...)[0]``."""
    size = log_weights_row.size
    if size == 1:
        return 0
    try:
        return resample_single(log_weights_row, scheme, rng)
    except DegenerateWeightsError:
        diag.degenerate_weight_events += 1
        return int(rng.integers(0, size))


def _guide_logdensity(model, n, y_n, states, t_now, t_obs, proc_var,
                      discount, diag: Diagnostics):
    """Joint guide log-density of a pool against observation n; (C, J).

    Forecasts each state to the observation time, inflates the measurement
    variance by the discounted share of the simulated process variance, and
    evaluates the measurement density at the forecast mean under the
    re-parameterized scale.
    """
    mu = model.forecast_mean(states, t_now, t_obs)
    v_meas = model.measurement_var(n, mu)
    v_total = v_meas + discount * proc_var[:, None, :]
    floor = model.guide_var_floor(n, mu)
    clipped = int(np.count_nonzero(v_total < floor))
    if clipped:
        diag.var_clamp_events += clipped
        v_total = np.maximum(v_total, floor)
    scale = model.var_to_theta(n, v_total, mu)
    return model.measurement_logdensity(n, y_n, mu, scale=scale).sum(axis=-1)


def _sweep(model: SpatPompModel, y: np.ndarray, config: BaggedConfig,
           mode: str, observer, diag: Diagnostics) -> None:
    """Run all replicate chunks of one bagged filter variant.

    Per chunk, ``observer.start_chunk(c)`` is called, then per time step
    ``observer.step(n, lw, pool)`` with the measurement log-weights
    (C, J, U) of the weighting pool, then ``observer.end_chunk()``.
    """
    dims = model.dims
    r = check_positive_int(config.n_replicates, "n_replicates")
    n_particles = 1 if mode == "ubf" else check_positive_int(
        config.n_particles, "n_particles")
    if mode == "abfir":
        if not model.supports_guide():
            raise ConfigurationError(
                "model does not implement the guide contract")
        n_steps = check_positive_int(config.n_intermediate, "n_intermediate")
        n_guide = check_positive_int(config.n_guide, "n_guide", minimum=2)
        shared_pool = n_steps == 1 and n_particles <= n_guide

    for lo, hi in _chunk_ranges(r):
        c = hi - lo
        x = model.simulate_initial(
            _substreams(config.seed, lo, hi, 0, Purpose.INIT), size=(c,))
        observer.start_chunk(c)
        for n in range(1, dims.n_times + 1):
            x = model.reset_observed(x)
            t0, t1 = dims.obs_times[n - 1], dims.obs_times[n]
            y_n = y[:, n - 1]

            if mode in ("ubf", "abf"):
                pool = np.repeat(x[:, None, ...], n_particles, axis=1)
                pool = model.simulate_transition(
                    pool, t0, t1,
                    _substreams(config.seed, lo, hi, n, Purpose.PROPOSE))
                lw = model.measurement_logdensity(n, y_n, pool)
                if n_particles == 1:
                    x = pool[:, 0]
                else:
                    joint = lw.sum(axis=2)
                    for row, i in enumerate(range(lo, hi)):
                        rng = rng_substream(config.seed, replicate=i,
                                            time_index=n,
                                            purpose=Purpose.RESAMPLE, lane=1)
                        keep = _resample_one(joint[row],
                                             config.resample_scheme, rng,
                                             diag)
                        x[row] = pool[row, keep]
            else:
                pool = np.repeat(x[:, None, ...], n_guide, axis=1)
                pool = model.simulate_transition(
                    pool, t0, t1,
                    _substreams(config.seed, lo, hi, n, Purpose.PROPOSE))
                h_vals = model.measurement_mean(n, pool)
                proc_var = h_vals.var(axis=1, ddof=1)
                if shared_pool:
                    states = pool[:, :n_particles].copy()
                else:
                    states = np.repeat(x[:, None, ...], n_particles, axis=1)
                log_guide_prev = np.zeros((c, n_particles))
                grid = t0 + (t1 - t0) * np.arange(n_steps + 1) / n_steps
                for s in range(1, n_steps + 1):
                    if not (shared_pool and s == 1):
                        states = model.simulate_transition(
                            states, grid[s - 1], grid[s],
                            _substreams(config.seed, lo, hi, n,
                                        Purpose.PROPOSE, lane=s))
                    discount = (t1 - grid[s]) / (t1 - t0)
                    log_guide = _guide_logdensity(model, n, y_n, states,
                                                  grid[s], t1, proc_var,
                                                  discount, diag)
                    log_ratio = log_guide - log_guide_prev
                    for row, i in enumerate(range(lo, hi)):
                        rng = rng_substream(config.seed, replicate=i,
                                            time_index=n,
                                            purpose=Purpose.RESAMPLE, lane=s)
                        keep = _resample_row(log_ratio[row],
                                             config.resample_scheme, rng, diag)
                        states[row] = states[row, keep]
                        log_guide_prev[row] = log_guide[row, keep]
                x = states[:, 0].copy()
                lw = model.measurement_logdensity(n, y_n, pool)

            observer.step(n, lw, pool)
        observer.end_chunk()


# ---------------------------------------------------------------------------
# Likelihood estimation
# ---------------------------------------------------------------------------

class _LoglikObserver:
    """Feeds measurement weights into gamma accumulation and reduction."""

    def __init__(self, nb: Neighborhood, dims: SpatPompDims):
        self.nb = nb
        self.dims = dims
        self._num = ReplicateReducer()
        self._den = ReplicateReducer()
        self._den2 = ReplicateReducer()

    def start_chunk(self, c: int) -> None:
        self._acc = GammaAccumulator(self.nb, self.dims, c)
        self._block_num = np.empty((c, self.dims.n_units, self.dims.n_times))
        self._block_den = np.empty_like(self._block_num)

    def step(self, n: int, lw: np.ndarray, pool: np.ndarray) -> None:
        self._acc.observe(n, lw)
        a, b = self._acc.emit(n)
        self._block_num[:, :, n - 1] = a
        self._block_den[:, :, n - 1] = b

    def end_chunk(self) -> None:
        for row in range(self._block_num.shape[0]):
            self._num.add(self._block_num[row])
            self._den.add(self._block_den[row])
            self._den2.add(2.0 * self._block_den[row])

    def finish(self, floor: float, diag: Diagnostics) -> LoglikResult:
        log_num = self._num.value()
        log_den = self._den.value()
        with np.errstate(invalid="ignore"):
            ll = log_num - log_den
        degenerate = log_den == -np.inf
        floored = ~degenerate & ~np.isfinite(ll)
        ll = np.where(degenerate | floored, floor, ll)
        with np.errstate(invalid="ignore"):
            ess = np.exp(2.0 * log_den - self._den2.value())
        ess = np.where(degenerate, 0.0, ess)
        diag.degenerate_weight_events += int(degenerate.sum())
        diag.floor_events += int(floored.sum() + degenerate.sum())
        diag.min_ess = float(np.min(ess))
        diag.median_ess = float(np.median(ess))
        return LoglikResult(total=ordered_total(ll), unit_logliks=ll,
                            diagnostics=diag)


def ubf_loglik(model: SpatPompModel, data, config: BaggedConfig) -> LoglikResult:
    """Likelihood estimate from R unconditioned simulations of the model."""
    y = check_data(data, model.dims)
    diag = Diagnostics()
    obs = _LoglikObserver(config.neighborhood, model.dims)
    _sweep(model, y, config, "ubf", obs, diag)
    return obs.finish(config.loglik_floor, diag)


def abf_loglik(model: SpatPompModel, data, config: BaggedConfig) -> LoglikResult:
    """Adapted bagged filter: per-replicate greedy tracking of the data."""
    y = check_data(data, model.dims)
    diag = Diagnostics()
    obs = _LoglikObserver(config.neighborhood, model.dims)
    _sweep(model, y, config, "abf", obs, diag)
    return obs.finish(config.loglik_floor, diag)


def abfir_loglik(model: SpatPompModel, data, config: BaggedConfig) -> LoglikResult:
    """Adapted bagged filter with guided intermediate resampling.

    With one sub-interval the guide pool doubles as the proposal pool, the
    discounted process variance vanishes, and (for models whose measurement
    scale round-trips exactly) the algorithm coincides with the adapted
    bagged filter draw for draw.
    """
    y = check_data(data, model.dims)
    diag = Diagnostics()
    obs = _LoglikObserver(config.neighborhood, model.dims)
    _sweep(model, y, config, "abfir", obs, diag)
    return obs.finish(config.loglik_floor, diag)


# ---------------------------------------------------------------------------
# Latent-state estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StateFunction:
    """A function of the latent state with its conditioning neighborhood.

    ``fn`` maps a state batch (..., U, d) to values (...,).  The estimate of
    E[fn(X_n) | data] is localized on ``neighborhood`` resolved at target
    (anchor_unit, n); unlike likelihood neighborhoods it may include
    current-time observations, the anchor's own included.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    neighborhood: Neighborhood
    anchor_unit: int = 1
    name: str = ""

    @staticmethod
    def unit_mean(u: int, lags: int = 1, component: int = 0,
                  include_current: bool = True) -> "StateFunction":
        """Filter mean of one unit's state component.

        Conditions on the unit's own current observation (when
        ``include_current``) plus ``lags`` co-located earlier observations.
        """
        offsets = [(0, dn) for dn in range(0 if include_current else 1,
                                           lags + 1)]
        nb = Neighborhood.lags_plus_spatial(offsets, allow_current=True)
        return StateFunction(
            fn=lambda x: x[..., u - 1, component],
            neighborhood=nb, anchor_unit=u, name="mean_x%d" % u)


class _WeightedMeanReducer:
    """Numerically shifted running weighted mean over replicate chunks."""

    def __init__(self):
        self._shift = -np.inf
        self._num = 0.0
        self._den = 0.0

    def add(self, log_w: np.ndarray, values: np.ndarray) -> None:
        finite = log_w > -np.inf
        if not np.any(finite):
            return
        m = float(np.max(log_w))
        if m > self._shift:
            rescale = np.exp(self._shift - m) if self._shift > -np.inf else 0.0
            self._num *= rescale
            self._den *= rescale
            self._shift = m
        w = np.exp(log_w - self._shift)
        self._num += float(np.sum(np.where(finite, values * w, 0.0)))
        self._den += float(np.sum(w))

    def value(self) -> float:
        if self._den == 0.0:
            return np.nan
        return self._num / self._den


class _StateObserver:
    """Accumulates localized weighted means of state functions."""

    def __init__(self, functions: Sequence[StateFunction], dims: SpatPompDims):
        self.functions = functions
        self.dims = dims
        self.reducers = [[_WeightedMeanReducer() for _ in range(dims.n_times)]
                         for _ in functions]

    def start_chunk(self, c: int) -> None:
        self._accs = [GammaAccumulator(sf.neighborhood, self.dims, c)
                      for sf in self.functions]

    def step(self, n: int, lw: np.ndarray, pool: np.ndarray) -> None:
        for k, sf in enumerate(self.functions):
            acc = self._accs[k]
            acc.observe(n, lw)
            lag_sum = acc.emit_lag_sum(n)[:, sf.anchor_unit - 1]
            cur = current_member_sums(lw, sf.neighborhood, n, self.dims)
            log_wf = lag_sum[:, None] + cur[:, :, sf.anchor_unit - 1]
            vals = np.asarray(sf.fn(pool), dtype=float)
            self.reducers[k][n - 1].add(log_wf, vals)

    def end_chunk(self) -> None:
        self._accs = None

    def finish(self) -> np.ndarray:
        out = np.empty((len(self.functions), self.dims.n_times))
        for k in range(len(self.functions)):
            for n in range(self.dims.n_times):
                out[k, n] = self.reducers[k][n].value()
        return out


def bagged_state_estimate(model: SpatPompModel, data, config: BaggedConfig,
                          functions: Sequence[StateFunction],
                          mode: str = None) -> np.ndarray:
    """Filtered expectations of latent-state functions under a bagged filter.

    Returns an (F, N) array whose (k, n) entry estimates
    E[functions[k].fn(X_n) | data on functions[k].neighborhood], using the
    same replicate machinery as the likelihood filters: values are averaged
    over the weighting pool with weights localized on each function's
    neighborhood.

    ``mode`` defaults to the variant implied by the config: unadapted for
    one particle, adapted otherwise, guided when ``n_intermediate`` > 1.
    """
    y = check_data(data, model.dims)
    if mode is None:
        if config.n_intermediate > 1:
            mode = "abfir"
        elif config.n_particles > 1:
            mode = "abf"
        else:
            mode = "ubf"
    diag = Diagnostics()
    obs = _StateObserver(functions, model.dims)
    _sweep(model, y, config, mode, obs, diag)
    return obs.finish()
