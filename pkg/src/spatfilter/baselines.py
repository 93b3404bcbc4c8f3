"""Comparison filters: exact Kalman, bootstrap PF, block PF, EnKF, GIRF.

These are the single-ensemble algorithms every experiment compares the
bagged filters against.  The Kalman filter is exact on linear-Gaussian
models and serves as the likelihood oracle; the particle filter exhibits
the dimensional collapse the bagged filters are designed to avoid; the
block particle filter and the ensemble Kalman filter are the scalable
alternatives; the guided intermediate resampling filter shares the bagged
module's simulated-moment guide machinery but runs one global particle
population.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import linalg as sla

from .core.errors import (
    ConfigurationError,
    DegenerateWeightsError,
    SingularInnovationError,
)
from .core.model import SpatPompModel
from .core.resampling import resample_indices
from .core.rng import Purpose, rng_substream
from .core.validation import check_data, check_positive_int
from .core.weights import (
    LOGLIK_FLOOR,
    Diagnostics,
    LoglikResult,
    log_mean_exp,
)

__all__ = [
    "LinearGaussianSystem",
    "KalmanResult",
    "kalman_loglik",
    "BlockPartition",
    "pf_loglik",
    "pf_filter_means",
    "bpf_loglik",
    "EnkfResult",
    "enkf_loglik",
    "girf_loglik",
]


# ---------------------------------------------------------------------------
# Exact Kalman filter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearGaussianSystem:
    """x' = F x + N(0, Q); y = H x + N(0, R); x_0 ~ N(x0, P0)."""

    F: np.ndarray
    Q: np.ndarray
    H: np.ndarray
    R: np.ndarray
    x0: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        for name in ("F", "Q", "H", "R", "x0", "P0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        dim = self.F.shape[0]
        obs = self.H.shape[0]
        if self.F.shape != (dim, dim) or self.Q.shape != (dim, dim):
            raise ConfigurationError("F and Q must be square and consistent")
        if self.H.shape != (obs, dim) or self.R.shape != (obs, obs):
            raise ConfigurationError("H and R dimensions are inconsistent")
        if self.x0.shape != (dim,) or self.P0.shape != (dim, dim):
            raise ConfigurationError("x0 / P0 dimensions are inconsistent")
        for name in ("Q", "R", "P0"):
            mat = getattr(self, name)
            if not np.allclose(mat, mat.T, atol=1e-10):
                raise ConfigurationError("%s must be symmetric" % name)

    @staticmethod
    def from_dict(mats: dict) -> "LinearGaussianSystem":
        return LinearGaussianSystem(**mats)


@dataclass
class KalmanResult:
    total: float
    time_logliks: np.ndarray
    filter_means: np.ndarray
    filter_covs: np.ndarray


def _mvn_logpdf_chol(resid: np.ndarray, cov: np.ndarray) -> float:
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError(str(exc)) from exc
    solved = sla.solve_triangular(chol, resid, lower=True)
    half_logdet = float(np.sum(np.log(np.diag(chol))))
    k = resid.size
    return float(-0.5 * (k * np.log(2.0 * np.pi) + solved @ solved) - half_logdet)


def kalman_loglik(system: LinearGaussianSystem, data) -> KalmanResult:
    """Exact filtering pass over a linear-Gaussian system.

    ``data`` is (obs_dim, N).  Returns the total log-likelihood, per-time
    innovations log-densities, and the filtered means and covariances.
    The covariance update uses the Joseph form for symmetry retention.
    """
    y = np.asarray(data, dtype=float)
    obs_dim, n_times = y.shape
    if obs_dim != system.H.shape[0]:
        raise ConfigurationError("data rows do not match the observation dim")
    dim = system.F.shape[0]
    x = system.x0.copy()
    p = system.P0.copy()
    eye = np.eye(dim)
    time_ll = np.empty(n_times)
    means = np.empty((n_times, dim))
    covs = np.empty((n_times, dim, dim))
    for n in range(n_times):
        x = system.F @ x
        p = system.F @ p @ system.F.T + system.Q
        resid = y[:, n] - system.H @ x
        innov = system.H @ p @ system.H.T + system.R
        time_ll[n] = _mvn_logpdf_chol(resid, innov)
        gain = np.linalg.solve(innov.T, (p @ system.H.T).T).T
        x = x + gain @ resid
        imkh = eye - gain @ system.H
        p = imkh @ p @ imkh.T + gain @ system.R @ gain.T
        means[n] = x
        covs[n] = p
    return KalmanResult(total=float(time_ll.sum()), time_logliks=time_ll,
                        filter_means=means, filter_covs=covs)


# ---------------------------------------------------------------------------
# Bootstrap and block particle filters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockPartition:
    """Ordered disjoint unit blocks covering 1..U (1-based unit indices)."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(int(u) for u in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        seen = [u for b in blocks for u in b]
        if sorted(seen) != list(range(1, len(seen) + 1)):
            raise ConfigurationError("blocks must exactly cover 1..U")

    @staticmethod
    def contiguous(n_units: int, block_size: int) -> "BlockPartition":
        """Contiguous blocks of ``block_size``; the final block may be short."""
        if block_size < 1:
            raise ConfigurationError("block size must be >= 1")
        blocks = [tuple(range(lo + 1, min(lo + block_size, n_units) + 1))
                  for lo in range(0, n_units, block_size)]
        return BlockPartition(blocks=tuple(blocks))

    @property
    def n_units(self) -> int:
        return sum(len(b) for b in self.blocks)


def _block_pf_run(model: SpatPompModel, y, n_particles: int,
                  partition: BlockPartition, seed: int, resample_scheme: str,
                  loglik_floor: float,
                  state_functions: Optional[Sequence[Callable]] = None):
    dims = model.dims
    diag = Diagnostics()
    j = check_positive_int(n_particles, "n_particles")
    idx_blocks = [np.asarray(b, dtype=np.intp) - 1 for b in partition.blocks]
    x = model.simulate_initial(
        rng_substream(seed, time_index=0, purpose=Purpose.INIT), size=(j,))
    time_ll = np.empty(dims.n_times)
    f_means = None
    if state_functions is not None:
        f_means = np.empty((len(state_functions), dims.n_times))
    for n in range(1, dims.n_times + 1):
        x = model.reset_observed(x)
        x = model.simulate_transition(
            x, dims.obs_times[n - 1], dims.obs_times[n],
            rng_substream(seed, time_index=n, purpose=Purpose.PROPOSE))
        lw = model.measurement_logdensity(n, y[:, n - 1], x)
        new_x = np.empty_like(x)
        ll_n = 0.0
        for b, block in enumerate(idx_blocks):
            block_lw = lw[:, block].sum(axis=1)
            contrib = log_mean_exp(block_lw)
            if not np.isfinite(contrib):
                contrib = loglik_floor
                diag.floor_events += 1
            ll_n += contrib
            rng = rng_substream(seed, time_index=n, purpose=Purpose.RESAMPLE,
                                lane=b)
            try:
                idx = resample_indices(block_lw, resample_scheme, rng)
            except DegenerateWeightsError:
                diag.degenerate_weight_events += 1
                idx = rng.integers(0, j, size=j)
            new_x[:, block] = x[np.ix_(idx, block)]
        if state_functions is not None:
            joint = lw.sum(axis=1)
            shift = joint.max()
            if shift == -np.inf:
                f_means[:, n - 1] = np.nan
            else:
                w = np.exp(joint - shift)
                w /= w.sum()
                for kf, fn in enumerate(state_functions):
                    f_means[kf, n - 1] = float(np.sum(fn(x) * w))
        time_ll[n - 1] = ll_n
        x = new_x
    result = LoglikResult(total=float(time_ll.sum()), time_logliks=time_ll,
                          diagnostics=diag)
    return result, f_means


def pf_loglik(model: SpatPompModel, data, n_particles: int, seed: int = 0,
              resample_scheme: str = "systematic",
              loglik_floor: float = LOGLIK_FLOOR) -> LoglikResult:
    """Bootstrap particle filter with joint weights across all units.

    Identical, draw for draw, to the block particle filter run with a single
    block containing every unit.
    """
    y = check_data(data, model.dims)
    partition = BlockPartition.contiguous(model.dims.n_units,
                                          model.dims.n_units)
    result, _ = _block_pf_run(model, y, n_particles, partition, seed,
                              resample_scheme, loglik_floor)
    return result


def pf_filter_means(model: SpatPompModel, data, n_particles: int,
                    state_functions: Sequence[Callable], seed: int = 0,
                    resample_scheme: str = "systematic",
                    loglik_floor: float = LOGLIK_FLOOR):
    """Particle-filter means of state functions, plus the loglik estimate.

    Functions receive the particle batch (J, U, d) and return (J,); their
    filtered means use the pre-resampling weights at each time.
    """
    y = check_data(data, model.dims)
    partition = BlockPartition.contiguous(model.dims.n_units,
                                          model.dims.n_units)
    result, means = _block_pf_run(model, y, n_particles, partition, seed,
                                  resample_scheme, loglik_floor,
                                  state_functions=state_functions)
    return means, result


def bpf_loglik(model: SpatPompModel, data, n_particles: int,
               partition: BlockPartition, seed: int = 0,
               resample_scheme: str = "systematic",
               loglik_floor: float = LOGLIK_FLOOR) -> LoglikResult:
    """Block particle filter: blocks are weighted and resampled independently.

    Particles are propagated jointly (global dynamics), then each block's
    coordinates are resampled by the product of that block's unit
    measurement weights; per-time conditional log-likelihood contributions
    sum the per-block log mean weights.
    """
    y = check_data(data, model.dims)
    if partition.n_units != model.dims.n_units:
        raise ConfigurationError("partition does not cover the model's units")
    result, _ = _block_pf_run(model, y, n_particles, partition, seed,
                              resample_scheme, loglik_floor)
    return result


# ---------------------------------------------------------------------------
# Ensemble Kalman filter
# ---------------------------------------------------------------------------

@dataclass
class EnkfResult:
    total: float
    time_logliks: np.ndarray
    filter_means: np.ndarray
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


def enkf_update(flat: np.ndarray, y_pred: np.ndarray, y_obs: np.ndarray,
                r_diag: np.ndarray, noise: np.ndarray, innov_cov=None):
    """Perturbed-observation linear update of a flattened ensemble.

    ``flat`` is (M, state_dim), ``y_pred`` the predicted measurements (M, U),
    ``noise`` standard normals (M, U) scaled by the measurement standard
    deviations.  ``innov_cov`` may supply an externally regularized
    innovation covariance.  Returns (updated ensemble, gain, perturbed
    innovations); by construction the updated mean equals the forecast mean
    plus the gain applied to the mean perturbed innovation.
    """
    m = flat.shape[0]
    y_bar = y_pred.mean(axis=0)
    anom_y = y_pred - y_bar
    if innov_cov is None:
        innov_cov = anom_y.T @ anom_y / (m - 1) + np.diag(r_diag)
    anom_x = flat - flat.mean(axis=0)
    p_xy = anom_x.T @ anom_y / (m - 1)
    gain = np.linalg.solve(innov_cov.T, p_xy.T).T
    innovations = y_obs + noise * np.sqrt(r_diag) - y_pred
    return flat + innovations @ gain.T, gain, innovations


def enkf_loglik(model: SpatPompModel, data, n_ensemble: int,
                seed: int = 0) -> EnkfResult:
    """Stochastic (perturbed-observation) ensemble Kalman filter.

    Forecasts by simulation, forms the sample moments of the predicted
    measurements h(X), takes the measurement noise covariance as the
    diagonal of the model's measurement variance at the ensemble mean
    state, and applies the perturbed-observation linear update.  The
    likelihood accumulates Gaussian predictive densities of the data under
    the sampled innovation moments.
    """
    dims = model.dims
    y = check_data(data, dims)
    m = check_positive_int(n_ensemble, "n_ensemble", minimum=2)
    diag = Diagnostics()
    x = model.simulate_initial(
        rng_substream(seed, time_index=0, purpose=Purpose.INIT), size=(m,))
    time_ll = np.empty(dims.n_times)
    filter_means = np.empty((dims.n_times, dims.n_units, model.state_dim))
    for n in range(1, dims.n_times + 1):
        x = model.reset_observed(x)
        x = model.simulate_transition(
            x, dims.obs_times[n - 1], dims.obs_times[n],
            rng_substream(seed, time_index=n, purpose=Purpose.PROPOSE))
        y_pred = model.measurement_mean(n, x)
        y_bar = y_pred.mean(axis=0)
        anom_y = y_pred - y_bar
        p_yy = anom_y.T @ anom_y / (m - 1)
        mean_state = x.mean(axis=0, keepdims=True)
        r_diag = np.maximum(model.measurement_var(n, mean_state)[0], 0.0)
        innov_cov = p_yy + np.diag(r_diag)
        resid = y[:, n - 1] - y_bar
        try:
            time_ll[n - 1] = _mvn_logpdf_chol(resid, innov_cov)
        except SingularInnovationError:
            ridge = 1e-8 * np.trace(innov_cov) / dims.n_units + 1e-300
            innov_cov = innov_cov + ridge * np.eye(dims.n_units)
            diag.var_clamp_events += 1
            time_ll[n - 1] = _mvn_logpdf_chol(resid, innov_cov)
        noise = rng_substream(seed, time_index=n, purpose=Purpose.MEASURE) \
            .standard_normal((m, dims.n_units))
        flat, _, _ = enkf_update(x.reshape(m, -1), y_pred, y[:, n - 1],
                                 r_diag, noise, innov_cov=innov_cov)
        x = model.constrain_state(flat.reshape(x.shape))
        filter_means[n - 1] = x.mean(axis=0)
    return EnkfResult(total=float(time_ll.sum()), time_logliks=time_ll,
                      filter_means=filter_means, diagnostics=diag)


# ---------------------------------------------------------------------------
# Guided intermediate resampling filter
# ---------------------------------------------------------------------------

def _girf_guide_terms(model, x, t_now, window, v_by_time, t_window_start,
                      y, diag: Diagnostics):
    """Sum of moment-matched guide log-densities over a lookahead window.

    ``window`` lists observation indices m > current position whose guide
    terms multiply the running guide value; each term discounts the
    simulated process variance linearly between the window start and the
    observation time.
    """
    total = np.zeros(x.shape[0])
    for m in window:
        t_obs = model.dims.obs_times[m]
        mu = model.forecast_mean(x, t_now, t_obs)
        v_meas = model.measurement_var(m, mu)
        discount = (t_obs - t_now) / (t_obs - t_window_start)
        v_total = v_meas + discount * v_by_time[m][None, :]
        floor = model.guide_var_floor(m, mu)
        clipped = int(np.count_nonzero(v_total < floor))
        if clipped:
            diag.var_clamp_events += clipped
            v_total = np.maximum(v_total, floor)
        scale = model.var_to_theta(m, v_total, mu)
        total += model.measurement_logdensity(m, y[:, m - 1], mu,
                                              scale=scale).sum(axis=-1)
    return total


def girf_loglik(model: SpatPompModel, data, n_particles: int,
                n_guide: int = 30, lookahead: int = 1, n_intermediate: int = 1,
                seed: int = 0, resample_scheme: str = "systematic",
                loglik_floor: float = LOGLIK_FLOOR,
                return_substeps: bool = False):
    """Guided intermediate resampling filter over one global population.

    Each observation interval is split into ``n_intermediate`` substeps; at
    every substep, particles are weighted by the ratio of guide values
    evaluated over a ``lookahead``-observation window (simulated-moment
    guide, as in the bagged module) and resampled.  Crossing an observation
    time multiplies the exact measurement density into the weight and hands
    the running guide value over to the next window, so the per-interval
    products of mean weight ratios telescope into conditional likelihood
    contributions.
    """
    dims = model.dims
    y = check_data(data, dims)
    if not model.supports_guide():
        raise ConfigurationError("model does not implement the guide contract")
    j = check_positive_int(n_particles, "n_particles")
    n_steps = check_positive_int(n_intermediate, "n_intermediate")
    lookahead = check_positive_int(lookahead, "lookahead")
    k_guide = min(check_positive_int(n_guide, "n_guide", minimum=2), j)
    diag = Diagnostics()
    x = model.simulate_initial(
        rng_substream(seed, time_index=0, purpose=Purpose.INIT), size=(j,))
    log_guide_run = np.zeros(j)
    time_ll = np.zeros(dims.n_times)
    substep_means: List[List[float]] = []
    for n in range(1, dims.n_times + 1):
        t0, t1 = dims.obs_times[n - 1], dims.obs_times[n]
        horizon = min(n + lookahead, dims.n_times)
        # Forecast-variance estimates for every observation the windows can
        # touch during this interval, from guide simulations launched at the
        # current particle states.
        xg = x[:k_guide]
        v_by_time = {}
        for m in range(n, horizon + 1):
            xg = model.reset_observed(xg)
            xg = model.simulate_transition(
                xg, dims.obs_times[m - 1], dims.obs_times[m],
                rng_substream(seed, time_index=n, purpose=Purpose.GUIDE,
                              lane=m - n))
            h_vals = model.measurement_mean(m, xg)
            v_by_time[m] = h_vals.var(axis=0, ddof=1)
        x = model.reset_observed(x)
        grid = t0 + (t1 - t0) * np.arange(n_steps + 1) / n_steps
        sub_means = []
        for s in range(1, n_steps + 1):
            x = model.simulate_transition(
                x, grid[s - 1], grid[s],
                rng_substream(seed, time_index=n, purpose=Purpose.PROPOSE,
                              lane=s))
            if s < n_steps:
                window = [m for m in range(n, min(n + lookahead - 1, horizon) + 1)]
                log_guide = _girf_guide_terms(model, x, grid[s], window,
                                              v_by_time, t0, y, diag)
                log_next = None
            else:
                exact = model.measurement_logdensity(n, y[:, n - 1],
                                                     x).sum(axis=-1)
                window = [m for m in range(n + 1, horizon + 1)]
                log_next = _girf_guide_terms(model, x, t1, window, v_by_time,
                                             t0, y, diag)
                log_guide = exact + log_next
            log_ratio = log_guide - log_guide_run
            contrib = log_mean_exp(log_ratio)
            if not np.isfinite(contrib):
                contrib = loglik_floor
                diag.floor_events += 1
            sub_means.append(float(contrib))
            time_ll[n - 1] += contrib
            rng = rng_substream(seed, time_index=n, purpose=Purpose.RESAMPLE,
                                lane=s)
            try:
                idx = resample_indices(log_ratio, resample_scheme, rng)
            except DegenerateWeightsError:
                diag.degenerate_weight_events += 1
                idx = rng.integers(0, j, size=j)
            x = x[idx]
            log_guide_run = (log_guide if log_next is None else log_next)[idx]
        substep_means.append(sub_means)
    result = LoglikResult(total=float(time_ll.sum()), time_logliks=time_ll,
                          diagnostics=diag)
    if return_substeps:
        return result, np.asarray(substep_means)
    return result
