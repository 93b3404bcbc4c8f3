"""Likelihood maximization, slices, profiles and adjusted intervals.

Maximization follows the iterated-filtering recipe: run the adapted bagged
filter on a model whose parameters take a random-walk perturbation at every
time step, select the best-scoring parameter vectors time point by time
point, and shrink the perturbation geometrically across iterations.  Slices
and profiles drive repeated filter evaluations over a parameter grid, and
profile curves get Monte-Carlo-adjusted confidence intervals from a local
quadratic fit widened by the estimated evaluation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from .bagged import BaggedConfig, GammaAccumulator
from .core.errors import ConfigurationError, SpatFilterError
from .core.rng import Purpose, derive_seed, rng_substream
from .core.validation import check_positive_int, check_probability
from .core.weights import log_sum_exp

__all__ = [
    "IabfConfig",
    "IabfResult",
    "iabf_maximize",
    "ProfilePoint",
    "run_slice",
    "run_profile",
    "McapInterval",
    "mcap_interval",
]


@dataclass(frozen=True)
class IabfConfig:
    """Settings of the iterated adapted bagged filter.

    ``perturb_sd`` maps parameter names to perturbation standard deviations
    on the unconstrained scale; parameters absent from it (or listed in
    ``fixed_params``) are never perturbed.  ``cooling`` is the variance
    reduction factor reached after 50 iterations; ``resample_prop`` is the
    fraction of parameter vectors kept at each selection.
    """

    n_iterations: int
    n_param_sets: int
    perturb_sd: Dict[str, float]
    cooling: float = 0.5
    resample_prop: float = 0.5
    fixed_params: frozenset = frozenset()

    def __post_init__(self):
        check_positive_int(self.n_iterations, "n_iterations")
        check_positive_int(self.n_param_sets, "n_param_sets")
        check_probability(self.resample_prop, "resample_prop",
                          open_right=False)
        if math.ceil(self.resample_prop * self.n_param_sets) < 1:
            raise ConfigurationError("resample_prop keeps no parameter vectors")
        for name, sd in self.perturb_sd.items():
            if sd < 0:
                raise ConfigurationError("negative perturbation sd for %r" % name)


@dataclass
class IabfResult:
    """Final parameter vectors and the per-iteration search trace."""

    params: List[dict]
    best_params: dict
    iteration_logliks: np.ndarray


def _identity_transforms(names):
    return {name: (lambda x: x, lambda x: x) for name in names}


def _vector_resample_one(log_joint: np.ndarray, scheme: str,
                         rng: np.random.Generator) -> np.ndarray:
    """One surviving index per replicate row, vectorized over rows.

    ``log_joint`` is (R, J).  Rows whose weights all vanish fall back to a
    uniform draw.  The maximization loop keys one stream per (parameter
    vector, time), so the per-row draws come from a single generator.
    """
    r, j = log_joint.shape
    shift = log_joint.max(axis=1, keepdims=True)
    ok = np.isfinite(shift[:, 0])
    w = np.exp(log_joint - np.where(ok[:, None], shift, 0.0))
    w[~ok] = 1.0
    cum = np.cumsum(w, axis=1)
    total = cum[:, -1]
    if scheme == "multinomial":
        u = rng.random(r)
    else:
        offset = rng.random(r)
        turn = rng.integers(0, j, size=r)
        u = (offset + (j - turn) % j) / j
    idx = (cum < (u * total)[:, None]).sum(axis=1)
    return np.minimum(idx, j - 1), int((~ok).sum())


def iabf_maximize(model_family: Callable[[dict], object], data,
                  filter_config: BaggedConfig, config: IabfConfig,
                  start_params: Sequence[dict],
                  transforms: Optional[dict] = None) -> IabfResult:
    """Maximize the likelihood by iterated adapted bagged filtering.

    ``model_family`` maps a parameter dict to a model; ``start_params`` is
    one dict (replicated) or one per parameter vector.  Perturbations act on
    the transformed scale given by ``transforms`` (name -> (to, from) pair;
    identity when omitted).  Returns the final vectors, the best final
    vector, and per-iteration best running log-likelihood sums.
    """
    k_sets = config.n_param_sets
    if isinstance(start_params, dict):
        start_params = [dict(start_params)] * k_sets
    if len(start_params) != k_sets:
        raise ConfigurationError("need one start vector or one per set")
    names = sorted(start_params[0].keys())
    free = [p for p in names
            if p in config.perturb_sd and p not in config.fixed_params
            and config.perturb_sd[p] > 0]
    tf = dict(_identity_transforms(names))
    tf.update(transforms or {})

    y = np.asarray(data, dtype=float)
    r = filter_config.n_replicates
    n_particles = filter_config.n_particles
    seed = filter_config.seed
    nb = filter_config.neighborhood
    probe = model_family(start_params[0])
    dims = probe.dims
    n_sel = math.ceil(config.resample_prop * k_sets)
    copy_map = np.array([math.ceil(config.resample_prop * k) - 1
                         for k in range(1, k_sets + 1)], dtype=np.intp)

    # Parameter state on the transformed scale, (K, P_free).
    theta_free = np.array([[tf[p][0](sp[p]) for p in free]
                           for sp in start_params])
    fixed_values = [{p: sp[p] for p in names if p not in free}
                    for sp in start_params]
    sd_base = np.array([config.perturb_sd[p] for p in free])

    iter_best = np.empty(config.n_iterations)
    for m in range(1, config.n_iterations + 1):
        cool = config.cooling ** (m / 50.0)
        lane_base = m * (k_sets + 1)
        states = None
        accs = [GammaAccumulator(nb, dims, r) for _ in range(k_sets)]
        best_sum = 0.0
        for n in range(1, dims.n_times + 1):
            ll_nk = np.empty(k_sets)
            new_states = [None] * k_sets
            for k in range(k_sets):
                # Streams are keyed per (iteration, parameter vector, time):
                # replicates inside one parameter vector's filter draw from
                # a single whole-population stream.
                if free:
                    prng = rng_substream(seed, replicate=m, time_index=n,
                                         purpose=Purpose.PARAM, lane=k)
                    theta_free[k] = theta_free[k] + cool * sd_base \
                        * prng.standard_normal(len(free))
                theta_k = dict(fixed_values[k])
                theta_k.update({p: tf[p][1](v)
                                for p, v in zip(free, theta_free[k])})
                model = model_family(theta_k)
                if states is None:
                    x = model.simulate_initial(
                        rng_substream(seed, replicate=m, time_index=0,
                                      purpose=Purpose.INIT,
                                      lane=lane_base + k), size=(r,))
                else:
                    x = states[k]
                x = model.reset_observed(x)
                pool = np.repeat(x[:, None, ...], n_particles, axis=1)
                pool = model.simulate_transition(
                    pool, dims.obs_times[n - 1], dims.obs_times[n],
                    rng_substream(seed, replicate=m, time_index=n,
                                  purpose=Purpose.PROPOSE,
                                  lane=lane_base + k))
                lw = model.measurement_logdensity(n, y[:, n - 1], pool)
                if n_particles > 1:
                    rng = rng_substream(seed, replicate=m, time_index=n,
                                        purpose=Purpose.RESAMPLE,
                                        lane=lane_base + k)
                    keep, _ = _vector_resample_one(
                        lw.sum(axis=2), filter_config.resample_scheme, rng)
                    x = pool[np.arange(r), keep]
                else:
                    x = pool[:, 0]
                new_states[k] = x
                acc = accs[k]
                acc.observe(n, lw)
                log_num, log_den = acc.emit(n)
                top = log_sum_exp(log_num, axis=0)
                bot = log_sum_exp(log_den, axis=0)
                with np.errstate(invalid="ignore"):
                    ll_un = top - bot
                ll_un = np.where(np.isfinite(ll_un), ll_un,
                                 filter_config.loglik_floor)
                ll_nk[k] = float(ll_un.sum())
            # Rank descending, lower index wins ties; keep the top block and
            # copy each kept vector into its ceil(1/p) slots.
            order = np.lexsort((np.arange(k_sets), -ll_nk))
            sel = order[:n_sel]
            assign = sel[copy_map]
            theta_free = theta_free[assign].copy()
            fixed_values = [dict(fixed_values[a]) for a in assign]
            states = [new_states[a].copy() for a in assign]
            accs = [accs[a].clone() for a in assign]
            best_sum += float(ll_nk[order[0]])
        iter_best[m - 1] = best_sum
    final = []
    for k in range(k_sets):
        theta_k = dict(fixed_values[k])
        theta_k.update({p: tf[p][1](v) for p, v in zip(free, theta_free[k])})
        final.append(theta_k)
    return IabfResult(params=final, best_params=final[0],
                      iteration_logliks=iter_best)


# ---------------------------------------------------------------------------
# Slices and profiles
# ---------------------------------------------------------------------------

@dataclass
class ProfilePoint:
    profiled_value: float
    loglik: float
    mc_se: float
    argmax_params: dict = field(default_factory=dict)
    error: Optional[str] = None


def _value_key(value: float):
    """Stable 32-bit words of a float, for order-independent seed derivation."""
    bits = int(np.float64(value).view(np.uint64))
    return bits >> 32, bits & 0xFFFFFFFF


def run_slice(model_family: Callable[[dict], object], data, param_name: str,
              grid: Sequence[float], evaluate: Callable[[object, np.ndarray, int], float],
              base_params: dict, replications: int = 2,
              seed: int = 0) -> List[ProfilePoint]:
    """Evaluate the likelihood along one parameter axis.

    ``evaluate(model, data, run_seed)`` returns a log-likelihood estimate;
    it runs ``replications`` times per grid value with seeds derived from
    (seed, grid value, replication), so results do not depend on grid
    evaluation order.  Errors are recorded per point without aborting the
    grid.
    """
    if len(grid) == 0:
        raise ConfigurationError("empty slice grid")
    check_positive_int(replications, "replications")
    points = []
    y = np.asarray(data, dtype=float)
    for value in grid:
        params = dict(base_params)
        params[param_name] = float(value)
        hi, lo = _value_key(value)
        try:
            model = model_family(params)
            vals = np.array([
                evaluate(model, y, derive_seed(seed, 101, hi, lo, rep))
                for rep in range(replications)])
            mc_se = float(vals.std(ddof=1) / np.sqrt(replications)) \
                if replications > 1 else 0.0
            points.append(ProfilePoint(profiled_value=float(value),
                                       loglik=float(vals.mean()),
                                       mc_se=mc_se, argmax_params=params))
        except SpatFilterError as exc:
            points.append(ProfilePoint(profiled_value=float(value),
                                       loglik=float("nan"), mc_se=float("nan"),
                                       argmax_params=params, error=str(exc)))
    return points


def run_profile(model_family: Callable[[dict], object], data, param_name: str,
                grid: Sequence[float], filter_config: BaggedConfig,
                iabf_config: IabfConfig, start_params: dict,
                evaluate: Callable[[object, np.ndarray, int], float],
                transforms: Optional[dict] = None, replications: int = 2,
                seed: int = 0) -> List[ProfilePoint]:
    """Profile likelihood: maximize the nuisance parameters per grid value."""
    if len(grid) == 0:
        raise ConfigurationError("empty profile grid")
    points = []
    y = np.asarray(data, dtype=float)
    for value in grid:
        params = dict(start_params)
        params[param_name] = float(value)
        cfg = replace(iabf_config,
                      fixed_params=frozenset(iabf_config.fixed_params)
                      | {param_name})
        hi, lo = _value_key(value)
        fc = filter_config.updated(seed=derive_seed(seed, 202, hi, lo))
        try:
            fit = iabf_maximize(model_family, y, fc, cfg, params,
                                transforms=transforms)
            best = fit.best_params
            model = model_family(best)
            vals = np.array([
                evaluate(model, y, derive_seed(seed, 303, hi, lo, rep))
                for rep in range(replications)])
            mc_se = float(vals.std(ddof=1) / np.sqrt(replications)) \
                if replications > 1 else 0.0
            points.append(ProfilePoint(profiled_value=float(value),
                                       loglik=float(vals.mean()),
                                       mc_se=mc_se, argmax_params=best))
        except SpatFilterError as exc:
            points.append(ProfilePoint(profiled_value=float(value),
                                       loglik=float("nan"), mc_se=float("nan"),
                                       argmax_params=params, error=str(exc)))
    return points


# ---------------------------------------------------------------------------
# Monte Carlo adjusted intervals
# ---------------------------------------------------------------------------

@dataclass
class McapInterval:
    """Confidence interval from a smoothed profile curve.

    ``coefficients`` holds (c0, c1, c2) of the fitted quadratic; the
    interval is the set where the curve stays within ``cutoff`` of its
    maximum.  ``unbounded`` flags a fit too flat or non-concave to invert.
    """

    lo: float
    hi: float
    cutoff: float
    argmax: float
    max_value: float
    coefficients: tuple
    unbounded: bool = False

    def smoothed(self, g):
        c0, c1, c2 = self.coefficients
        g = np.asarray(g, dtype=float)
        return c0 + c1 * g + c2 * g * g


def _wls_quadratic(g, ll, weights, mc_se):
    x = np.stack([np.ones_like(g), g, g * g], axis=1)
    w = np.asarray(weights, dtype=float)
    xtwx = x.T @ (w[:, None] * x)
    xtwy = x.T @ (w * ll)
    try:
        beta = np.linalg.solve(xtwx, xtwy)
        inv = np.linalg.inv(xtwx)
    except np.linalg.LinAlgError:
        return None, None
    resid = ll - x @ beta
    n_pts = len(g)
    dof = max(n_pts - 3, 1)
    s2 = float(np.sum(w * resid ** 2) / np.sum(w)) * n_pts / dof
    sigma = mc_se ** 2 + s2
    meat = x.T @ ((w ** 2 * sigma)[:, None] * x)
    cov = inv @ meat @ inv
    return beta, cov


def mcap_interval(points: Sequence[ProfilePoint],
                  confidence: float = 0.95) -> McapInterval:
    """Monte-Carlo-adjusted interval from profile points.

    Fits a tricube-weighted quadratic over the span of points whose
    log-likelihood falls in the top half, takes the chi-square cutoff at
    ``confidence`` inflated by the estimated Monte Carlo error of the curve
    at its maximum, and inverts the quadratic.  A non-concave fit widens the
    span once to all points and otherwise reports an unbounded interval.
    """
    pts = [p for p in points if np.isfinite(p.loglik)]
    if len(pts) < 5:
        raise ConfigurationError("need at least 5 finite profile points")
    check_probability(confidence, "confidence")
    g = np.array([p.profiled_value for p in pts])
    ll = np.array([p.loglik for p in pts])
    se = np.array([p.mc_se for p in pts])
    order = np.argsort(g)
    g, ll, se = g[order], ll[order], se[order]
    if np.ptp(ll) <= 1e-12 * max(1.0, float(np.max(np.abs(ll)))):
        return McapInterval(lo=float("-inf"), hi=float("inf"), cutoff=np.nan,
                            argmax=np.nan, max_value=np.nan,
                            coefficients=(float(np.mean(ll)), 0.0, 0.0),
                            unbounded=True)

    def fit(span_mask):
        gs, ls, ses = g[span_mask], ll[span_mask], se[span_mask]
        if len(gs) < 3 or np.ptp(gs) == 0:
            return None, None
        center = gs[np.argmax(ls)]
        h = np.max(np.abs(gs - center))
        if h == 0:
            return None, None
        tric = (1 - np.minimum(np.abs(gs - center) / h, 1.0) ** 3) ** 3
        tric = np.maximum(tric, 1e-6)
        return _wls_quadratic(gs, ls, tric, ses)

    top_half = ll >= np.median(ll)
    beta, cov = fit(top_half)
    if beta is None or beta[2] >= 0:
        beta, cov = fit(np.ones_like(ll, dtype=bool))
    if beta is None or beta[2] >= 0:
        return McapInterval(lo=float("-inf"), hi=float("inf"), cutoff=np.nan,
                            argmax=np.nan, max_value=np.nan,
                            coefficients=(np.nan, np.nan, np.nan),
                            unbounded=True)
    c0, c1, c2 = beta
    g_max = -c1 / (2 * c2)
    v = np.array([1.0, g_max, g_max ** 2])
    se_max = float(np.sqrt(max(v @ cov @ v, 0.0)))
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    cutoff = stats.chi2.ppf(confidence, df=1) / 2.0 + z * se_max
    half_width = math.sqrt(cutoff / -c2)
    y_max = c0 + c1 * g_max + c2 * g_max ** 2
    return McapInterval(lo=float(g_max - half_width),
                        hi=float(g_max + half_width),
                        cutoff=float(cutoff), argmax=float(g_max),
                        max_value=float(y_max),
                        coefficients=(float(c0), float(c1), float(c2)))
