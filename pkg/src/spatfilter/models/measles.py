"""Measles metapopulation model: coupled SEIR dynamics in U cities.

Each city's population splits into susceptible, exposed, infectious and
recovered compartments; infection pressure mixes within a city and, through
a gravity-weighted travel matrix, between cities.  Transmission is seasonal
(school term vs vacation), overdispersed through multiplicative gamma noise
on the transmission rate, and all compartment moves are integer events drawn
as competing-risk binomial thinnings on an Euler grid.  Reported cases are a
discretized-Gaussian count of the removals accumulated in each reporting
interval.

The per-unit latent state is (S, E, I, C) where C counts removals in the
current reporting interval and is reset at each interval start.  Recovered
counts are implicit: total city populations are treated as known.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from ..core.dims import SpatPompDims
from ..core.errors import ConfigurationError
from ..core.model import SpatPompModel
from ..core.rng import rng_substream, Purpose

__all__ = [
    "MeaslesParams",
    "Demographics",
    "MeaslesMetapop",
    "measles_seasonal_beta",
    "measles_gravity",
    "measles_transmission_rate",
    "measles_euler_step",
    "discretized_gaussian_logpmf",
    "load_demographics_csv",
    "load_case_csv",
]

# Log-density assigned to observations that are impossible under a
# zero-variance reporting distribution (roughly log of the smallest positive
# normal double); avoids a single -inf annihilating a whole weight pool.
ZERO_COUNT_LOG_FLOOR = -690.0

DAYS_PER_YEAR = 365.25

# School holiday ranges in day-of-year (inclusive), following the standard
# England and Wales term structure used for historical measles analyses:
# Christmas, Easter, summer, autumn half-term.
_HOLIDAYS = ((356, 366), (1, 6), (100, 115), (200, 251), (300, 307))


@dataclass(frozen=True)
class Demographics:
    """Per-city population sizes, birth rates and coordinates."""

    population: np.ndarray
    birth_rate: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "population", np.asarray(self.population, float))
        object.__setattr__(self, "birth_rate", np.asarray(self.birth_rate, float))
        object.__setattr__(self, "coords", np.asarray(self.coords, float))
        if self.population.ndim != 1:
            raise ConfigurationError("population must be a vector")
        if self.birth_rate.shape != self.population.shape:
            raise ConfigurationError("birth_rate shape mismatch")
        if self.coords.shape != (self.population.size, 2):
            raise ConfigurationError("coords must be (U, 2)")

    @property
    def n_cities(self) -> int:
        return self.population.size

    def distances(self) -> np.ndarray:
        d = self.coords[:, None, :] - self.coords[None, :, :]
        out = np.sqrt((d ** 2).sum(axis=-1))
        np.fill_diagonal(out, 0.0)
        return out

    @staticmethod
    def synthetic(n_cities: int, seed: int = 0,
                  largest_population: float = 3.4e6) -> "Demographics":
        """Rank-size city populations with seeded random coordinates.

        P_u is proportional to P_1 / u and births balance the emigration
        rate (population / 50 per year), keeping city sizes stationary.
        """
        ranks = np.arange(1, n_cities + 1, dtype=float)
        population = np.round(largest_population / ranks)
        birth_rate = population / 50.0
        rng = rng_substream(seed, purpose=Purpose.INIT, lane=9)
        coords = rng.uniform(0.0, 1000.0, size=(n_cities, 2))
        return Demographics(population=population, birth_rate=birth_rate,
                            coords=coords)


@dataclass(frozen=True)
class MeaslesParams:
    """Rates, measurement parameters and initial fractions.

    Time is measured in years; transition rates are per year.  The reporting
    interval is biweekly by default with 14 Euler substeps per interval.
    """

    mean_beta: float = 1560.6
    amplitude: float = 0.5
    school_fraction: float = 0.759
    alpha: float = 1.0
    iota: float = 0.0
    sigma_se: float = 0.15
    mu_ei: float = DAYS_PER_YEAR / 7.0
    mu_ir: float = DAYS_PER_YEAR / 7.0
    mu_death: float = 1.0 / 50.0
    rho_report: float = 0.5
    psi: float = 0.15
    gravity_g: float = 400.0
    birth_delay: float = 4.0
    s_frac: float = 0.032
    e_frac: float = 5e-5
    i_frac: float = 4e-5
    obs_interval: float = 1.0 / 26.0
    euler_substeps: int = 14

    def __post_init__(self):
        if not 0.0 < self.rho_report < 1.0:
            raise ConfigurationError("reporting probability must be in (0, 1)")
        if min(self.mean_beta, self.mu_ei, self.mu_ir, self.mu_death) <= 0:
            raise ConfigurationError("rates must be positive")
        if self.s_frac + self.e_frac + self.i_frac >= 1.0:
            raise ConfigurationError("initial fractions must sum below 1")


def measles_seasonal_beta(t: float, params: MeaslesParams) -> float:
    """Transmission rate at calendar time t (years): term time vs vacation."""
    day = int(np.floor((t % 1.0) * DAYS_PER_YEAR)) + 1
    holiday = any(lo <= day <= hi for lo, hi in _HOLIDAYS)
    a, p = params.amplitude, params.school_fraction
    if holiday:
        return (1.0 - a) * params.mean_beta
    return (1.0 + a * (1.0 - p) / p) * params.mean_beta


def measles_gravity(params: MeaslesParams, demographics: Demographics) -> np.ndarray:
    """Symmetric travel-volume matrix from the gravity rule.

    v[u, v] = G * (mean distance / mean population^2) * P_u P_v / d(u, v),
    zero diagonal.
    """
    pop = demographics.population
    dist = demographics.distances()
    n = demographics.n_cities
    if n == 1:
        return np.zeros((1, 1))
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] == 0.0):
        raise ConfigurationError("distinct cities must have nonzero distance")
    mean_dist = dist[off].mean()
    mean_pop = pop.mean()
    v = params.gravity_g * (mean_dist / mean_pop ** 2) \
        * np.outer(pop, pop) / np.where(off, dist, 1.0)
    v[~off] = 0.0
    return v


def measles_transmission_rate(state: np.ndarray, t: float,
                              params: MeaslesParams, pop: np.ndarray,
                              travel: np.ndarray):
    """Expected susceptible-to-exposed flow rate per city (persons / year).

    Returns ``(rate, n_clamped)`` where negative bracket values (possible
    when infection prevalence at home exceeds the travel-weighted average)
    are clamped at zero and counted.
    """
    s = state[..., 0]
    i = state[..., 2]
    frac_home = ((i + params.iota) / pop) ** params.alpha
    frac = (i / pop) ** params.alpha
    rowsum = travel.sum(axis=1)
    coupling = (frac @ travel.T - frac * rowsum) / pop
    bracket = frac_home + coupling
    n_clamped = int(np.count_nonzero(bracket < 0.0))
    bracket = np.maximum(bracket, 0.0)
    return measles_seasonal_beta(t, params) * s * bracket, n_clamped


def _split_exits(count, hazard_a, hazard_b, dt, rng):
    """Competing-risk thinning: total exits then a binomial split.

    Members leave a compartment of ``count`` individuals with probability
    1 - exp(-(hazard_a + hazard_b) dt); exits divide between the two causes
    proportionally to their hazards.
    """
    total_hazard = hazard_a + hazard_b
    p_exit = -np.expm1(-total_hazard * dt)
    exits = rng.binomial(count.astype(np.int64), np.clip(p_exit, 0.0, 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        frac_a = np.where(total_hazard > 0, hazard_a / np.where(total_hazard > 0, total_hazard, 1.0), 0.0)
    to_a = rng.binomial(exits, np.clip(frac_a, 0.0, 1.0))
    return to_a, exits - to_a


def measles_euler_step(state, t, dt, params, pop, travel, birth_rate, rng,
                       return_flows=False):
    """One Euler increment of the stochastic SEIR dynamics.

    ``state`` is (..., U, 4) holding integer-valued (S, E, I, C); the gamma
    noise multiplies the transmission rate with mean 1 and variance
    sigma_se^2 / dt.  Returns the new state (and the flow counts when
    ``return_flows``), with ``n_clamped`` negative-rate clamp events.
    """
    s = state[..., 0]
    e = state[..., 1]
    i = state[..., 2]
    c = state[..., 3]

    rate_se, n_clamped = measles_transmission_rate(state, t, params, pop, travel)
    with np.errstate(invalid="ignore", divide="ignore"):
        hazard_se = np.where(s > 0, rate_se / np.where(s > 0, s, 1.0), 0.0)
    if params.sigma_se > 0:
        shape = dt / params.sigma_se ** 2
        noise = rng.gamma(shape, params.sigma_se ** 2 / dt, size=s.shape)
        hazard_se = hazard_se * noise

    births = rng.poisson(np.broadcast_to(birth_rate * dt, s.shape))
    n_se, d_s = _split_exits(s, hazard_se, params.mu_death, dt, rng)
    n_ei, d_e = _split_exits(e, np.full(e.shape, params.mu_ei),
                             params.mu_death, dt, rng)
    n_ir, d_i = _split_exits(i, np.full(i.shape, params.mu_ir),
                             params.mu_death, dt, rng)

    out = np.empty_like(state)
    out[..., 0] = s + births - n_se - d_s
    out[..., 1] = e + n_se - n_ei - d_e
    out[..., 2] = i + n_ei - n_ir - d_i
    out[..., 3] = c + n_ir
    if return_flows:
        flows = {"births": births, "se": n_se, "ei": n_ei, "ir": n_ir,
                 "deaths": d_s + d_e + d_i}
        return out, n_clamped, flows
    return out, n_clamped


def discretized_gaussian_logpmf(y, mean, var):
    """log P[Y = y] for Y = the integer discretization of N(mean, var).

    P[Y = y] integrates the normal over (y - 1/2, y + 1/2], with the cell at
    y = 0 absorbing everything below 1/2.  Tail cells are evaluated through
    log-CDF differences so the result stays accurate far from the mean.
    A zero-variance distribution is a point mass at zero: log 1 for y = 0,
    a large negative floor otherwise.
    """
    y = np.asarray(y, dtype=float)
    mean, var = np.broadcast_arrays(np.asarray(mean, float), np.asarray(var, float))
    y = np.broadcast_to(y, mean.shape)

    degenerate = var <= 0.0
    sd = np.sqrt(np.where(degenerate, 1.0, var))
    # Clipped so z**2 stays finite; the density is indistinguishable from
    # 0 or 1 far earlier.
    za = np.clip((y - 0.5 - mean) / sd, -3e8, 3e8)
    zb = np.clip((y + 0.5 - mean) / sd, -3e8, 3e8)

    lo_zero = y <= 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_cdf_b = special.log_ndtr(zb)
        log_cdf_a = special.log_ndtr(za)
        log_sf_b = special.log_ndtr(-zb)
        log_sf_a = special.log_ndtr(-za)
        # Left tail and center: P = Phi(zb) - Phi(za).
        left = log_cdf_b + np.log1p(-np.exp(np.minimum(log_cdf_a - log_cdf_b, 0.0)))
        # Right tail: P = SF(za) - SF(zb).
        right = log_sf_a + np.log1p(-np.exp(np.minimum(log_sf_b - log_sf_a, 0.0)))
    out = np.where(za + zb > 0.0, right, left)
    out = np.where(lo_zero, log_cdf_b, out)
    out = np.where(degenerate, np.where(y == 0.0, 0.0, ZERO_COUNT_LOG_FLOOR), out)
    return out


class MeaslesMetapop(SpatPompModel):
    """SpatPOMP interface over the measles metapopulation dynamics.

    ``rate_clamp_events`` counts simulation steps whose net transmission
    bracket went negative and was clamped; it is advisory only (the one
    piece of mutable state on the model).
    """

    state_dim = 4

    def __init__(self, params: MeaslesParams, demographics: Demographics,
                 n_times: int):
        self.params = params
        self.demographics = demographics
        self.dims = SpatPompDims(
            n_units=demographics.n_cities,
            n_times=n_times,
            obs_times=np.arange(n_times + 1) * params.obs_interval,
        )
        self.theta = {
            "mean_beta": params.mean_beta, "amplitude": params.amplitude,
            "alpha": params.alpha, "iota": params.iota,
            "sigma_se": params.sigma_se, "mu_ei": params.mu_ei,
            "mu_ir": params.mu_ir, "rho_report": params.rho_report,
            "psi": params.psi, "gravity_g": params.gravity_g,
        }
        self._pop = demographics.population
        self._travel = measles_gravity(params, demographics)
        self.rate_clamp_events = 0

    def with_theta(self, **updates):
        return MeaslesMetapop(replace(self.params, **updates),
                              self.demographics, self.dims.n_times)

    def _delayed_birth_rate(self, t: float) -> np.ndarray:
        # Constant synthetic series: the delay shift is a no-op; CSV-supplied
        # time series would be interpolated at t - birth_delay here.
        return self.demographics.birth_rate

    # -- latent process ------------------------------------------------------
    def simulate_initial(self, rng, size=()):
        p = self.params
        s = np.round(p.s_frac * self._pop)
        e = np.round(p.e_frac * self._pop)
        i = np.round(p.i_frac * self._pop)
        c = np.zeros_like(s)
        x = np.stack([s, e, i, c], axis=-1)
        return np.broadcast_to(x, size + x.shape).copy()

    def reset_observed(self, x):
        out = x.copy()
        out[..., 3] = 0.0
        return out

    def euler_step(self, state, t, dt, rng, return_flows=False):
        res = measles_euler_step(state, t, dt, self.params, self._pop,
                                 self._travel, self._delayed_birth_rate(t),
                                 rng, return_flows=return_flows)
        self.rate_clamp_events += res[1]
        return (res[0], res[2]) if return_flows else res[0]

    def simulate_transition(self, x, t0, t1, rng):
        if t1 == t0:
            return x
        if not isinstance(rng, np.random.Generator):
            out = np.empty_like(x, dtype=float)
            for b, g in enumerate(rng):
                out[b] = self.simulate_transition(x[b], t0, t1, g)
            return out
        p = self.params
        dt_target = p.obs_interval / p.euler_substeps
        nsub = max(1, int(np.round((t1 - t0) / dt_target)))
        dt = (t1 - t0) / nsub
        state = np.asarray(x, dtype=float)
        for k in range(nsub):
            state = self.euler_step(state, t0 + k * dt, dt, rng)
        return state

    # -- measurement model -----------------------------------------------------
    def _psi(self, scale):
        return self.params.psi if scale is None else np.asarray(scale)

    def _obs_moments(self, x, scale=None):
        rho = self.params.rho_report
        z = x[..., 3]
        psi = self._psi(scale)
        mean = rho * z
        var = rho * (1.0 - rho) * z + psi ** 2 * rho ** 2 * z ** 2
        return mean, var

    def measurement_logdensity(self, n, y, x, scale=None):
        mean, var = self._obs_moments(x, scale)
        return discretized_gaussian_logpmf(y, mean, var)

    def simulate_measurement(self, n, x, rng):
        mean, var = self._obs_moments(x)
        draw = mean + np.sqrt(var) * rng.standard_normal(mean.shape)
        return np.maximum(0.0, np.floor(draw + 0.5))

    # -- guide contract ----------------------------------------------------------
    def measurement_mean(self, n, x):
        return self.params.rho_report * x[..., 3]

    def measurement_var(self, n, x, scale=None):
        return self._obs_moments(x, scale)[1]

    def var_to_theta(self, n, v, x):
        rho = self.params.rho_report
        z = x[..., 3]
        binom = rho * (1.0 - rho) * z
        with np.errstate(invalid="ignore", divide="ignore"):
            psi = np.sqrt(np.maximum(np.asarray(v) - binom, 0.0)) \
                / np.where(z > 0, rho * z, 1.0)
        return np.where(z > 0, psi, self.params.psi)

    def guide_var_floor(self, n, x):
        rho = self.params.rho_report
        return rho * (1.0 - rho) * x[..., 3]

    def forecast_mean(self, x, s, t):
        """Deterministic skeleton: Euler integration of the mean equations."""
        if t == s:
            return x
        p = self.params
        dt_target = p.obs_interval / p.euler_substeps
        nsub = max(1, int(np.round((t - s) / dt_target)))
        dt = (t - s) / nsub
        state = np.asarray(x, dtype=float).copy()
        for k in range(nsub):
            tk = s + k * dt
            rate_se, _ = measles_transmission_rate(state, tk, p, self._pop,
                                                   self._travel)
            sus = state[..., 0]
            exp_ = state[..., 1]
            inf = state[..., 2]
            d_s = self._delayed_birth_rate(tk) - rate_se - p.mu_death * sus
            d_e = rate_se - (p.mu_ei + p.mu_death) * exp_
            d_i = p.mu_ei * exp_ - (p.mu_ir + p.mu_death) * inf
            d_c = p.mu_ir * inf
            state[..., 0] = np.maximum(sus + d_s * dt, 0.0)
            state[..., 1] = np.maximum(exp_ + d_e * dt, 0.0)
            state[..., 2] = np.maximum(inf + d_i * dt, 0.0)
            state[..., 3] = state[..., 3] + d_c * dt
        return state

    def constrain_state(self, x):
        return np.maximum(np.round(x), 0.0)


def load_demographics_csv(path) -> Demographics:
    """Read a demographics table: city_id, population, birth_rate, x_coord, y_coord."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"city_id", "population", "birth_rate", "x_coord", "y_coord"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigurationError(
                "demographics CSV needs columns %s" % sorted(required))
        for row in reader:
            rows.append((int(row["city_id"]), float(row["population"]),
                         float(row["birth_rate"]), float(row["x_coord"]),
                         float(row["y_coord"])))
    rows.sort()
    pop = np.array([r[1] for r in rows])
    births = np.array([r[2] for r in rows])
    coords = np.array([[r[3], r[4]] for r in rows])
    return Demographics(population=pop, birth_rate=births, coords=coords)


def load_case_csv(path, n_cities: int, n_times: int) -> np.ndarray:
    """Read case counts (city_id, time_index, cases) into a (U, N) array."""
    y = np.full((n_cities, n_times), np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"city_id", "time_index", "cases"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigurationError("case CSV needs columns %s" % sorted(required))
        for row in reader:
            y[int(row["city_id"]) - 1, int(row["time_index"]) - 1] = \
                float(row["cases"])
    if np.isnan(y).any():
        raise ConfigurationError("case CSV does not cover all (city, time) cells")
    return y
