"""Stochastic Lorenz-96 benchmark.

A chaotic advection model on a circle of U sites with additive Brownian
process noise, used as a geophysical-style stress test: the dynamics mix
strongly across space, so trajectories simulated without data guidance
decorrelate from the truth quickly.  Sample paths are generated with
Euler-Maruyama steps; the deterministic skeleton of the same discretization
provides the forecast-mean function for guided filters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core.dims import SpatPompDims
from ..core.model import SpatPompModel
from ..core.rng import standard_normal
from ..core.weights import normal_logpdf

__all__ = ["Lorenz96Params", "Lorenz96"]


@dataclass(frozen=True)
class Lorenz96Params:
    """``burn_in`` runs the dynamics for that long before time zero, so the
    short transient away from the independent-Gaussian start is discarded
    and observations begin near the attractor."""

    n_units: int
    n_times: int
    forcing: float = 8.0
    sigma_proc: float = 1.0
    tau: float = 1.0
    dt_euler: float = 0.005
    dt_obs: float = 1.0
    init_mean: float = 5.0
    init_sd: float = 2.0
    burn_in: float = 0.0

    def __post_init__(self):
        if self.n_units < 4:
            raise ValueError("the advection term needs at least 4 units")
        if self.dt_euler <= 0 or self.dt_obs <= 0:
            raise ValueError("time steps must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")


def _drift(x: np.ndarray, forcing: float) -> np.ndarray:
    """(X_{u+1} - X_{u-2}) X_{u-1} - X_u + F with cyclic indexing."""
    xp1 = np.roll(x, -1, axis=-1)
    xm2 = np.roll(x, 2, axis=-1)
    xm1 = np.roll(x, 1, axis=-1)
    return (xp1 - xm2) * xm1 - x + forcing


class Lorenz96(SpatPompModel):

    state_dim = 1

    def __init__(self, params: Lorenz96Params):
        self.params = params
        self.dims = SpatPompDims(
            n_units=params.n_units,
            n_times=params.n_times,
            obs_times=np.arange(params.n_times + 1) * params.dt_obs,
        )
        self.theta = {"forcing": params.forcing,
                      "sigma_proc": params.sigma_proc, "tau": params.tau}

    def with_theta(self, **updates):
        return Lorenz96(replace(self.params, **updates))

    def _substeps(self, t0, t1):
        return max(1, int(np.ceil((t1 - t0) / self.params.dt_euler - 1e-9)))

    # -- latent process ----------------------------------------------------
    def simulate_initial(self, rng, size=()):
        p = self.params
        z = standard_normal(rng, size + (p.n_units,))
        x = (p.init_mean + p.init_sd * z)[..., None]
        if p.burn_in > 0:
            x = self.simulate_transition(x, -p.burn_in, 0.0, rng)
        return x

    def simulate_transition(self, x, t0, t1, rng):
        if t1 == t0:
            return x
        p = self.params
        nsub = self._substeps(t0, t1)
        delta = (t1 - t0) / nsub
        state = x[..., 0]
        if isinstance(rng, np.random.Generator):
            noise = rng.standard_normal((nsub,) + state.shape)
        else:
            # One (nsub, ...) block per replicate stream, assembled so the
            # substep loop stays vectorized across the batch.
            rows = [g.standard_normal((nsub,) + state.shape[1:]) for g in rng]
            noise = np.stack(rows, axis=1)
        sd = p.sigma_proc * np.sqrt(delta)
        for k in range(nsub):
            state = state + _drift(state, p.forcing) * delta + sd * noise[k]
        return state[..., None]

    # -- measurement model ---------------------------------------------------
    def _tau(self, scale):
        return self.params.tau if scale is None else np.asarray(scale)

    def measurement_logdensity(self, n, y, x, scale=None):
        return normal_logpdf(y, x[..., 0], self._tau(scale))

    def simulate_measurement(self, n, x, rng):
        eta = standard_normal(rng, x.shape[:-1])
        return x[..., 0] + self.params.tau * eta

    # -- guide contract --------------------------------------------------------
    def measurement_mean(self, n, x):
        return x[..., 0]

    def measurement_var(self, n, x, scale=None):
        tau = self._tau(scale)
        return np.broadcast_to(np.asarray(tau, dtype=float) ** 2,
                               x.shape[:-1]).copy()

    def var_to_theta(self, n, v, x):
        return np.sqrt(np.maximum(np.asarray(v, dtype=float), 0.0))

    def forecast_mean(self, x, s, t):
        if t == s:
            return x
        p = self.params
        nsub = self._substeps(s, t)
        delta = (t - s) / nsub
        state = x[..., 0]
        for _ in range(nsub):
            state = state + _drift(state, p.forcing) * delta
        return state[..., None]
