"""Correlated Brownian motion benchmark with an exact Kalman oracle.

Units sit on a circle; the latent process is X(t) = Omega W(t) for U
independent standard Brownian motions W and a coupling matrix
Omega[u, v] = rho^dist(u, v) built from the circle distance.  Observations
add independent Gaussian noise of standard deviation tau.  Because the model
is linear-Gaussian, the exact likelihood and filter moments are computable
with a Kalman filter, making this the workhorse oracle for every Monte Carlo
filter in the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core.dims import SpatPompDims
from ..core.model import SpatPompModel
from ..core.neighborhoods import circle_distance
from ..core.rng import standard_normal
from ..core.weights import normal_logpdf

__all__ = ["CorrelatedBmParams", "CorrelatedBrownianMotion",
           "bm_coupling_matrix", "bm_kalman_matrices"]


@dataclass(frozen=True)
class CorrelatedBmParams:
    """Coupling, measurement noise and dimensions of the benchmark."""

    n_units: int
    n_times: int
    rho: float = 0.4
    tau: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.tau <= 0 or self.dt <= 0:
            raise ValueError("tau and dt must be positive")


def bm_coupling_matrix(rho: float, n_units: int) -> np.ndarray:
    """Omega[u, v] = rho^circle_distance(u, v)."""
    omega = np.empty((n_units, n_units))
    for u in range(n_units):
        for v in range(n_units):
            omega[u, v] = rho ** circle_distance(u + 1, v + 1, n_units)
    return omega


def bm_kalman_matrices(params: CorrelatedBmParams) -> dict:
    """Linear-Gaussian system matrices consumed by the Kalman filter.

    State transition is the identity with innovation covariance
    Q = Omega Omega^T dt; observations are direct with R = tau^2 I.
    """
    omega = bm_coupling_matrix(params.rho, params.n_units)
    u = params.n_units
    return {
        "F": np.eye(u),
        "Q": omega @ omega.T * params.dt,
        "H": np.eye(u),
        "R": params.tau ** 2 * np.eye(u),
        "x0": np.zeros(u),
        "P0": np.zeros((u, u)),
    }


class CorrelatedBrownianMotion(SpatPompModel):
    """SpatPOMP wrapper of the correlated Brownian motion benchmark."""

    state_dim = 1

    def __init__(self, params: CorrelatedBmParams):
        self.params = params
        self.dims = SpatPompDims(
            n_units=params.n_units,
            n_times=params.n_times,
            obs_times=np.arange(params.n_times + 1) * params.dt,
        )
        self.theta = {"rho": params.rho, "tau": params.tau}
        self._omega = bm_coupling_matrix(params.rho, params.n_units)

    def with_theta(self, **updates):
        return CorrelatedBrownianMotion(replace(self.params, **updates))

    # -- latent process ----------------------------------------------------
    def simulate_initial(self, rng, size=()):
        return np.zeros(size + (self.dims.n_units, 1))

    def simulate_transition(self, x, t0, t1, rng):
        if t1 == t0:
            return x
        z = standard_normal(rng, x.shape[:-1])
        step = (z @ self._omega.T) * np.sqrt(t1 - t0)
        return x + step[..., None]

    # -- measurement model ---------------------------------------------------
    def _tau(self, scale):
        return self.params.tau if scale is None else np.asarray(scale)

    def measurement_logdensity(self, n, y, x, scale=None):
        tau = self._tau(scale)
        return normal_logpdf(y, x[..., 0], tau)

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
        return x
