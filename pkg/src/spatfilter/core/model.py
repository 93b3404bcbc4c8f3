"""Plug-and-play model contract for spatiotemporal state-space models.

A model supplies a simulator for the latent process (never a transition
density evaluator) plus a unit-level measurement density.  Models that want
to run under the guided filters additionally expose the simulated-moment
guide contract: a measurement mean ``h``, a measurement variance map
``theta -> V`` with its inverse ``V -> theta``, and a deterministic forecast
of the latent mean.

Latent states are arrays of shape ``(..., U, d)`` where ``d`` is the
per-unit state dimension; all methods are vectorized over the leading batch
axes.  Observations are arrays of shape ``(U,)`` per time point, stored as
``(U, N)`` datasets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .dims import SpatPompDims
from .rng import Purpose, rng_substream

__all__ = ["SpatPompModel", "SimulatedData", "simulate_dataset"]

RngLike = Union[np.random.Generator, Sequence[np.random.Generator]]


class SpatPompModel:
    """Base class describing the model interface used by all filters.

    Subclasses must set ``dims`` (a :class:`SpatPompDims`), ``theta`` (a dict
    of named parameters) and ``state_dim``, and implement the simulation and
    measurement methods.  The guide-related methods may be left unimplemented
    for models that never run under an intermediate-resampling filter.
    """

    dims: SpatPompDims
    theta: dict
    state_dim: int = 1

    # -- latent process ---------------------------------------------------
    def simulate_initial(self, rng: RngLike, size: tuple = ()) -> np.ndarray:
        """Draw from the initial distribution; returns (*size, U, d)."""
        raise NotImplementedError

    def simulate_transition(self, x: np.ndarray, t0: float, t1: float,
                            rng: RngLike) -> np.ndarray:
        """Propagate states from model time t0 to t1 (t1 == t0 is identity)."""
        raise NotImplementedError

    def reset_observed(self, x: np.ndarray) -> np.ndarray:
        """Reset per-interval accumulators at the start of an interval.

        Filters call this once before propagating into each observation
        interval.  The default is the identity; count models override it to
        zero their within-interval event accumulators.
        """
        return x

    # -- measurement model -------------------------------------------------
    def measurement_logdensity(self, n: int, y: np.ndarray, x: np.ndarray,
                               scale=None) -> np.ndarray:
        """log f(y_u | x_u) per unit; returns shape (..., U).

        ``scale`` optionally overrides the model's variance-controlling
        parameter with a per-unit array (broadcast against the batch), as
        produced by :meth:`var_to_theta`.
        """
        raise NotImplementedError

    def simulate_measurement(self, n: int, x: np.ndarray,
                             rng: RngLike) -> np.ndarray:
        """Draw observations y given latent states; returns (..., U)."""
        raise NotImplementedError

    # -- simulated-moment guide contract ------------------------------------
    def measurement_mean(self, n: int, x: np.ndarray) -> np.ndarray:
        """h: conditional mean of Y_{u,n} given X_{u,n}; shape (..., U)."""
        raise NotImplementedError

    def measurement_var(self, n: int, x: np.ndarray, scale=None) -> np.ndarray:
        """Conditional variance of Y_{u,n} given X_{u,n}; shape (..., U)."""
        raise NotImplementedError

    def var_to_theta(self, n: int, v: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`measurement_var` in its scale parameter.

        Returns the per-unit scale value s with
        ``measurement_var(n, x, scale=s) == v`` for v in the valid range;
        out-of-range v is clamped to the boundary.
        """
        raise NotImplementedError

    def forecast_mean(self, x: np.ndarray, s: float, t: float) -> np.ndarray:
        """Deterministic approximation of E[X(t) | X(s) = x]; identity at s == t."""
        raise NotImplementedError

    def guide_var_floor(self, n: int, x: np.ndarray):
        """Smallest total variance representable by ``var_to_theta`` at x."""
        return 0.0

    # -- optional hooks ------------------------------------------------------
    def constrain_state(self, x: np.ndarray) -> np.ndarray:
        """Project externally perturbed states back onto the state space.

        Used by ensemble update rules whose linear corrections may leave the
        model's state space (e.g. negative counts).  Default: identity.
        """
        return x

    def supports_guide(self) -> bool:
        cls = type(self)
        return cls.var_to_theta is not SpatPompModel.var_to_theta

    # -- conveniences --------------------------------------------------------
    @property
    def n_units(self) -> int:
        return self.dims.n_units

    @property
    def n_times(self) -> int:
        return self.dims.n_times

    def with_theta(self, **updates) -> "SpatPompModel":
        """Return a copy of the model with some parameters replaced."""
        raise NotImplementedError


@dataclass
class SimulatedData:
    """One simulated trajectory and its observations.

    ``latent`` has shape (N+1, U, d) including the initial state; ``y`` has
    shape (U, N) with column n-1 holding the observation at time t_n.
    """

    latent: np.ndarray
    y: np.ndarray


def simulate_dataset(model: SpatPompModel, seed: int) -> SimulatedData:
    """Simulate one latent trajectory plus observations from a model."""
    dims = model.dims
    x = model.simulate_initial(rng_substream(seed, purpose=Purpose.INIT))
    latent = np.empty((dims.n_times + 1,) + x.shape)
    latent[0] = x
    y = np.empty((dims.n_units, dims.n_times))
    for n in range(1, dims.n_times + 1):
        x = model.reset_observed(x)
        x = model.simulate_transition(
            x, dims.obs_times[n - 1], dims.obs_times[n],
            rng_substream(seed, time_index=n, purpose=Purpose.PROPOSE))
        latent[n] = x
        y[:, n - 1] = model.simulate_measurement(
            n, x, rng_substream(seed, time_index=n, purpose=Purpose.MEASURE))
    return SimulatedData(latent=latent, y=y)
