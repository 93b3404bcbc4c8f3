"""Index-set dimensions of a spatiotemporal state-space model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SpatPompDims"]


@dataclass(frozen=True)
class SpatPompDims:
    """Units, observation count and observation times.

    ``obs_times`` has length ``n_times + 1``: entry 0 is the initialization
    time and entry n is the time of observation n.
    """

    n_units: int
    n_times: int
    obs_times: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_units < 1 or self.n_times < 1:
            raise ValueError("need at least one unit and one observation time")
        times = self.obs_times
        if times is None:
            times = np.arange(self.n_times + 1, dtype=float)
        times = np.asarray(times, dtype=float)
        if times.shape != (self.n_times + 1,):
            raise ValueError("obs_times must have length n_times + 1")
        if not np.all(np.diff(times) > 0):
            raise ValueError("obs_times must be strictly increasing")
        object.__setattr__(self, "obs_times", times)

    @property
    def U(self) -> int:
        return self.n_units

    @property
    def N(self) -> int:
        return self.n_times
