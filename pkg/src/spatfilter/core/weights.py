"""Log-domain weight arithmetic and likelihood containers.

All weight handling in the toolkit happens in the log domain: products of
densities across units and neighborhoods become sums, and normalized weight
ratios become shifted log-sum-exp expressions.  Nothing here ever
exponentiates an unshifted log-weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateWeightsError

__all__ = [
    "log_sum_exp",
    "log_mean_exp",
    "conditional_loglik",
    "ordered_total",
    "LogWeightTensor",
    "Diagnostics",
    "LoglikResult",
    "ReplicateReducer",
    "LOGLIK_FLOOR",
]

# Default per-observation floor applied when a weight pool degenerates.
LOGLIK_FLOOR = -35.0


def log_sum_exp(values, axis=None):
    """log(sum(exp(values))) computed by shifting with the maximum.

    Accepts -inf entries (zero weights); an all-(-inf) input returns -inf
    without warnings.  An empty input is a programming error.
    """
    a = np.asarray(values, dtype=float)
    if a.size == 0 or (axis is not None and a.shape[axis] == 0):
        raise ValueError("log_sum_exp of an empty set")
    m = np.max(a, axis=axis, keepdims=True)
    # Freeze -inf maxima at a finite shift so exp stays 0 instead of nan;
    # log(0) + 0 then yields the correct -inf for an all-zero pool.
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - shift), axis=axis, keepdims=True)) + shift
    if axis is not None:
        out = np.squeeze(out, axis=axis)
        return out
    return float(out.reshape(()))


def log_mean_exp(values, axis=None):
    """log of the average of exp(values); -inf input gives -inf."""
    a = np.asarray(values, dtype=float)
    count = a.size if axis is None else a.shape[axis]
    return log_sum_exp(a, axis=axis) - np.log(count)


_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def normal_logpdf(y, mean, sd):
    """Vectorized Gaussian log-density (much lighter than the scipy dist)."""
    sd = np.asarray(sd, dtype=float)
    z = (np.asarray(y, dtype=float) - mean) / sd
    return -0.5 * z * z - np.log(sd) - _LOG_SQRT_2PI


def conditional_loglik(log_wm, log_wp):
    """Self-normalized conditional log-likelihood of one (unit, time) pool.

    Returns ``log_sum_exp(wm + wp) - log_sum_exp(wp)`` over the flattened
    pool, the log of the weighted average of measurement weights under the
    prediction weights.

    Raises
    ------
    DegenerateWeightsError
        If every prediction weight is -inf (the estimate is undefined).
    """
    wm = np.asarray(log_wm, dtype=float)
    wp = np.asarray(log_wp, dtype=float)
    if wm.shape != wp.shape:
        raise ValueError("weight shapes differ: %s vs %s" % (wm.shape, wp.shape))
    denom = log_sum_exp(wp.ravel())
    if denom == -np.inf:
        raise DegenerateWeightsError("all prediction weights are zero")
    return log_sum_exp((wm + wp).ravel()) - denom


def ordered_total(unit_logliks) -> float:
    """Sum a (U, N) conditional log-likelihood matrix in fixed order.

    The accumulation order (time outer, unit inner) is part of the
    reproducibility contract: it makes totals bitwise identical no matter how
    the per-(u, n) entries were produced or parallelized.
    """
    m = np.asarray(unit_logliks, dtype=float)
    total = 0.0
    for n in range(m.shape[1]):
        for u in range(m.shape[0]):
            total += m[u, n]
    return total


@dataclass
class LogWeightTensor:
    """Dense log-weights indexed by (unit, time, replicate, particle).

    Used by the stored-weights reference implementation and in tests; the
    streaming production code never materializes the full tensor.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 4:
            raise ValueError("expected (U, N, R, J) array")
        if np.isnan(self.values).any():
            raise ValueError("log-weights must not contain NaN")
        if np.any(self.values == np.inf):
            raise ValueError("log-weights must be < +inf")

    @property
    def dims(self):
        return self.values.shape


@dataclass
class Diagnostics:
    """Run health counters accumulated by a filter."""

    degenerate_weight_events: int = 0
    floor_events: int = 0
    var_clamp_events: int = 0
    rate_clamp_events: int = 0
    min_ess: float = np.inf
    median_ess: float = np.nan

    def merge(self, other: "Diagnostics") -> "Diagnostics":
        return Diagnostics(
            degenerate_weight_events=self.degenerate_weight_events
            + other.degenerate_weight_events,
            floor_events=self.floor_events + other.floor_events,
            var_clamp_events=self.var_clamp_events + other.var_clamp_events,
            rate_clamp_events=self.rate_clamp_events + other.rate_clamp_events,
            min_ess=min(self.min_ess, other.min_ess),
            median_ess=self.median_ess,
        )


@dataclass
class LoglikResult:
    """Per-(u, n) conditional log-likelihood estimates and their total.

    ``total`` always equals ``ordered_total(unit_logliks)`` when the per-unit
    matrix exists; filters without unit-level decompositions (PF, BPF, GIRF)
    fill ``time_logliks`` only and sum those in time order.
    """

    total: float
    unit_logliks: Optional[np.ndarray] = None
    time_logliks: Optional[np.ndarray] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __post_init__(self):
        if self.unit_logliks is not None and self.time_logliks is None:
            self.time_logliks = self.unit_logliks.sum(axis=0)


# Replicate results are reduced in fixed chunks so that the reduction order
# is a property of the algorithm, not of the worker count.
REDUCE_CHUNK = 64


class ReplicateReducer:
    """Order-fixed log-sum-exp reduction over per-replicate arrays.

    Collects per-replicate (U, N) arrays of log values in replicate order,
    reduces each full chunk of ``REDUCE_CHUNK`` with a two-pass log-sum-exp,
    and merges chunk results with one final log-sum-exp.  The result is
    bitwise independent of how replicates were scheduled across workers.
    """

    def __init__(self):
        self._pending = []
        self._chunks = []
        self.count = 0

    def add(self, values: np.ndarray) -> None:
        self._pending.append(np.asarray(values, dtype=float))
        self.count += 1
        if len(self._pending) == REDUCE_CHUNK:
            self._flush()

    def _flush(self) -> None:
        if self._pending:
            block = np.stack(self._pending, axis=0)
            self._chunks.append(log_sum_exp(block, axis=0))
            self._pending = []

    def value(self) -> np.ndarray:
        """log-sum-exp over everything added so far."""
        self._flush()
        if not self._chunks:
            raise ValueError("no replicate results were added")
        if len(self._chunks) == 1:
            return self._chunks[0]
        return log_sum_exp(np.stack(self._chunks, axis=0), axis=0)
