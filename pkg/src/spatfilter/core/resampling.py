"""Weighted resampling of particle indices.

Two schemes are provided.  ``multinomial`` draws indices i.i.d. from the
normalized weights.  ``systematic`` is the standard low-variance rule (one
uniform offset, a comb of J equally spaced points) followed by a uniform
random rotation of the output order.  The rotation matters: several callers
continue a single trajectory from the *first* returned index, and rotating a
systematic draw makes that first element exactly weight-distributed while
leaving the resampled multiset untouched.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateWeightsError
from .weights import log_sum_exp

__all__ = ["resample_indices", "resample_single", "normalized_weights", "SCHEMES"]

SCHEMES = ("systematic", "multinomial")


def normalized_weights(log_weights) -> np.ndarray:
    """Normalize log-weights to probabilities; raises on an all-zero pool."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("expected a nonempty 1-d pool of log-weights")
    total = log_sum_exp(lw)
    if total == -np.inf:
        raise DegenerateWeightsError()
    return np.exp(lw - total)


def resample_indices(log_weights, scheme, rng, size=None) -> np.ndarray:
    """Draw resampled particle indices from a pool of log-weights.

    Parameters
    ----------
    log_weights : array (J,)
        Unnormalized log-weights; -inf entries are excluded exactly.
    scheme : {"systematic", "multinomial"}
    rng : numpy Generator
    size : int, optional
        Number of indices to draw (defaults to J).

    Returns
    -------
    array of ``size`` indices in 0..J-1.  With exactly equal weights the
    systematic scheme returns every index exactly once (as a multiset).

    Raises
    ------
    DegenerateWeightsError
        If every weight is -inf.  Callers decide the fallback policy.
    """
    lw = np.asarray(log_weights, dtype=float)
    j = lw.size
    if size is None:
        size = j
    if j == 1:
        # Single-particle pools have no choice to make and consume no draws,
        # which keeps streams aligned across algorithm variants.
        if lw[0] == -np.inf:
            raise DegenerateWeightsError()
        return np.zeros(size, dtype=np.intp)
    probs = normalized_weights(lw)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    if scheme == "multinomial":
        u = rng.random(size)
        # side="right" skips zero-weight bins even when u hits a boundary.
        return np.searchsorted(cum, u, side="right").astype(np.intp)
    if scheme == "systematic":
        offset = rng.random()
        points = (offset + np.arange(size)) / size
        idx = np.searchsorted(cum, points, side="right").astype(np.intp)
        shift = int(rng.integers(size))
        return np.roll(idx, shift)
    raise ValueError("unknown resampling scheme: %r" % (scheme,))


def resample_single(log_weights, scheme, rng, size=None) -> int:
    """First element of ``resample_indices``, without building the array.

    Continuing a single trajectory only needs one survivor; this consumes
    the same leading draws as the full call, so the returned index is
    bitwise identical to ``resample_indices(...)[0]`` (numpy generators
    fill arrays sequentially from the bit stream).
    """
    lw = np.asarray(log_weights, dtype=float)
    j = lw.size
    if size is None:
        size = j
    if j == 1:
        if lw[0] == -np.inf:
            raise DegenerateWeightsError()
        return 0
    probs = normalized_weights(lw)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    if scheme == "multinomial":
        return int(np.searchsorted(cum, rng.random(), side="right"))
    if scheme == "systematic":
        offset = rng.random()
        shift = int(rng.integers(size))
        # Element 0 after rotation by ``shift`` is comb point ``shift``.
        point = (offset + ((size - shift) % size)) / size
        return int(np.searchsorted(cum, point, side="right"))
    raise ValueError("unknown resampling scheme: %r" % (scheme,))
