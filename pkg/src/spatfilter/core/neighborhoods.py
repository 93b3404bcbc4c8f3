"""Space-time neighborhoods of lexicographic predecessors.

An observation (u, n) is localized by a finite set B(u, n) of observations
that precede it in the lexicographic order: earlier time, or the same time
and a smaller unit index.  Members that fall outside the index box (time < 1
or unit outside 1..U) are silently dropped (boundary truncation); truncation
rather than reflection keeps B a subset of the predecessor set, and spatial
wraparound is a model property, not a neighborhood property.

Unit and time indices are 1-based in the public interface, matching the
subscripts used throughout the filter definitions; resolved members are
returned 1-based as well.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .dims import SpatPompDims
from .errors import ConfigurationError

__all__ = ["circle_distance", "Neighborhood", "resolve_neighborhood"]


def circle_distance(u: int, v: int, n_units: int) -> int:
    """Distance between units placed on a circle of ``n_units`` sites."""
    d = u - v
    return int(min(abs(d), abs(d + n_units), abs(d - n_units)))


@dataclass(frozen=True)
class Neighborhood:
    """Mapping (u, n) -> finite set of preceding observations.

    Three kinds are supported:

    - ``Neighborhood.co_located_lags(k)``: {(u, n-1), ..., (u, n-k)}.
    - ``Neighborhood.lags_plus_spatial(offsets)``: members (u - du, n - dn)
      for each offset (du, dn); dn >= 1, or dn == 0 with du >= 1 so that
      every member is a lexicographic predecessor.
    - ``Neighborhood.explicit(mapping)``: an explicit dict
      {(u, n): [(u', n'), ...]}; missing keys resolve to the empty set.

    ``allow_current`` relaxes validation to "not later than n" (any unit at
    time n allowed, including (u, n) itself); this is the rule for
    latent-state estimation neighborhoods, which may condition on
    current-time observations.
    """

    kind: str
    lags: int = 0
    offsets: Tuple[Tuple[int, int], ...] = ()
    table: Tuple = ()
    allow_current: bool = False

    @staticmethod
    def co_located_lags(k: int) -> "Neighborhood":
        if k < 0:
            raise ConfigurationError("lag count must be >= 0")
        return Neighborhood(kind="lags", lags=k,
                            offsets=tuple((0, dn) for dn in range(1, k + 1)))

    @staticmethod
    def lags_plus_spatial(offsets: Sequence[Tuple[int, int]],
                          allow_current: bool = False) -> "Neighborhood":
        offs = tuple((int(du), int(dn)) for du, dn in offsets)
        for du, dn in offs:
            if dn < 0 or (dn == 0 and du <= 0 and not allow_current):
                raise ConfigurationError(
                    "offset (du=%d, dn=%d) is not a lexicographic predecessor"
                    % (du, dn))
        return Neighborhood(kind="offsets", offsets=offs,
                            allow_current=allow_current)

    @staticmethod
    def explicit(mapping: Dict[Tuple[int, int], Sequence[Tuple[int, int]]],
                 allow_current: bool = False) -> "Neighborhood":
        table = tuple(sorted(
            (key, tuple(sorted(tuple(m) for m in members)))
            for key, members in mapping.items()))
        return Neighborhood(kind="explicit", table=table,
                            allow_current=allow_current)

    @staticmethod
    def empty() -> "Neighborhood":
        return Neighborhood(kind="lags", lags=0, offsets=())

    def _mapping(self):
        return dict(self.table)

    @property
    def max_lag(self) -> int:
        """Largest temporal lag appearing in any neighborhood."""
        if self.kind in ("lags", "offsets"):
            return max((dn for du, dn in self.offsets), default=0)
        lag = 0
        for (u, n), members in self.table:
            for (mu, mn) in members:
                lag = max(lag, n - mn)
        return lag

    def members(self, u: int, n: int, dims: SpatPompDims) -> List[Tuple[int, int]]:
        """Resolved members of B(u, n), ordered by (time, unit)."""
        out = []
        if self.kind in ("lags", "offsets"):
            for du, dn in self.offsets:
                mu, mn = u - du, n - dn
                if 1 <= mu <= dims.n_units and mn >= 1:
                    out.append((mu, mn))
        else:
            for (mu, mn) in self._mapping().get((u, n), ()):
                if not (1 <= mu <= dims.n_units) or mn < 1:
                    continue
                if self.allow_current:
                    valid = mn <= n
                else:
                    valid = mn < n or (mn == n and mu < u)
                if not valid:
                    raise ConfigurationError(
                        "member (%d, %d) does not precede (%d, %d)"
                        % (mu, mn, u, n))
                out.append((mu, mn))
        return sorted(out, key=lambda m: (m[1], m[0]))

    def lag_layers(self, n: int, k: int, dims: SpatPompDims):
        """Member units at lag k of every target (u, n), as gather layers.

        Returns a list of ``(targets, sources)`` index-array pairs (0-based
        unit indices).  Layer r holds, for every target unit that has at
        least r+1 members at time n-k, its (r+1)-th member in ascending
        member-unit order.  Summing gathered values layer by layer therefore
        accumulates member contributions in a canonical order shared by every
        code path that combines weights over a neighborhood.
        """
        if n - k < 1:
            return []
        # Offset-defined neighborhoods are time-homogeneous away from the
        # n - k < 1 boundary, so layers can be cached per (k, U).
        n_key = n if self.kind == "explicit" else 0
        return _lag_layers_cached(self, n_key, n, k, dims.n_units)


def _lag_layers(nb: "Neighborhood", n: int, k: int, n_units: int):
    dims = SpatPompDims(n_units=n_units, n_times=max(n, 1) + 1)
    per_target: List[List[int]] = [[] for _ in range(n_units)]
    for u in range(1, n_units + 1):
        for mu, mn in nb.members(u, n, dims):
            if mn == n - k:
                per_target[u - 1].append(mu - 1)
    layers = []
    rank = 0
    while True:
        tgt = [u for u in range(n_units) if len(per_target[u]) > rank]
        if not tgt:
            break
        src = [per_target[u][rank] for u in tgt]
        layers.append((np.asarray(tgt, dtype=np.intp),
                       np.asarray(src, dtype=np.intp)))
        rank += 1
    return layers


_LAYER_CACHE: Dict[tuple, list] = {}


def _lag_layers_cached(nb, n_key, n, k, n_units):
    key = (nb, n_key, k, n_units)
    hit = _LAYER_CACHE.get(key)
    if hit is None:
        hit = _lag_layers(nb, n, k, n_units)
        _LAYER_CACHE[key] = hit
    return hit


def resolve_neighborhood(nb: Neighborhood, u: int, n: int,
                         dims: SpatPompDims) -> List[Tuple[int, int]]:
    """Ordered members of B(u, n); validates indices and predecessor rule."""
    if not (1 <= u <= dims.n_units and 1 <= n <= dims.n_times):
        raise ConfigurationError("(u=%d, n=%d) outside the index box" % (u, n))
    return nb.members(u, n, dims)
