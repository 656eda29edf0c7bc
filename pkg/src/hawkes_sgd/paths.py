"""Event-path storage and the index combinatorics behind the sum estimators.

Conventions
-----------
Dimension (event type) indices are 0-based, like every other array axis in
this package. Event indices inside the lag machinery are 1-based, matching
the usual counting-process convention: ``kappa(i, j, n)`` is the *number* of
type-``i`` jumps strictly before the ``n``-th type-``j`` jump, which is also
the 1-based index of the last such jump (0 when there is none).
"""

import numpy as np

from .exceptions import ValidationError
from .validation import check_events


class PairIndex:
    """Precomputed lag-set index for one ordered pair of event types (i, j).

    Built with a single merge pass (``searchsorted``); serves the double-sum
    machinery: for every 1-based event index m of type i,
    ``kappa_ji[m-1]`` = number of type-j events strictly before t^i_m.
    """

    def __init__(self, path, i, j):
        self.path = path
        self.i = int(i)
        self.j = int(j)
        self.n_i = path.counts[i]
        # kappa(j, i, m) for m = 1..N_i, nondecreasing
        self.kappa_ji = np.searchsorted(path.times[j], path.times[i], side="left")
        self.kappa_max = int(self.kappa_ji[-1]) if self.n_i else 0
        # varpi(i, j, h) for h = 1..kappa_max; sentinel N_i + 1 beyond
        self._varpi = np.searchsorted(self.kappa_ji, np.arange(1, self.kappa_max + 1), side="left") + 1

    def varpi(self, h):
        """1-based first index p with kappa(j, i, p) >= h; N_i + 1 if none."""
        if h < 1:
            raise ValueError(f"lag h must be >= 1, got {h}")
        if h > self.kappa_max:
            return self.n_i + 1
        return int(self._varpi[h - 1])

    def lag_size(self, h):
        """Number of index pairs with lag h: N_i - varpi(i,j,h) + 1, or 0."""
        v = self.varpi(h)
        return self.n_i - v + 1 if v <= self.n_i else 0

    def lag_sizes(self, h_lo, h_hi):
        """Vector of lag-set sizes for h in [h_lo, h_hi] (clipped to valid lags)."""
        h_hi = min(h_hi, self.kappa_max)
        if h_hi < h_lo:
            return np.zeros(0, dtype=np.int64)
        v = self._varpi[h_lo - 1 : h_hi]
        return np.maximum(self.n_i - v + 1, 0).astype(np.int64)

    def pair_values(self, h, slots):
        """Map (lag h, 1-based slots) to (T - t^i_m, t^i_m - t^j_n) arrays."""
        slots = np.asarray(slots, dtype=np.int64)
        m = self.varpi(h) + slots - 1  # 1-based
        if m.size and (slots.min() < 1 or m.max() > self.n_i):
            raise IndexError(f"slot out of range for lag {h}")
        n = self.kappa_ji[m - 1] - h + 1  # 1-based
        t_i = self.path.times[self.i][m - 1]
        t_j = self.path.times[self.j][n - 1]
        return self.path.horizon - t_i, t_i - t_j

    def pairs_for_lags(self, h_array, slot_array):
        """Vectorized ``pair_values`` for per-draw (h, slot) arrays."""
        h_array = np.asarray(h_array, dtype=np.int64)
        slot_array = np.asarray(slot_array, dtype=np.int64)
        m = self._varpi[h_array - 1] + slot_array - 1
        n = self.kappa_ji[m - 1] - h_array + 1
        t_i = self.path.times[self.i][m - 1]
        t_j = self.path.times[self.j][n - 1]
        return self.path.horizon - t_i, t_i - t_j


class EventPath:
    """An observed multivariate event path on [0, horizon].

    Parameters
    ----------
    times : sequence of array-like
        One strictly increasing array of jump times per event type.
    horizon : float, optional
        Observation window end; defaults to the last observed jump.
    low_memory : bool
        When True, per-pair index tables are not cached and kappa/varpi fall
        back to binary search per call.
    """

    def __init__(self, times, horizon=None, low_memory=False):
        self.times, self.horizon = check_events(times, horizon)
        self.d = len(self.times)
        self.counts = np.array([len(t) for t in self.times], dtype=np.int64)
        self.low_memory = bool(low_memory)
        self._pair_cache = {}

    # -- basic quantities ---------------------------------------------------

    @property
    def total_events(self):
        return int(self.counts.sum())

    def event_rate(self, i):
        """Global event rate of type i: N^i_T / T."""
        return self.counts[i] / self.horizon

    def event_rates(self):
        return self.counts / self.horizon

    def is_nontrivial(self):
        """True when every type has >1 event and every pair has varpi(i,j) <= N_i - 1.

        This is the standing assumption behind the least-squares decomposition:
        the last event of each type must be preceded by at least one event of
        every type.
        """
        if np.any(self.counts <= 1):
            return False
        for i in range(self.d):
            for j in range(self.d):
                if self.pair_index(i, j).varpi(1) >= self.counts[i]:
                    return False
        return True

    def require_nontrivial(self):
        if not self.is_nontrivial():
            raise ValidationError(
                "path is trivial: need N_i > 1 for all types and at least one "
                "event of every type before the last event of each type"
            )

    # -- lag combinatorics ----------------------------------------------------

    def pair_index(self, i, j):
        """The (lazily cached) PairIndex for ordered pair (i, j)."""
        key = (int(i), int(j))
        if self.low_memory:
            return PairIndex(self, *key)
        idx = self._pair_cache.get(key)
        if idx is None:
            idx = self._pair_cache[key] = PairIndex(self, *key)
        return idx

    def kappa(self, i, j, n):
        """Index of the last type-i jump strictly before the n-th type-j jump.

        1-based in n and in the returned index; 0 when no such jump exists.
        """
        if not 1 <= n <= self.counts[j]:
            raise ValueError(f"n must be in [1, {self.counts[j]}], got {n}")
        return int(np.searchsorted(self.times[i], self.times[j][n - 1], side="left"))

    def varpi(self, i, j, h=1):
        """First (1-based) type-i index preceded by at least h type-j jumps.

        Returns the sentinel ``N_i + 1`` when no index qualifies, so that
        sums over ``[varpi, N_i]`` are empty.
        """
        if h < 1:
            raise ValueError(f"lag h must be >= 1, got {h}")
        return self.pair_index(i, j).varpi(h)

    def lag_set_size(self, i, j, h):
        return self.pair_index(i, j).lag_size(h)

    def lag_pair(self, i, j, h, slot):
        """The `slot`-th element (1-based) of the lag-h pair set for (i, j).

        Returns ``(horizon - t^i_m, t^i_m - t^j_n)`` where ``m = varpi(i,j,h)
        + slot - 1`` and ``n = kappa(j,i,m) - h + 1``.
        """
        size = self.lag_set_size(i, j, h)
        if size == 0:
            raise IndexError(f"lag set (i={i}, j={j}, h={h}) is empty")
        if not 1 <= slot <= size:
            raise IndexError(f"slot must be in [1, {size}], got {slot}")
        x1, x2 = self.pair_index(i, j).pair_values(h, np.array([slot]))
        return float(x1[0]), float(x2[0])

    def __repr__(self):
        return f"EventPath(d={self.d}, N={self.counts.tolist()}, T={self.horizon})"
