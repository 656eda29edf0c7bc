"""Stratified Monte Carlo estimators for the decomposition's single and double
sums, with adaptive near-optimal allocation.

Single sums (over event indices m) are stratified by index with an exactly
summed tail: the largest indices correspond to events near the horizon whose
contributions have not saturated, so they are never sampled away.

Double sums (over event pairs) are stratified by index lag. Lags up to
``h_max`` get an adaptive allocation re-fit after every sampling round from
finite-population-corrected stratum variances; the remaining lags are covered
by a fixed-allocation remainder estimator. Plans carry the per-stratum size
tables so that one estimate costs O(draws), independent of the path length.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import PlanError


def sample_without_replacement(n, q, rng):
    """q distinct integers uniform in [0, n), O(q) when q << n.

    Uses a partial permutation when q is a sizable fraction of n and hash-set
    rejection otherwise; never materializes [0, n) in the sparse case.
    """
    n = int(n)
    q = int(q)
    if q > n:
        raise PlanError(f"cannot draw {q} distinct values from a range of {n}")
    if q == 0:
        return np.zeros(0, dtype=np.int64)
    if 8 * q >= n or n <= 64:
        return rng.permutation(n)[:q].astype(np.int64)
    seen = set()
    out = np.empty(q, dtype=np.int64)
    filled = 0
    while filled < q:
        draw = rng.integers(0, n, size=int(1.3 * (q - filled)) + 1)
        for v in draw:
            if v not in seen:
                seen.add(v)
                out[filled] = v
                filled += 1
                if filled == q:
                    break
    return out


# -- moments -------------------------------------------------------------------


@dataclass
class StratumMoments:
    """Running sample moments of the summand values drawn in one stratum.

    ``mean``/``m2`` are per output component (value + partials share draws).
    The scaled estimate is ``size * mean``; the population-corrected variance
    estimate is ``(size - 1) / size * m2 / (count - 1)`` (NaN below 2 draws).
    """

    size: int
    count: int = 0
    mean: np.ndarray = None
    m2: np.ndarray = None

    def updated(self, batch):
        """Moments merged with a batch of values, equal to from-scratch stats."""
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        q = batch.shape[1]
        if q < 1:
            return self
        b_mean = batch.mean(axis=1)
        b_m2 = ((batch - b_mean[:, None]) ** 2).sum(axis=1)
        if self.count == 0:
            return StratumMoments(self.size, q, b_mean, b_m2)
        n = self.count + q
        delta = b_mean - self.mean
        mean = self.mean + delta * (q / n)
        m2 = self.m2 + b_m2 + delta * delta * (self.count * q / n)
        return StratumMoments(self.size, n, mean, m2)

    @property
    def scaled_sum(self):
        if self.count == 0:
            return None
        return self.size * self.mean

    def sigma_sq(self, component=0):
        """Finite-population-corrected variance of the stratum values."""
        if self.count < 2:
            return np.nan
        if self.size < 2:
            return 0.0
        return (self.size - 1) / self.size * self.m2[component] / (self.count - 1)


def update_moments_batched(moments, batch):
    """Functional wrapper: merge a batch of drawn values into running moments."""
    return moments.updated(batch)


# -- allocations ----------------------------------------------------------------


def optimal_allocation(sizes, sigmas):
    """Variance-minimizing relative allocation ~ sqrt(|E|/(|E|-1)) * sigma.

    Unknown (NaN) or degenerate entries contribute zero weight; if every
    weight vanishes the allocation falls back to uniform over live strata.
    """
    sizes = np.asarray(sizes, dtype=float)
    sigmas = np.nan_to_num(np.asarray(sigmas, dtype=float), nan=0.0)
    weights = np.zeros_like(sizes)
    live = sizes > 1
    weights[live] = np.sqrt(sizes[live] / (sizes[live] - 1.0)) * sigmas[live]
    total = weights.sum()
    if total <= 0:
        alive = sizes > 0
        if not alive.any():
            return np.zeros_like(sizes)
        return alive / alive.sum()
    return weights / total


def ema_allocation(prev, prev2, weight, floor=0.0):
    """Exponential-moving-average warm start: w * prev + (1 - w) * prev2."""
    prev = np.asarray(prev, dtype=float)
    prev2 = np.asarray(prev2, dtype=float)
    out = weight * prev + (1.0 - weight) * prev2
    out = np.maximum(out, floor)
    total = out.sum()
    if total <= 0:
        return np.full_like(out, 1.0 / len(out)) if len(out) else out
    return out / total


# -- single sums -----------------------------------------------------------------


@dataclass
class SingleSumPlan:
    """Index strata for one single sum: ``bounds`` are 1-based stratum edges
    b_0 < ... < b_nmax; stratum p covers [b_p, b_{p+1}-1]; the tail
    [b_nmax, N] is summed exactly. ``draws[p]`` points are sampled without
    replacement in stratum p."""

    n_events: int
    bounds: np.ndarray
    draws: np.ndarray

    @property
    def is_exhaustive(self):
        sizes = np.diff(self.bounds)
        return bool(np.all(self.draws >= sizes))


def default_single_bounds(n_events, tail_target=1000, final_gap=50):
    """Stratum edges: exact tail of ~tail_target, then backward-squared gaps."""
    tail_start = n_events - min(tail_target, -(-n_events // 10))
    if tail_start <= 1:
        return np.array([1], dtype=np.int64)
    bounds = [tail_start]
    gap = final_gap
    while bounds[0] > 1:
        nxt = max(1, bounds[0] - gap)
        bounds.insert(0, nxt)
        gap = min(gap * gap, 10**12)
    return np.asarray(bounds, dtype=np.int64)


def default_single_plan(n_events, budget, tail_target=1000, final_gap=50):
    bounds = default_single_bounds(n_events, tail_target, final_gap)
    sizes = np.diff(bounds)
    if sizes.size == 0:
        return SingleSumPlan(n_events, bounds, np.zeros(0, dtype=np.int64))
    if budget >= sizes.sum():
        draws = sizes.copy()
    else:
        draws = np.maximum(1, (budget * sizes) // max(sizes.sum(), 1))
        draws = np.minimum(draws, sizes)
    return SingleSumPlan(n_events, bounds, draws.astype(np.int64))


def estimate_single_sum(path, f, i, plan, rng):
    """Unbiased estimate of sum_m f(T - t^i_m); vector components share draws."""
    n = int(path.counts[i])
    if plan.n_events != n or (plan.bounds.size and plan.bounds[-1] > n):
        raise PlanError(f"plan built for N={plan.n_events} applied to a stream of {n} events")
    sizes = np.diff(plan.bounds)
    if np.any(plan.draws > sizes):
        raise PlanError("per-stratum draws exceed stratum sizes (sampling is without replacement)")
    times = path.times[i]
    T = path.horizon
    tail_start = int(plan.bounds[-1]) if plan.bounds.size else 1
    out = f(T - times[tail_start - 1 :]).sum(axis=1)
    for p in range(len(sizes)):
        size, q = int(sizes[p]), int(plan.draws[p])
        if size == 0 or q == 0:
            continue
        picks = plan.bounds[p] + sample_without_replacement(size, q, rng)  # 1-based m
        z = f(T - times[picks - 1]).sum(axis=1)
        out = out + (size / q) * z
    return out


# -- double sums -----------------------------------------------------------------


@dataclass
class _LagBin:
    """One lag stratum with its materialized size table (built once per plan)."""

    h_lo: int
    h_hi: int
    lag_sizes: np.ndarray
    cum_sizes: np.ndarray
    size: int

    def draw(self, q, rng, pair_index):
        flat = sample_without_replacement(self.size, q, rng)
        pos = np.searchsorted(self.cum_sizes, flat, side="right")
        offset = np.where(pos > 0, self.cum_sizes[np.maximum(pos - 1, 0)], 0)
        slots = flat - offset + 1
        h = self.h_lo + pos
        return pair_index.pairs_for_lags(h, slots)


def _build_bins(pair_index, ranges):
    bins = []
    for h_lo, h_hi in ranges:
        h_hi = min(h_hi, pair_index.kappa_max)
        if h_hi < h_lo:
            continue
        sizes = pair_index.lag_sizes(h_lo, h_hi)
        total = int(sizes.sum())
        bins.append(_LagBin(h_lo, h_hi, sizes, np.cumsum(sizes), total))
    return bins


def lag_bin_ranges(h_max, n_bins):
    """Doubling-width lag groups 1,1,2,2,4,4,... covering [1, h_max]."""
    widths = []
    w = 1
    while sum(widths) < h_max and len(widths) < n_bins - 1:
        widths.append(w)
        if len(widths) % 2 == 0:
            w *= 2
    covered = sum(widths)
    if covered < h_max:
        widths.append(h_max - covered)
    ranges = []
    lo = 1
    for w in widths:
        hi = min(lo + w - 1, h_max)
        if hi >= lo:
            ranges.append((lo, hi))
        lo = hi + 1
    return ranges


def remainder_ranges(h_max, kappa_max, n_bins):
    """Geometric lag groups over (h_max, kappa_max]."""
    if kappa_max <= h_max:
        return []
    ratio = (kappa_max / h_max) ** (1.0 / n_bins)
    edges = [h_max]
    for p in range(1, n_bins + 1):
        edges.append(min(kappa_max, max(edges[-1] + 1, int(round(h_max * ratio**p)))))
        if edges[-1] >= kappa_max:
            break
    edges[-1] = kappa_max
    return [(lo + 1, hi) for lo, hi in zip(edges[:-1], edges[1:])]


@dataclass
class DoubleSumPlan:
    """Adaptive-stratification plan for one ordered pair's double sums.

    Built against a specific path (size tables are materialized); apply only
    to the pair index it was built from.
    """

    i: int
    j: int
    n_events_i: int
    budget: int
    rounds: int
    main_bins: list = field(default_factory=list)
    rest_bins: list = field(default_factory=list)
    rest_draws: int = 20

    @property
    def n_main(self):
        return len(self.main_bins)

    def total_pairs(self):
        return sum(b.size for b in self.main_bins) + sum(b.size for b in self.rest_bins)


def default_double_plan(
    path, i, j, budget=1024, rounds=4, h_max=40, n_bins=10, n_rest=5, rest_draws=20
):
    """Plan with doubling-width lag bins on [1, h_max] and a geometric remainder."""
    idx = path.pair_index(i, j)
    if idx.kappa_max == 0:
        return DoubleSumPlan(i, j, int(path.counts[i]), budget, rounds)
    h_cap = min(h_max, idx.kappa_max)
    main = _build_bins(idx, lag_bin_ranges(h_cap, n_bins))
    rest = _build_bins(idx, remainder_ranges(h_cap, idx.kappa_max, n_rest))
    main = [b for b in main if b.size > 0]
    rest = [b for b in rest if b.size > 0]
    return DoubleSumPlan(i, j, int(path.counts[i]), budget, rounds, main, rest, rest_draws)


def estimate_double_sum_adaptive(path, f, i, j, plan, warm_alloc=None, rng=None):
    """Adaptively allocated estimate of the lagged double sum for pair (i, j).

    Returns ``(component_sums, fitted_allocation)``; the allocation is fit on
    the value component from all draws and can warm-start the next call.
    """
    idx = path.pair_index(i, j)
    if plan.n_events_i != path.counts[i]:
        raise PlanError("double-sum plan applied to a different path")
    n_bins = plan.n_main
    if n_bins == 0:
        n_out = getattr(f, "n_out", 1)
        return np.zeros(n_out), np.zeros(0)
    if plan.budget < n_bins * plan.rounds:
        raise PlanError(
            f"budget {plan.budget} cannot give every one of {n_bins} strata one draw "
            f"per round over {plan.rounds} rounds"
        )
    sizes = np.array([b.size for b in plan.main_bins], dtype=np.int64)
    if warm_alloc is not None and len(warm_alloc) == n_bins and np.sum(warm_alloc) > 0:
        alloc = np.asarray(warm_alloc, dtype=float) / np.sum(warm_alloc)
    else:
        alloc = np.full(n_bins, 1.0 / n_bins)
    moments = [StratumMoments(int(s)) for s in sizes]
    round_means = [None] * n_bins
    per_round = plan.budget / plan.rounds
    for _ in range(plan.rounds):
        for p, lag_bin in enumerate(plan.main_bins):
            dq = min(max(1, int(alloc[p] * per_round)), lag_bin.size)
            x1, x2 = lag_bin.draw(dq, rng, idx)
            vals = np.atleast_2d(f(x1, x2))
            # the round mean is unbiased conditionally on the (pre-round) draw
            # count, so equal-weight round averaging stays exactly unbiased
            # under the adaptive allocation; count-pooled moments would let the
            # allocation feedback bias the estimate, and are kept only to fit
            # the allocation itself.
            r_mean = vals.mean(axis=1)
            round_means[p] = r_mean if round_means[p] is None else round_means[p] + r_mean
            moments[p] = moments[p].updated(vals)
        alloc = optimal_allocation(sizes, [np.sqrt(max(m.sigma_sq(), 0.0)) if m.count >= 2 else np.nan for m in moments])
    out = np.zeros_like(moments[0].mean)
    for p, m in enumerate(moments):
        out += m.size * round_means[p] / plan.rounds
    for lag_bin in plan.rest_bins:
        q = min(plan.rest_draws, lag_bin.size)
        x1, x2 = lag_bin.draw(q, rng, idx)
        out += lag_bin.size * f(x1, x2).mean(axis=1)
    return out, alloc
