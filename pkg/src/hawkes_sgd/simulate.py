"""Exact simulation of linear Hawkes paths, plus the compensator.

Two independent routes grow the test surface: the branching (cluster)
construction -- immigrants then recursive offspring generations, all
vectorized -- and Ogata-style thinning against a non-increasing intensity
envelope. Both are exact for stable models.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .model import HawkesModel
from .paths import EventPath
from .validation import check_seed


@dataclass
class GroundTruth:
    """A fully specified model (structure + parameter values)."""

    model: HawkesModel
    theta: np.ndarray

    def __post_init__(self):
        self.theta = self.model.validate_theta(self.theta)

    @property
    def d(self):
        return self.model.d

    def mu(self):
        return np.array([self.model.mu_of(self.model.theta_k(self.theta, k)) for k in range(self.d)])

    def l1_matrix(self):
        return self.model.l1_matrix(self.theta)

    def spectral_radius(self):
        return self.model.spectral_radius(self.theta)

    def require_stable(self):
        rho = self.spectral_radius()
        if rho >= 1.0:
            raise ValidationError(
                f"unstable ground truth: spectral radius of the branching matrix is {rho:.4f} >= 1"
            )
        return rho


@dataclass
class ClusterStats:
    """Branching tallies from one cluster simulation (children per parent type)."""

    children: np.ndarray  # children[k, j]: type-k children spawned by type-j parents
    parents: np.ndarray  # parents[j]: number of type-j events that acted as parents

    def mean_offspring(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.parents[None, :] > 0, self.children / self.parents[None, :], np.nan)


def simulate_cluster(gt, horizon, rng=None, seed=None, collect_stats=False):
    """Exact path on [0, horizon] via the branching representation.

    Immigrants of type k arrive as a Poisson(mu_k * T) process; every event of
    type j spawns Poisson(||phi_kj||_1) type-k children at offsets drawn from
    the normalized kernel; children past the horizon are discarded (their own
    descendants would also lie past it).
    """
    gt.require_stable()
    rng = _resolve_rng(rng, seed)
    T = float(horizon)
    d = gt.d
    mu = gt.mu()
    l1 = gt.l1_matrix()
    kernels = gt.model.kernels
    pars = [
        [gt.model.kernel_params(gt.model.theta_k(gt.theta, k), k, i) for i in range(d)]
        for k in range(d)
    ]
    events = [[] for _ in range(d)]
    frontier = []
    for k in range(d):
        n_imm = rng.poisson(mu[k] * T)
        imm = np.sort(rng.uniform(0.0, T, size=n_imm))
        events[k].append(imm)
        frontier.append(imm)
    children_tally = np.zeros((d, d))
    parent_tally = np.zeros(d)
    while any(arr.size for arr in frontier):
        new_frontier = [[] for _ in range(d)]
        for j in range(d):
            parents = frontier[j]
            if not parents.size:
                continue
            parent_tally[j] += parents.size
            for k in range(d):
                if l1[k, j] <= 0.0:
                    continue
                counts = rng.poisson(l1[k, j], size=parents.size)
                total = int(counts.sum())
                children_tally[k, j] += total
                if total == 0:
                    continue
                births = np.repeat(parents, counts) + kernels[k][j].sample(pars[k][j], total, rng)
                births = births[births <= T]
                if births.size:
                    new_frontier[k].append(births)
        frontier = [np.sort(np.concatenate(lst)) if lst else np.zeros(0) for lst in new_frontier]
        for k in range(d):
            if frontier[k].size:
                events[k].append(frontier[k])
    merged = [np.sort(np.concatenate(lst)) if lst else np.zeros(0) for lst in events]
    merged = [_break_ties(arr) for arr in merged]
    path = EventPath(merged, horizon=T)
    if collect_stats:
        return path, ClusterStats(children_tally, parent_tally)
    return path


def _break_ties(arr):
    """Nudge exact duplicate draws apart by one ulp (orderliness)."""
    if arr.size < 2:
        return arr
    for _ in range(3):
        dup = np.flatnonzero(np.diff(arr) <= 0.0)
        if not dup.size:
            return arr
        arr[dup + 1] = np.nextafter(arr[dup + 1], np.inf)
        arr = np.sort(arr)
    return np.unique(arr)


def total_envelope(gt, path_times, t):
    """Upper bound on the total intensity valid for every time strictly after t.

    Events at exactly t are included: they excite the future even though the
    left-limit intensity at t does not see them yet.
    """
    bound = float(gt.mu().sum())
    for k in range(gt.d):
        th_k = gt.model.theta_k(gt.theta, k)
        for j in range(gt.d):
            past = path_times[j][path_times[j] <= t]
            if past.size:
                par = gt.model.kernel_params(th_k, k, j)
                bound += gt.model.kernels[k][j].envelope(par, t - past).sum()
    return bound


def simulate_thinning(gt, horizon, rng=None, seed=None):
    """Exact path on [0, horizon] by thinning a non-increasing envelope.

    Every family provides sup_{y>=x} phi(y), so the dominating rate computed
    at the current time stays valid until the next accepted event.
    """
    gt.require_stable()
    rng = _resolve_rng(rng, seed)
    T = float(horizon)
    d = gt.d
    times = [np.zeros(0) for _ in range(d)]
    th = [gt.model.theta_k(gt.theta, k) for k in range(d)]
    t = 0.0
    while True:
        bound = total_envelope(gt, times, t)
        t = t + rng.exponential(1.0 / bound)
        if t >= T:
            break
        lam = np.array(
            [_intensity_at(gt.model, th[k], k, times, t) for k in range(d)]
        )
        lam_tot = float(lam.sum())
        if rng.uniform() * bound <= lam_tot:
            k = int(rng.choice(d, p=lam / lam_tot))
            times[k] = np.append(times[k], t)
    return EventPath([_break_ties(arr) for arr in times], horizon=T)


def _intensity_at(model, theta_k, k, times, t):
    acc = model.mu_of(theta_k)
    for i in range(model.d):
        past = times[i][times[i] < t]
        if past.size:
            par = model.kernel_params(theta_k, k, i)
            acc += model.kernels[k][i].phi(par, t - past).sum()
    return acc


def compensator(path, model, theta, k, t):
    """Integrated intensity Lambda_k(t) = mu_k t + sum_i sum_{t^i_n < t} psi_ki(t - t^i_n)."""
    t = float(t)
    if t > path.horizon:
        raise ValidationError(f"t={t} is past the horizon {path.horizon}")
    th_k = model.theta_k(np.asarray(theta, dtype=float), k)
    out = model.mu_of(th_k) * t
    for i in range(model.d):
        past = path.times[i][path.times[i] < t]
        if past.size:
            par = model.kernel_params(th_k, k, i)
            out += model.kernels[k][i].psi(par, t - past).sum()
    return float(out)


def compensator_at_events(path, model, theta, k, chunk=256):
    """Lambda_k evaluated at every type-k event time (chunked O(N^2))."""
    th_k = model.theta_k(np.asarray(theta, dtype=float), k)
    t_k = path.times[k]
    out = np.full(t_k.shape, model.mu_of(th_k)) * t_k
    for i in range(model.d):
        t_i = path.times[i]
        if not t_i.size:
            continue
        ker = model.kernels[k][i]
        par = model.kernel_params(th_k, k, i)
        counts = np.searchsorted(t_i, t_k, side="left")
        for lo in range(0, len(t_k), chunk):
            hi = min(lo + chunk, len(t_k))
            c = counts[lo:hi]
            total = int(c.sum())
            if not total:
                continue
            rep = np.repeat(np.arange(lo, hi), c)
            offs = np.repeat(np.cumsum(c) - c, c)
            n_idx = np.arange(total) - offs
            vals = ker.psi(par, t_k[rep] - t_i[n_idx])
            out[lo:hi] += np.bincount(rep - lo, weights=vals, minlength=hi - lo)
    return out


def _resolve_rng(rng, seed):
    if rng is not None:
        return rng
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(check_seed(seed))))
