"""Stochastic gradient assembly and the projected ADAM loop.

Each dimension k is an independent program: its gradient couples only
through theta_k, so the d fits share nothing but the path. Every sampled
quantity is reproducible from (seed, dimension, iteration, term id) via
counter-style SeedSequence keys.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import strata, terms
from .exceptions import NumericalError
from .lse import assemble_gradient_k

DIVERGENCE_GUARD = 1e8

# term-id -> stable spawn-key codes
_TERM_CODES = {"psi": 0, "ups0": 1, "ups": 2, "phi": 3}


def term_rng(seed, k, iteration, term_id):
    """Deterministic per-term generator keyed by (seed, dim, iteration, term)."""
    code = (_TERM_CODES[term_id[0]],) + tuple(int(v) for v in term_id[1:])
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(k), int(iteration)) + code)
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class StrataConfig:
    """Sampling budgets and stratification hyperparameters."""

    single_budget: int = 1024
    double_budget: int = 1024
    h_max: int = 40
    n_lag_bins: int = 10
    rounds: int = 4
    n_rest_bins: int = 5
    rest_draws: int = 20
    ema_weight: float = 0.6
    tail_target: int = 1000
    final_gap: int = 50

    def exhaustive(self, path):
        """Budgets covering every index/pair: the estimator reduces to exact sums."""
        total = int(path.total_events)
        pairs = 0
        for i in range(path.d):
            for j in range(path.d):
                pairs = max(pairs, int(path.pair_index(i, j).kappa_ji.sum()))
        # uniform initial allocation must still hand every stratum its full
        # size in round one, hence the n_lag_bins multiplier
        return StrataConfig(
            single_budget=total + 1,
            double_budget=max(self.n_lag_bins * (pairs + 1), 4),
            h_max=max(1, total),
            n_lag_bins=self.n_lag_bins,
            rounds=1,
            n_rest_bins=self.n_rest_bins,
            rest_draws=max(pairs + 1, 1),
            ema_weight=self.ema_weight,
            tail_target=self.tail_target,
            final_gap=self.final_gap,
        )


@dataclass
class SolverConfig:
    """ADAM schedule and run control.

    Starts spread over a ladder of decay scales are screened with short pilot
    runs scored by the exact objective on a prefix of the path; the best
    pilot endpoint continues for the full schedule. The decaying learning rate
    caps how far an iterate can travel, so a bad initial decay scale would
    otherwise dominate the error at desk scale.
    """

    n_iter: int = 1000
    learning_rate: float = 0.05
    rate_halving_period: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    n_starts: int = 4
    pilot_iters: int = 120
    early_stop: bool = True
    early_stop_tol: float = 1e-4
    early_stop_patience: int = 50
    early_stop_ema: float = 0.95
    log_allocations: bool = True


@dataclass
class AdamState:
    """Raw first/second moments plus the step counter (bias-corrected at use)."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def learning_rate(rate0, t, halving_period=200):
    """Step size halved every `halving_period` iterations."""
    return rate0 / 2 ** (t // halving_period)


def adam_step(state, theta, grad, lower_bounds, config):
    """One bias-corrected ADAM update with projection onto the feasible box."""
    grad = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise NumericalError(
            "non-finite gradient components",
            payload={"indices": bad.tolist(), "theta": np.asarray(theta).tolist(), "t": state.t + 1},
        )
    t = state.t + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grad
    v = config.beta2 * state.v + (1.0 - config.beta2) * grad * grad
    m_hat = m / (1.0 - config.beta1**t)
    v_hat = v / (1.0 - config.beta2**t)
    rate = learning_rate(config.learning_rate, t, config.rate_halving_period)
    step = -rate * m_hat / (np.sqrt(v_hat) + config.eps)
    theta_new = np.maximum(theta + step, lower_bounds)
    return theta_new, AdamState(m, v, t)


# -- plans and per-dimension gradient --------------------------------------------


def build_plans(path, model, k, cfg):
    """Stratification plans for every sum the dimension-k gradient touches."""
    plans = {"single": {}, "double": {}}
    for i in range(path.d):
        plans["single"][i] = strata.default_single_plan(
            int(path.counts[i]), cfg.single_budget, cfg.tail_target, cfg.final_gap
        )
        plans["double"][("phi", i)] = strata.default_double_plan(
            path, k, i, cfg.double_budget, cfg.rounds, cfg.h_max, cfg.n_lag_bins,
            cfg.n_rest_bins, cfg.rest_draws,
        )
        for j in range(path.d):
            plans["double"][("ups", i, j)] = strata.default_double_plan(
                path, i, j, cfg.double_budget, cfg.rounds, cfg.h_max, cfg.n_lag_bins,
                cfg.n_rest_bins, cfg.rest_draws,
            )
    return plans


def estimate_terms(path, model, theta_k, k, plans, warm=None, seed=0, iteration=0):
    """Stratified estimates of every sum the dimension-k objective touches.

    ``warm`` maps double-sum term ids to their two previous fitted allocations
    (EMA warm start); it is updated in place. Returns the per-term stacked
    [value; partials] sums and this call's fitted allocations.
    """
    warm = warm if warm is not None else {}
    term_sums = {}
    fitted = {}
    cfg = plans.get("cfg")
    ema_w = cfg.ema_weight if isinstance(cfg, StrataConfig) else 0.6
    for i in range(model.d):
        rng = term_rng(seed, k, iteration, ("psi", i))
        term_sums[("psi", i)] = strata.estimate_single_sum(
            path, terms.psi_term(model, theta_k, k, i), i, plans["single"][i], rng
        )
        rng = term_rng(seed, k, iteration, ("ups0", i))
        term_sums[("ups0", i)] = strata.estimate_single_sum(
            path, terms.ups_diag_term(model, theta_k, k, i), i, plans["single"][i], rng
        )
        rng = term_rng(seed, k, iteration, ("phi", i))
        term_sums[("phi", i)], alloc = strata.estimate_double_sum_adaptive(
            path,
            terms.phi_term(model, theta_k, k, i),
            k,
            i,
            plans["double"][("phi", i)],
            warm_alloc=_warm_start(warm, ("phi", i), ema_w),
            rng=rng,
        )
        fitted[("phi", i)] = alloc
        for j in range(model.d):
            rng = term_rng(seed, k, iteration, ("ups", i, j))
            term_sums[("ups", i, j)], alloc = strata.estimate_double_sum_adaptive(
                path,
                terms.ups_cross_term(model, theta_k, k, i, j),
                i,
                j,
                plans["double"][("ups", i, j)],
                warm_alloc=_warm_start(warm, ("ups", i, j), ema_w),
                rng=rng,
            )
            fitted[("ups", i, j)] = alloc
    for term_id, alloc in fitted.items():
        prev, _ = warm.get(term_id, (None, None))
        warm[term_id] = (alloc, prev)
    return term_sums, fitted


def gradient_estimate(path, model, theta_k, k, plans, warm=None, seed=0, iteration=0):
    """Unbiased stochastic estimate of the dimension-k partial gradient."""
    term_sums, fitted = estimate_terms(path, model, theta_k, k, plans, warm, seed, iteration)
    grad = assemble_gradient_k(model, theta_k, k, path.event_rate(k), path.horizon, term_sums)
    return grad, fitted


def objective_estimate(path, model, theta_k, k, plans, warm=None, seed=0, iteration=0):
    """Unbiased stochastic estimate of the dimension-k partial objective."""
    term_sums, _ = estimate_terms(path, model, theta_k, k, plans, warm, seed, iteration)
    T = path.horizon
    mu_k = model.mu_of(theta_k)
    val = mu_k * mu_k - 2.0 * path.event_rate(k) * mu_k
    for i in range(model.d):
        val += 2.0 * mu_k / T * term_sums[("psi", i)][0]
        val += term_sums[("ups0", i)][0] / T
        val -= 2.0 / T * term_sums[("phi", i)][0]
        for j in range(model.d):
            val += 2.0 / T * term_sums[("ups", i, j)][0]
    return float(val)


def _warm_start(warm, term_id, ema_weight):
    prev, prev2 = warm.get(term_id, (None, None))
    if prev is None:
        return None
    if prev2 is None or len(prev2) != len(prev):
        return prev
    return strata.ema_allocation(prev, prev2, ema_weight)


# -- fit loop ------------------------------------------------------------------


@dataclass
class FitRecord:
    """Everything one fit produced: trajectories, final estimate, run metadata."""

    seed: int
    theta: np.ndarray = None
    theta_paths: list = field(default_factory=list)  # per k: (n_iter+1, n_params_k)
    grad_paths: list = field(default_factory=list)  # per k: (n_iter, n_params_k)
    alloc_paths: list = field(default_factory=list)  # per k: {term_id: (n_iter, n_bins)}
    wall_times: list = field(default_factory=list)  # per k, seconds
    n_iterations: list = field(default_factory=list)  # per k (early stop may shorten)
    diverged: list = field(default_factory=list)  # per k bool
    messages: list = field(default_factory=list)

    @property
    def converged(self):
        return not any(self.diverged)


def _adam_run(path, model, k, theta0_k, plans, lower, solver_cfg, n_iter, seed_tag):
    """A bare ADAM loop used by the pilot screening; returns the last iterate."""
    theta_k = np.maximum(np.asarray(theta0_k, dtype=float).copy(), lower)
    state = AdamState.zeros(len(theta_k))
    warm = {}
    for it in range(1, n_iter + 1):
        grad, _ = gradient_estimate(
            path, model, theta_k, k, plans, warm=warm, seed=seed_tag, iteration=it
        )
        theta_k, state = adam_step(state, theta_k, grad, lower, solver_cfg)
        if np.any(np.abs(theta_k) > DIVERGENCE_GUARD):
            break
    return theta_k


def scoring_prefix(path, target_events=2500):
    """A prefix of the path small enough for exact objective evaluation.

    Pilot endpoints are ranked on this shared sub-path, so the comparison is
    exact and paired; stochastic objective estimates at realistic budgets are
    too noisy to separate nearby basins.
    """
    from .paths import EventPath

    if path.total_events <= target_events:
        return path
    merged = np.sort(np.concatenate(path.times))
    t_cut = float(merged[target_events - 1])
    sub = EventPath([t[t <= t_cut] for t in path.times], horizon=t_cut)
    return sub if sub.is_nontrivial() else path


def select_start(path, model, k, solver_cfg, strata_cfg, plans, lower):
    """Screen starts spread over a ladder of decay scales with short pilot
    runs; keep the lowest exact prefix-path objective."""
    from .lse import partial_lse_exhaustive

    if solver_cfg.n_starts > 1:
        ladder = np.geomspace(0.3, 6.0, solver_cfg.n_starts)
    else:
        ladder = np.array([1.0])

    def draw_start(index):
        seq = np.random.SeedSequence(entropy=int(solver_cfg.seed), spawn_key=(int(k), index, 99))
        rng = np.random.Generator(np.random.Philox(seq))
        return model.random_init_k(path, k, rng, beta_scale=float(ladder[index]))

    if solver_cfg.n_starts <= 1 or solver_cfg.pilot_iters <= 0:
        return draw_start(0)
    prefix = scoring_prefix(path)
    best_point = None
    best_score = np.inf
    for start in range(solver_cfg.n_starts):
        theta0 = draw_start(start)
        pilot_seed = (solver_cfg.seed * 1000 + 7919 * (start + 1)) % (2**62)
        end_point = _adam_run(
            path, model, k, theta0, plans, lower, solver_cfg, solver_cfg.pilot_iters, pilot_seed
        )
        if np.all(np.isfinite(end_point)) and np.all(np.abs(end_point) <= DIVERGENCE_GUARD):
            score = partial_lse_exhaustive(prefix, model, end_point, k)
        else:
            score = np.inf
        if score < best_score:
            best_score = score
            best_point = end_point
    if best_point is None:
        best_point = draw_start(0)
    # the winning pilot's endpoint seeds the main run: it is already a pilot's
    # worth of travel closer to the basin, and the rate schedule restarts fresh
    return best_point


def fit_dimension(path, model, k, theta0_k, solver_cfg, strata_cfg):
    """Run one dimension's projected-ADAM program; returns its trajectory."""
    t_start = time.perf_counter()
    plans = build_plans(path, model, k, strata_cfg)
    plans["cfg"] = strata_cfg
    lower = model.lower_bounds_k(k)
    if theta0_k is None:
        theta0_k = select_start(path, model, k, solver_cfg, strata_cfg, plans, lower)
    theta_k = np.maximum(np.asarray(theta0_k, dtype=float).copy(), lower)
    state = AdamState.zeros(len(theta_k))
    warm = {}
    thetas = [theta_k.copy()]
    grads = []
    allocs = {}
    grad_norm_ema = None
    quiet = 0
    diverged = False
    message = ""
    n_done = 0
    for it in range(1, solver_cfg.n_iter + 1):
        grad, fitted = gradient_estimate(
            path, model, theta_k, k, plans, warm=warm, seed=solver_cfg.seed, iteration=it
        )
        theta_k, state = adam_step(state, theta_k, grad, lower, solver_cfg)
        thetas.append(theta_k.copy())
        grads.append(grad)
        if solver_cfg.log_allocations:
            for term_id, alloc in fitted.items():
                allocs.setdefault(term_id, []).append(np.asarray(alloc))
        n_done = it
        if np.any(np.abs(theta_k) > DIVERGENCE_GUARD):
            diverged = True
            message = f"dimension {k}: |theta| exceeded {DIVERGENCE_GUARD:g} at iteration {it}"
            break
        norm = float(np.linalg.norm(grad))
        grad_norm_ema = (
            norm
            if grad_norm_ema is None
            else solver_cfg.early_stop_ema * grad_norm_ema + (1 - solver_cfg.early_stop_ema) * norm
        )
        if solver_cfg.early_stop:
            if grad_norm_ema < solver_cfg.early_stop_tol * (1.0 + float(np.linalg.norm(theta_k))):
                quiet += 1
                if quiet >= solver_cfg.early_stop_patience:
                    message = f"dimension {k}: early stop at iteration {it}"
                    break
            else:
                quiet = 0
    return {
        "theta_path": np.asarray(thetas),
        "grad_path": np.asarray(grads) if grads else np.zeros((0, len(theta_k))),
        "alloc_path": {t_id: np.asarray(a) for t_id, a in allocs.items()},
        "wall_time": time.perf_counter() - t_start,
        "n_iter": n_done,
        "diverged": diverged,
        "message": message,
    }


def fit(path, model, theta0=None, solver_cfg=None, strata_cfg=None):
    """Fit all d independent per-dimension programs; deterministic given seed."""
    path.require_nontrivial()
    solver_cfg = solver_cfg or SolverConfig()
    strata_cfg = strata_cfg or StrataConfig()
    if theta0 is None:
        theta0_ks = [None] * model.d  # chosen by pilot screening per dimension
    else:
        theta0 = np.asarray(theta0, dtype=float)
        theta0_ks = [model.theta_k(theta0, k).copy() for k in range(model.d)]
    record = FitRecord(seed=solver_cfg.seed)
    finals = []
    for k in range(model.d):
        result = fit_dimension(path, model, k, theta0_ks[k], solver_cfg, strata_cfg)
        record.theta_paths.append(result["theta_path"])
        record.grad_paths.append(result["grad_path"])
        record.alloc_paths.append(result["alloc_path"])
        record.wall_times.append(result["wall_time"])
        record.n_iterations.append(result["n_iter"])
        record.diverged.append(result["diverged"])
        if result["message"]:
            record.messages.append(result["message"])
        finals.append(result["theta_path"][-1])
    record.theta = np.concatenate(finals)
    return record
