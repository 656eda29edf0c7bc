"""The least-squares objective: quadrature oracle, closed-form decomposition,
and the exact (exhaustive) gradient.

``lse_exact`` integrates the squared intensity directly and costs
O(N_T^2 * quadrature); it exists as the independent oracle for the
decomposition and is capped to modest path sizes. ``lse_decomposed`` and
``grad_lse_exact`` evaluate the sum decomposition exhaustively with the same
summand functions the stochastic estimators sample.
"""

import warnings

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from . import terms
from .exceptions import ValidationError

# refuse the O(N^2) oracle beyond this; it is a test fixture, not a fit path
EXACT_EVENT_CAP = 10_000


def _check_oracle_path(path):
    path.require_nontrivial()
    if path.total_events > EXACT_EVENT_CAP:
        raise ValidationError(
            f"lse_exact is an O(N^2) oracle, refusing N_T={path.total_events} > {EXACT_EVENT_CAP}"
        )


def lse_exact(path, model, theta, quad_tol=None, quad_limit=200):
    """Least-squares error by direct quadrature of the squared intensity.

    (1/T) sum_k int_0^T lambda_k(t)^2 dt - (2/T) sum_k sum_m lambda_k(t^k_m),
    with the integral done interval-by-interval between jumps (the intensity
    is smooth there apart from kernel kinks, which adaptive quadrature
    absorbs).
    """
    _check_oracle_path(path)
    theta = model.validate_theta(theta)
    T = path.horizon
    tol = quad_tol if quad_tol is not None else 1e-10 * T
    grid = np.unique(np.concatenate([np.array([0.0, T])] + list(path.times)))
    total = 0.0
    for k in range(model.d):
        th_k = model.theta_k(theta, k)
        mu_k = model.mu_of(th_k)
        kers = [model.kernels[k][i] for i in range(model.d)]
        pars = [model.kernel_params(th_k, k, i) for i in range(model.d)]

        integral = 0.0
        with warnings.catch_warnings():
            # kernel kinks inside inter-jump intervals trip quad's roundoff
            # heuristics at the tight per-interval tolerance; accuracy is
            # cross-checked against an independent scheme in the tests
            warnings.simplefilter("ignore", IntegrationWarning)
            for a, b in zip(grid[:-1], grid[1:]):
                if b <= a:
                    continue
                prefixes = [
                    path.times[i][: np.searchsorted(path.times[i], a, side="right")] for i in range(model.d)
                ]

                def lam(t):
                    acc = mu_k
                    for ker, par, pref in zip(kers, pars, prefixes):
                        if pref.size:
                            acc += ker.phi(par, t - pref).sum()
                    return acc * acc

                integral += quad(lam, a, b, epsabs=tol, limit=quad_limit)[0]

        jump_term = path.counts[k] * mu_k
        for j in range(model.d):
            f = terms.phi_term(model, th_k, k, j)
            jump_term += terms.exhaustive_double_sum(path, k, j, f)[0]
        total += integral / T - 2.0 * jump_term / T
    return float(total)


def lse_decomposed(path, model, theta, k=None):
    """Closed-form decomposition of the LSE, summed exhaustively.

    With ``k`` given, returns the partial objective for that dimension;
    otherwise the sum over all dimensions (equal to ``lse_exact`` up to
    quadrature error).
    """
    path.require_nontrivial()
    theta = model.validate_theta(theta)
    if k is None:
        return float(sum(lse_decomposed(path, model, theta, k) for k in range(model.d)))
    return partial_lse_exhaustive(path, model, model.theta_k(theta, k), k)


def partial_lse_exhaustive(path, model, theta_k, k):
    """The dimension-k partial objective from theta_k alone (exhaustive sums)."""
    T = path.horizon
    th_k = np.asarray(theta_k, dtype=float)
    mu_k = model.mu_of(th_k)
    eta_k = path.event_rate(k)
    total = mu_k * mu_k - 2.0 * eta_k * mu_k
    for i in range(model.d):
        s_psi = terms.exhaustive_single_sum(path, i, terms.psi_term(model, th_k, k, i, value_only=True))[0]
        s_ups0 = terms.exhaustive_single_sum(path, i, terms.ups_diag_term(model, th_k, k, i, value_only=True))[0]
        total += 2.0 * mu_k / T * s_psi + s_ups0 / T
        for j in range(model.d):
            s_ups = terms.exhaustive_double_sum(
                path, i, j, terms.ups_cross_term(model, th_k, k, i, j, value_only=True)
            )[0]
            total += 2.0 / T * s_ups
    for j in range(model.d):
        s_phi = terms.exhaustive_double_sum(path, k, j, terms.phi_term(model, th_k, k, j, value_only=True))[0]
        total -= 2.0 / T * s_phi
    return float(total)


def assemble_gradient_k(model, theta_k, k, eta_k, T, term_sums):
    """Assemble the partial-objective gradient from per-term component sums.

    ``term_sums`` maps term ids to stacked [value; partial...] sums:
    ("psi", i) and ("ups0", i) single sums, ("phi", j) and ("ups", i, j)
    double sums. Shared by the exact gradient and the stochastic estimator.
    """
    mu_k = model.mu_of(theta_k)
    grad = np.zeros(model.n_params_k(k))
    psi_vals = sum(term_sums[("psi", i)][0] for i in range(model.d))
    grad[0] = 2.0 * (mu_k - eta_k + psi_vals / T)
    for p in range(model.d):
        sl = model.kernel_slice(k, p)
        n_free = model.kernels[k][p].n_free
        acc = np.zeros(n_free)
        for i in range(model.d):
            if i == p:
                continue
            # Upsilon_{ipk}: p is the second (j) side
            s = term_sums[("ups", i, p)]
            n_i = model.kernels[k][i].n_free
            acc += 2.0 / T * s[1 + n_i : 1 + n_i + n_free]
            # Upsilon_{pik}: p is the first (i) side
            s = term_sums[("ups", p, i)]
            acc += 2.0 / T * s[1 : 1 + n_free]
        acc += 2.0 / T * term_sums[("ups", p, p)][1 : 1 + n_free]
        acc -= 2.0 / T * term_sums[("phi", p)][1 : 1 + n_free]
        acc += 2.0 * mu_k / T * term_sums[("psi", p)][1 : 1 + n_free]
        acc += term_sums[("ups0", p)][1 : 1 + n_free] / T
        grad[sl] = acc
    return grad


def grad_lse_exact(path, model, theta, k):
    """Exact gradient of the partial LSE for dimension k (O(N_T^2))."""
    _check_oracle_path(path)
    theta = model.validate_theta(theta)
    th_k = model.theta_k(theta, k)
    term_sums = {}
    for i in range(model.d):
        term_sums[("psi", i)] = terms.exhaustive_single_sum(path, i, terms.psi_term(model, th_k, k, i))
        term_sums[("ups0", i)] = terms.exhaustive_single_sum(path, i, terms.ups_diag_term(model, th_k, k, i))
        term_sums[("phi", i)] = terms.exhaustive_double_sum(path, k, i, terms.phi_term(model, th_k, k, i))
        for j in range(model.d):
            term_sums[("ups", i, j)] = terms.exhaustive_double_sum(
                path, i, j, terms.ups_cross_term(model, th_k, k, i, j)
            )
    return assemble_gradient_k(model, th_k, k, path.event_rate(k), path.horizon, term_sums)
