"""Summand evaluators for the least-squares decomposition.

Each builder returns a vector-valued function: component 0 is the summand
value, the remaining components are its partials in the layout the gradient
assembly expects. The same functions are consumed three ways: exhaustively
(oracle evaluation of the decomposition and the exact gradient), and by the
stratified single-/double-sum Monte Carlo estimators.
"""

import numpy as np

from . import kernels as K


def psi_term(model, theta_k, k, i, value_only=False):
    """f(x1) = [psi_ki(x1); d psi_ki(x1)] for the single sums over T - t^i_m."""
    ker = model.kernels[k][i]
    par = model.kernel_params(theta_k, k, i)

    if value_only:
        def f(x1):
            return ker.psi(par, x1)[None, :]

        f.n_out = 1
        return f

    def f(x1):
        val = ker.psi(par, x1)
        grads = ker.grad_psi(par, x1)
        return np.vstack([val[None, :], grads])

    f.n_out = 1 + ker.n_free
    return f


def ups_diag_term(model, theta_k, k, i, value_only=False):
    """f(x1) = [Upsilon_iik(x1, 0); both-side partials] (single sums)."""
    ker = model.kernels[k][i]
    par = model.kernel_params(theta_k, k, i)

    if value_only:
        def f(x1):
            return K.upsilon(ker, par, ker, par, x1, np.zeros_like(x1))[None, :]

        f.n_out = 1
        f.width = ker.r * ker.r
        return f

    def f(x1):
        zeros = np.zeros_like(x1)
        val, g = K.upsilon_self_with_grads(ker, par, x1, zeros)
        return np.vstack([val[None, :], g])

    f.n_out = 1 + ker.n_free
    f.width = ker.r * ker.r
    return f


def phi_term(model, theta_k, k, j, value_only=False):
    """f(x1, x2) = [phi_kj(x2); d phi_kj(x2)] for the double sums over pair (k, j)."""
    ker = model.kernels[k][j]
    par = model.kernel_params(theta_k, k, j)

    if value_only:
        def f(x1, x2):
            return ker.phi(par, x2)[None, :]

        f.n_out = 1
        f.width = ker.r
        return f

    def f(x1, x2):
        val = ker.phi(par, x2)
        grads = ker.grad_phi(par, x2)
        return np.vstack([val[None, :], grads])

    f.n_out = 1 + ker.n_free
    f.width = ker.r
    return f


def ups_cross_term(model, theta_k, k, i, j, value_only=False):
    """f(x1, x2) = [Upsilon_ijk(x1, x2); i-side partials; j-side partials].

    On the diagonal (i == j) the two sides collapse into one combined block.
    """
    ker_i = model.kernels[k][i]
    ker_j = model.kernels[k][j]
    par_i = model.kernel_params(theta_k, k, i)
    par_j = model.kernel_params(theta_k, k, j)

    if value_only:
        def f(x1, x2):
            return K.upsilon(ker_i, par_i, ker_j, par_j, x1, x2)[None, :]

        f.n_out = 1
        f.width = ker_i.r * ker_j.r
        return f

    if i == j:

        def f(x1, x2):
            val, g = K.upsilon_self_with_grads(ker_i, par_i, x1, x2)
            return np.vstack([val[None, :], g])

        f.n_out = 1 + ker_i.n_free
        f.width = ker_i.r * ker_i.r
        return f

    def f(x1, x2):
        val, gi, gj = K.upsilon_with_grads(ker_i, par_i, ker_j, par_j, x1, x2)
        return np.vstack([val[None, :], gi, gj])

    f.n_out = 1 + ker_i.n_free + ker_j.n_free
    f.width = ker_i.r * ker_j.r
    return f


def exhaustive_single_sum(path, i, f):
    """Sum f over the full set {T - t^i_m}; returns the stacked component sums."""
    x1 = path.horizon - path.times[i]
    if not x1.size:
        return np.zeros(getattr(f, "n_out", 1))
    return f(x1).sum(axis=1)


def exhaustive_double_sum(path, i, j, f, chunk_pairs=1 << 18):
    """Sum f over every lagged pair of the ordered type pair (i, j).

    Enumerates pairs (m, n <= kappa(j,i,m)) in chunks of m to bound memory;
    wide summands (large basis-pair grids) get proportionally smaller chunks.
    """
    chunk_pairs = max(4096, chunk_pairs // max(1, int(getattr(f, "width", 1))))
    idx = path.pair_index(i, j)
    counts = idx.kappa_ji  # pairs contributed by each m
    out = np.zeros(getattr(f, "n_out", 1))
    if not counts.size or counts.max() == 0:
        return out
    t_i = path.times[i]
    t_j = path.times[j]
    start = 0
    n_i = len(t_i)
    while start < n_i:
        stop = start
        total = 0
        while stop < n_i and (total == 0 or total + counts[stop] <= chunk_pairs):
            total += counts[stop]
            stop += 1
        c = counts[start:stop]
        if total:
            m_rep = np.repeat(np.arange(start, stop), c)
            offsets = np.repeat(np.cumsum(c) - c, c)
            n_idx = np.arange(total) - offsets  # 0-based j indices 0..kappa-1
            x1 = path.horizon - t_i[m_rep]
            x2 = t_i[m_rep] - t_j[n_idx]
            out += f(x1, x2).sum(axis=1)
        start = stop
    return out
