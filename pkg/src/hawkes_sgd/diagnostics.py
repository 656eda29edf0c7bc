"""Goodness-of-fit via time rescaling, and parameter-space error metrics.

Rescaled event times of the true model form unit Poisson processes, so the
inter-arrival residuals are standard exponential and their probability
transform is uniform; the KS machinery quantifies departures. The two
metrics compare a candidate model against a ground truth in L2 (squared
kernel distance) and in a Wasserstein form (baselines, normalized kernel
shapes, and masses).
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .simulate import compensator_at_events


@dataclass
class ResidualSet:
    """Per-dimension rescaled times, inter-arrival residuals, uniform transforms."""

    rescaled: list  # s^k_m = Lambda_k(t^k_m)
    residuals: list  # increments of s (standard exponential under the true model)
    uniforms: list  # z = 1 - exp(-residual)

    def __iter__(self):
        return iter(zip(self.rescaled, self.residuals, self.uniforms))


def residuals(path, model, theta):
    """Time-rescaling residuals of the model on the path (O(N^2) worst case)."""
    rescaled, deltas, uniforms = [], [], []
    for k in range(model.d):
        s = compensator_at_events(path, model, theta, k)
        ds = np.diff(s, prepend=0.0)
        rescaled.append(s)
        deltas.append(ds)
        uniforms.append(1.0 - np.exp(-ds))
    return ResidualSet(rescaled, deltas, uniforms)


def ks_statistic(z, min_n=10):
    """One-sample KS test of z against Uniform[0, 1].

    Returns (D, asymptotic p-value, 99% critical value 1.628/sqrt(n)).
    """
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    if n < min_n:
        raise ValueError(f"need at least {min_n} values for the KS statistic, got {n}")
    grid = np.arange(1, n + 1) / n
    d_plus = np.max(grid - z)
    d_minus = np.max(z - (grid - 1.0 / n))
    d_stat = max(d_plus, d_minus)
    return float(d_stat), float(kolmogorov_sf(np.sqrt(n) * d_stat)), float(1.628 / np.sqrt(n))


def kolmogorov_sf(lam, n_terms=100):
    """Asymptotic Kolmogorov survival function 2 sum (-1)^{j-1} exp(-2 j^2 lam^2)."""
    if lam <= 0:
        return 1.0
    j = np.arange(1, n_terms + 1)
    return float(np.clip(2.0 * np.sum((-1.0) ** (j - 1) * np.exp(-2.0 * j**2 * lam**2)), 0.0, 1.0))


def bridge_series(z, crit_scale=1.628):
    """Rescaled probability-plot series sqrt(n-1) (z_(m) - m/(n+1)) with KS band.

    Uses m/(n+1) plotting positions. Returns (positions, series, band) where
    the 99% band is the constant +-band line.
    """
    z = np.sort(np.asarray(z, dtype=float))
    n = z.size
    positions = np.arange(1, n + 1) / (n + 1)
    series = np.sqrt(max(n - 1, 1)) * (z - positions)
    band = crit_scale * np.sqrt((n - 1) / n) if n > 1 else crit_scale
    return positions, series, float(band)


def qq_series(residual_values):
    """Q-Q data of residuals against the standard exponential distribution."""
    emp = np.sort(np.asarray(residual_values, dtype=float))
    n = emp.size
    theo = -np.log1p(-np.arange(1, n + 1) / (n + 1))
    return theo, emp


# -- parameter-space metrics ------------------------------------------------------


def _kernel_l2_distance_sq(ker_a, par_a, ker_b, par_b, tol=1e-10):
    """int (phi_a - phi_b)^2 by adaptive quadrature with doubling tail windows."""

    def integrand(x):
        xv = np.atleast_1d(x)
        return float((ker_a.phi(par_a, xv)[0] - ker_b.phi(par_b, xv)[0]) ** 2)

    upper = max(_tail_quantile(ker_a, par_a, 0.5), _tail_quantile(ker_b, par_b, 0.5), 1.0)
    total = 0.0
    lo = 0.0
    while True:
        piece = quad(integrand, lo, upper, epsabs=tol, limit=200)[0]
        total += piece
        if piece < tol and lo > 0.0:
            break
        lo, upper = upper, 2.0 * upper
        if lo > 1e12:
            break
    return total


def _tail_quantile(ker, par, prob):
    """x with psi(x)/l1 >= prob, by doubling + bisection on the kernel CDF."""
    mass = ker.l1(par)
    if mass <= 0:
        return 1.0
    hi = 1.0
    while float(ker.psi(par, np.array([hi]))[0]) < prob * mass:
        hi *= 2.0
        if hi > 1e12:
            return hi
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(ker.psi(par, np.array([mid]))[0]) < prob * mass:
            lo = mid
        else:
            hi = mid
    return hi


def l2_rel_err(gt, model, theta):
    """Relative squared-L2 distance: baselines term plus kernel-matrix term."""
    theta = model.validate_theta(theta)
    mu_gt = gt.mu()
    mu = np.array([model.mu_of(model.theta_k(theta, k)) for k in range(model.d)])
    out = float(np.sum((mu_gt - mu) ** 2) / np.sum(mu_gt**2))
    num = 0.0
    den = 0.0
    for k in range(model.d):
        th_gt = gt.model.theta_k(gt.theta, k)
        th = model.theta_k(theta, k)
        for i in range(model.d):
            ker_gt = gt.model.kernels[k][i]
            par_gt = gt.model.kernel_params(th_gt, k, i)
            ker = model.kernels[k][i]
            par = model.kernel_params(th, k, i)
            num += _kernel_l2_distance_sq(ker_gt, par_gt, ker, par)
            den += ker_gt.l2_sq(par_gt)
    return out + num / den


def wasserstein_1d(ker_a, par_a, ker_b, par_b, tol=1e-10):
    """W1 of the normalized kernels: integral of |F_a - F_b| via their CDFs."""
    mass_a = ker_a.l1(par_a)
    mass_b = ker_b.l1(par_b)
    if mass_a <= 0 or mass_b <= 0:
        raise ValueError("Wasserstein distance needs kernels with positive mass")
    upper = max(
        _tail_quantile(ker_a, par_a, 1.0 - 1e-8), _tail_quantile(ker_b, par_b, 1.0 - 1e-8)
    )

    def integrand(x):
        xv = np.atleast_1d(x)
        fa = float(ker_a.psi(par_a, xv)[0]) / mass_a
        fb = float(ker_b.psi(par_b, xv)[0]) / mass_b
        return abs(fa - fb)

    return quad(integrand, 0.0, upper, epsabs=tol, limit=500)[0]


def wass_err(gt, model, theta):
    """Baseline L1 error + shape Wasserstein errors + mass errors."""
    theta = model.validate_theta(theta)
    mu_gt = gt.mu()
    mu = np.array([model.mu_of(model.theta_k(theta, k)) for k in range(model.d)])
    out = float(np.sum(np.abs(mu_gt - mu)))
    for k in range(model.d):
        th_gt = gt.model.theta_k(gt.theta, k)
        th = model.theta_k(theta, k)
        for i in range(model.d):
            ker_gt = gt.model.kernels[k][i]
            par_gt = gt.model.kernel_params(th_gt, k, i)
            ker = model.kernels[k][i]
            par = model.kernel_params(th, k, i)
            out += wasserstein_1d(ker_gt, par_gt, ker, par)
            out += abs(ker_gt.l1(par_gt) - ker.l1(par))
    return out


@dataclass
class MetricReport:
    """Both evaluation metrics plus per-kernel contribution breakdowns."""

    l2_rel_err: float
    wass_err: float
    l2_kernel_terms: np.ndarray  # (d, d) unnormalized squared-L2 distances
    wass_kernel_terms: np.ndarray  # (d, d) shape + mass contributions

    def __str__(self):
        return f"MetricReport(l2_rel_err={self.l2_rel_err:.6g}, wass_err={self.wass_err:.6g})"


def metric_report(gt, model, theta):
    """Evaluate both metrics with their per-kernel breakdowns in one pass."""
    theta = model.validate_theta(theta)
    d = model.d
    mu_gt = gt.mu()
    mu = np.array([model.mu_of(model.theta_k(theta, k)) for k in range(d)])
    l2_terms = np.zeros((d, d))
    w_terms = np.zeros((d, d))
    den = 0.0
    for k in range(d):
        th_gt = gt.model.theta_k(gt.theta, k)
        th = model.theta_k(theta, k)
        for i in range(d):
            ker_gt = gt.model.kernels[k][i]
            par_gt = gt.model.kernel_params(th_gt, k, i)
            ker = model.kernels[k][i]
            par = model.kernel_params(th, k, i)
            l2_terms[k, i] = _kernel_l2_distance_sq(ker_gt, par_gt, ker, par)
            den += ker_gt.l2_sq(par_gt)
            w_terms[k, i] = wasserstein_1d(ker_gt, par_gt, ker, par) + abs(
                ker_gt.l1(par_gt) - ker.l1(par)
            )
    l2_total = float(np.sum((mu_gt - mu) ** 2) / np.sum(mu_gt**2) + l2_terms.sum() / den)
    w_total = float(np.sum(np.abs(mu_gt - mu)) + w_terms.sum())
    return MetricReport(l2_total, w_total, l2_terms, w_terms)
