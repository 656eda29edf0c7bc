"""Gaussian mixture kernel restricted to [0, inf), and its correlation forms.

The product of two Gaussian densities is Gaussian in the integration
variable, so the correlation integral reduces to a Gaussian prefactor times a
normal-CDF mass over [0, t]. The prefactor is evaluated in log space and CDF
differences go through the stable helpers in ``base`` -- the cross forms are
prone to overflow/cancellation otherwise.
"""

import numpy as np
from scipy.stats import truncnorm

from .base import Kernel, SQRT_2PI, gauss_mass, log_gauss_mass, norm_pdf


class GaussianKernel(Kernel):
    """phi(x) = sum_l omega_l * N(x; delta_l, beta_l^2), x >= 0.

    beta is the component scale (standard deviation), delta the mean; the
    mean may be negative, the mass on [0, inf) is what enters the L1 norm.
    """

    family = "gaussian"
    FIELDS = ("omega", "beta", "delta")
    POSITIVE_FIELDS = ("omega", "beta")

    def phi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        z = (x[None, :] - d[:, None]) / b[:, None]
        return np.einsum("l,ln->n", w / b, norm_pdf(z))

    def psi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        lo = (-d / b)[:, None]
        hi = (x[None, :] - d[:, None]) / b[:, None]
        return np.einsum("l,ln->n", w, gauss_mass(lo, hi))

    def phi_partials(self, params, x):
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        z = (x[None, :] - d[:, None]) / b[:, None]
        pdf = norm_pdf(z) / b[:, None]
        return {
            "omega": pdf,
            "beta": (w / b)[:, None] * pdf * (np.square(z) - 1.0),
            "delta": w[:, None] * pdf * z / b[:, None],
        }

    def psi_partials(self, params, x):
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        z0 = (-d / b)[:, None]
        z1 = (x[None, :] - d[:, None]) / b[:, None]
        f0, f1 = norm_pdf(z0), norm_pdf(z1)
        return {
            "omega": gauss_mass(z0, z1),
            "beta": (w / b)[:, None] * (-z1 * f1 + z0 * f0),
            "delta": -(w / b)[:, None] * (f1 - f0),
        }

    def l1(self, params):
        f = self.fields(params)
        return float(np.sum(f["omega"] * gauss_mass(-f["delta"] / f["beta"], np.inf)))

    def component_masses(self, params):
        f = self.fields(params)
        return f["omega"] * gauss_mass(-f["delta"] / f["beta"], np.inf)

    def l2_sq(self, params):
        val, _, _ = gaussian_upsilon(self, params, self, params, np.array([np.inf]), np.array([0.0]))
        return float(val[0])

    def sample(self, params, size, rng):
        f = self.fields(params)
        b, d = f["beta"], f["delta"]

        def draw(l, n):
            a = -d[l] / b[l]  # truncate at 0 in standardized units
            return truncnorm.rvs(a, np.inf, loc=d[l], scale=b[l], size=n, random_state=rng)

        return self.sample_mixture(params, size, rng, draw)

    def envelope(self, params, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        peak = np.maximum(x[None, :], d[:, None])  # components peak at their mean
        z = (peak - d[:, None]) / b[:, None]
        return np.einsum("l,ln->n", w / b, norm_pdf(z))


def gaussian_upsilon(ker_i, par_i, ker_j, par_j, t, s, want_grads=False):
    """Correlation of two Gaussian kernels (same row), with optional partials.

    Vectorized over the component-pair grid (axes: i-component, j-component,
    evaluation point); sum-of-basis models make the pair grid large.
    """
    fi = ker_i.fields(par_i)
    fj = ker_j.fields(par_j)
    wi, ai, di = fi["omega"], fi["beta"], fi["delta"]
    wj, cj, dj = fj["omega"], fj["beta"], fj["delta"]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    shape = np.broadcast_shapes(t.shape, s.shape)
    t = np.broadcast_to(t, shape)[None, None, :]
    s_b = np.broadcast_to(s, shape)[None, None, :]
    a = ai[:, None, None]
    c = cj[None, :, None]
    w_pair = (wi[:, None] * wj[None, :])[:, :, None]
    v = a * a + c * c
    u = s_b - (dj[None, :, None] - di[:, None, None])
    pref = np.exp(-0.5 * u * u / v) / (SQRT_2PI * np.sqrt(v))
    b = a * c / np.sqrt(v)
    dd = (c * c * di[:, None, None] + a * a * (dj[None, :, None] - s_b)) / v
    finite_t = np.isfinite(t)
    hi = np.where(finite_t, (t - dd) / b, np.inf)
    lo = -dd / b
    mass = gauss_mass(lo, hi)
    core = pref * mass
    val = (w_pair * core).sum(axis=(0, 1))
    if not want_grads:
        return val, None, None
    gi = {}
    gj = {}
    f_hi = np.where(finite_t, norm_pdf(np.where(finite_t, hi, 0.0)), 0.0)
    f_lo = norm_pdf(lo)
    gi["omega"] = (wj[None, :, None] * core).sum(axis=1)
    gj["omega"] = (wi[:, None, None] * core).sum(axis=0)
    for side in ("i", "j"):
        if side == "i":
            dv = 2.0 * a
            d_dd = -2.0 * a * c * c * u / v**2
            db = c**3 / v**1.5
            d_dd_mean = c * c / v
            du_mean = 1.0
        else:
            dv = 2.0 * c
            d_dd = 2.0 * c * a * a * u / v**2
            db = a**3 / v**1.5
            d_dd_mean = a * a / v
            du_mean = -1.0
        dpref = pref * (u * u * dv / (2.0 * v * v) - dv / (2.0 * v))
        dhi = np.where(finite_t, (-d_dd - np.where(finite_t, hi, 0.0) * db) / b, 0.0)
        dlo = (-d_dd - lo * db) / b
        dmass = f_hi * dhi - f_lo * dlo
        beta_part = w_pair * (dpref * mass + pref * dmass)
        dpref_m = pref * (-u * du_mean / v)
        dhi_m = np.where(finite_t, -d_dd_mean / b, 0.0)
        dmass_m = f_hi * dhi_m - f_lo * (-d_dd_mean / b)
        delta_part = w_pair * (dpref_m * mass + pref * dmass_m)
        if side == "i":
            gi["beta"] = beta_part.sum(axis=1)
            gi["delta"] = delta_part.sum(axis=1)
        else:
            gj["beta"] = beta_part.sum(axis=0)
            gj["delta"] = delta_part.sum(axis=0)
    return val, gi, gj


def gaussian_exp_upsilon(ker_i, par_i, ker_j, par_j, t, s, want_grads=False):
    """Correlation of a Gaussian first factor with an exponential second factor.

    The reverse ordering (exponential first, Gaussian second) grows like
    exp(beta * s) in the prefactor and is not provided. Computed in log space:
    the prefactor exp(beta_j^2 beta_i^2 / 2 - ...) overflows exactly when the
    CDF mass underflows, so only their combination is formed.
    """
    fi = ker_i.fields(par_i)
    fj = ker_j.fields(par_j)
    wi, ai, di = fi["omega"], fi["beta"], fi["delta"]
    wj, bj = fj["omega"], fj["beta"]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    shape = np.broadcast_shapes(t.shape, s.shape)
    val = np.zeros(shape)
    gi = {k: np.zeros((ker_i.r,) + shape) for k in ("omega", "beta", "delta")} if want_grads else None
    gj = {k: np.zeros((ker_j.r,) + shape) for k in ("omega", "beta")} if want_grads else None
    for l in range(ker_i.r):
        for m in range(ker_j.r):
            a, d, b = ai[l], di[l], bj[m]
            log_amp = np.log(b) - b * (d + s) + 0.5 * b * b * a * a
            mean = d - b * a * a
            hi = (t - mean) / a
            lo = -mean / a
            log_mass = log_gauss_mass(lo, hi)
            core = np.exp(log_amp + log_mass)
            val += wi[l] * wj[m] * core
            if not want_grads:
                continue
            # pdf terms share the amplitude: amp * pdf(z) = exp(log_amp + log_pdf(z))
            f_hi = np.where(np.isfinite(hi), np.exp(log_amp - 0.5 * hi * hi) / SQRT_2PI, 0.0)
            f_lo = np.exp(log_amp - 0.5 * lo * lo) / SQRT_2PI
            # d/d(beta_i): dlog_amp = b^2 a; dmean = -2ab; dhi = (2b - hi/a); dlo = (2b - lo/a)
            dhi = np.where(np.isfinite(hi), 2.0 * b - hi / a, 0.0)
            dlo = 2.0 * b - lo / a
            gi["beta"][l] += wi[l] * wj[m] * (b * b * a * core + f_hi * dhi - f_lo * dlo)
            # d/d(delta_i): dlog_amp = -b; dhi = dlo = -1/a
            gi["delta"][l] += wi[l] * wj[m] * (-b * core + (f_hi - f_lo) * (-1.0 / a))
            # d/d(beta_j): dlog_amp = 1/b - (d+s) + b a^2; dhi = dlo = a
            gj["beta"][m] += wi[l] * wj[m] * (
                (1.0 / b - (d + s) + b * a * a) * core + (f_hi - f_lo) * a
            )
            gi["omega"][l] += wj[m] * core
            gj["omega"][m] += wi[l] * core
    return val, gi, gj
