"""Exponential and delayed-exponential kernel families.

Both run through one correlation routine: an exponential basis component is a
delayed-exponential component with zero delay, and the product integral

    int_0^t phi_i(u) phi_j(u + s) du

of two shifted exponentials has the closed form implemented in
``shifted_exp_upsilon`` (valid above the support threshold
``u0 = max(d_i, d_j - s)``, zero below it).
"""

import numpy as np

from .base import Kernel


class ExponentialKernel(Kernel):
    """phi(x) = sum_l omega_l * beta_l * exp(-beta_l x)."""

    family = "exponential"
    FIELDS = ("omega", "beta")

    def delays(self, fields):
        return np.zeros(self.r)

    def phi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        return np.einsum("l,ln->n", w * b, np.exp(-np.outer(b, x)))

    def psi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        return np.einsum("l,ln->n", w, 1.0 - np.exp(-np.outer(b, x)))

    def phi_partials(self, params, x):
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        e = np.exp(-np.outer(b, x))
        return {
            "omega": b[:, None] * e,
            "beta": w[:, None] * (1.0 - b[:, None] * x[None, :]) * e,
        }

    def psi_partials(self, params, x):
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        e = np.exp(-np.outer(b, x))
        return {
            "omega": 1.0 - e,
            "beta": w[:, None] * x[None, :] * e,
        }

    def l1(self, params):
        return float(self.fields(params)["omega"].sum())

    def component_masses(self, params):
        return self.fields(params)["omega"].copy()

    def l2_sq(self, params):
        val, _, _ = shifted_exp_upsilon(self, params, self, params, np.array([np.inf]), np.array([0.0]))
        return float(val[0])

    def sample(self, params, size, rng):
        f = self.fields(params)
        beta = f["beta"]
        return self.sample_mixture(params, size, rng, lambda l, n: rng.exponential(1.0 / beta[l], size=n))

    def envelope(self, params, x):
        # each component is decreasing, so the running value majorizes the tail
        return self.phi(params, np.maximum(np.asarray(x, dtype=float), 0.0))


class DelayedExponentialKernel(ExponentialKernel):
    """phi(x) = sum_l omega_l * beta_l * exp(-beta_l (x - delta_l)) 1{x > delta_l}.

    The delays are fixed hyperparameters: the kernel is discontinuous in
    delta, so gradient-based fitting of the delay is not meaningful. Construct
    with ``frozen={"delta": ...}``.
    """

    family = "delayed_exponential"
    FIELDS = ("omega", "beta", "delta")
    ALWAYS_FROZEN = ("delta",)

    def delays(self, fields):
        return fields["delta"]

    def phi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        xs = x[None, :] - d[:, None]
        live = xs > 0.0
        return np.sum(np.where(live, (w * b)[:, None] * np.exp(-b[:, None] * np.maximum(xs, 0.0)), 0.0), axis=0)

    def psi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        xs = np.maximum(x[None, :] - d[:, None], 0.0)
        return np.einsum("l,ln->n", w, 1.0 - np.exp(-b[:, None] * xs))

    def phi_partials(self, params, x):
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        xs = x[None, :] - d[:, None]
        live = xs > 0.0
        e = np.where(live, np.exp(-b[:, None] * np.maximum(xs, 0.0)), 0.0)
        return {
            "omega": b[:, None] * e,
            "beta": w[:, None] * (1.0 - b[:, None] * np.maximum(xs, 0.0)) * e,
        }

    def psi_partials(self, params, x):
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        xs = np.maximum(x[None, :] - d[:, None], 0.0)
        e = np.exp(-b[:, None] * xs)
        return {
            "omega": 1.0 - e,
            "beta": w[:, None] * xs * e,
        }

    def sample(self, params, size, rng):
        f = self.fields(params)
        beta, delta = f["beta"], f["delta"]
        return self.sample_mixture(
            params, size, rng, lambda l, n: delta[l] + rng.exponential(1.0 / beta[l], size=n)
        )

    def envelope(self, params, x):
        # a component still ahead of its delay peaks at omega*beta
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f = self.fields(params)
        w, b, d = f["omega"], f["beta"], f["delta"]
        xs = x[None, :] - d[:, None]
        ahead = xs <= 0.0
        decayed = (w * b)[:, None] * np.exp(-b[:, None] * np.maximum(xs, 0.0))
        return np.sum(np.where(ahead, (w * b)[:, None], decayed), axis=0)


def shifted_exp_upsilon(ker_i, par_i, ker_j, par_j, t, s, want_grads=False):
    """Correlation of two (possibly delayed) exponential kernels.

    Returns ``(value, partials_i, partials_j)`` where the partial dicts map
    free fields to (r, n) arrays; partial dicts are None unless requested.
    """
    fi = ker_i.fields(par_i)
    fj = ker_j.fields(par_j)
    wi, bi, di = fi["omega"], fi["beta"], ker_i.delays(fi)
    wj, bj, dj = fj["omega"], fj["beta"], ker_j.delays(fj)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    n = np.broadcast_shapes(t.shape, s.shape)
    val = np.zeros(n)
    gi = {"omega": np.zeros((ker_i.r,) + n), "beta": np.zeros((ker_i.r,) + n)} if want_grads else None
    gj = {"omega": np.zeros((ker_j.r,) + n), "beta": np.zeros((ker_j.r,) + n)} if want_grads else None
    for l in range(ker_i.r):
        for m in range(ker_j.r):
            u0 = np.maximum(di[l], dj[m] - s)
            live = t > u0
            g = bi[l] * bj[m] / (bi[l] + bj[m])
            # exponents are <= 0 by construction of u0
            e1 = np.where(live, np.exp(-bi[l] * (u0 - di[l]) - bj[m] * (u0 + s - dj[m])), 0.0)
            with np.errstate(invalid="ignore"):
                e2 = np.where(live, np.exp(-bi[l] * (t - di[l]) - bj[m] * (t + s - dj[m])), 0.0)
            core = g * (e1 - e2)
            val += wi[l] * wj[m] * core
            if not want_grads:
                continue
            gi["omega"][l] += wj[m] * core
            gj["omega"][m] += wi[l] * core
            dg_dbi = (bj[m] / (bi[l] + bj[m])) ** 2
            dg_dbj = (bi[l] / (bi[l] + bj[m])) ** 2
            de1_dbi = e1 * (di[l] - u0)
            de1_dbj = e1 * (dj[m] - s - u0)
            # guard 0 * inf at t = inf (e2 underflows to exactly 0 there)
            de2_dbi = e2 * np.where(e2 > 0, di[l] - t, 0.0)
            de2_dbj = e2 * np.where(e2 > 0, dj[m] - s - t, 0.0)
            gi["beta"][l] += wi[l] * wj[m] * (dg_dbi * (e1 - e2) + g * (de1_dbi - de2_dbi))
            gj["beta"][m] += wi[l] * wj[m] * (dg_dbj * (e1 - e2) + g * (de1_dbj - de2_dbj))
    return val, gi, gj
