"""Rayleigh mixture kernel.

The correlation integral of two Rayleigh components is Gaussian-reducible:
completing the square in the product of the two quadratics leaves a linear
polynomial times a Gaussian, integrated in closed form. Partials are obtained
by differentiating the intermediate quantities of that closed form; they are
pinned to central finite differences by the test suite.
"""

import numpy as np

from .base import Kernel, SQRT_2PI, gauss_mass, norm_pdf


class RayleighKernel(Kernel):
    """phi(x) = sum_l omega_l * (x / beta_l^2) * exp(-x^2 / (2 beta_l^2))."""

    family = "rayleigh"
    FIELDS = ("omega", "beta")

    def phi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        z = x[None, :] / b[:, None]
        return np.einsum("l,ln->n", w / b, z * np.exp(-0.5 * z * z))

    def psi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        z = x[None, :] / b[:, None]
        return np.einsum("l,ln->n", w, 1.0 - np.exp(-0.5 * z * z))

    def phi_partials(self, params, x):
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        z = x[None, :] / b[:, None]
        e = np.exp(-0.5 * z * z)
        return {
            "omega": z * e / b[:, None],
            "beta": (w / b / b)[:, None] * z * e * (z * z - 2.0),
        }

    def psi_partials(self, params, x):
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        z = x[None, :] / b[:, None]
        e = np.exp(-0.5 * z * z)
        return {
            "omega": 1.0 - e,
            "beta": -(w / b)[:, None] * z * z * e,
        }

    def l1(self, params):
        return float(self.fields(params)["omega"].sum())

    def component_masses(self, params):
        return self.fields(params)["omega"].copy()

    def l2_sq(self, params):
        val, _, _ = rayleigh_upsilon(self, params, self, params, np.array([np.inf]), np.array([0.0]))
        return float(val[0])

    def sample(self, params, size, rng):
        beta = self.fields(params)["beta"]
        return self.sample_mixture(params, size, rng, lambda l, n: rng.rayleigh(beta[l], size=n))

    def envelope(self, params, x):
        # component peaks at x = beta_l
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f = self.fields(params)
        w, b = f["omega"], f["beta"]
        z = np.maximum(x[None, :], b[:, None]) / b[:, None]
        return np.einsum("l,ln->n", w / b, z * np.exp(-0.5 * z * z))


def rayleigh_upsilon(ker_i, par_i, ker_j, par_j, t, s, want_grads=False):
    """Correlation of two Rayleigh kernels; partials via the chain rule."""
    fi = ker_i.fields(par_i)
    fj = ker_j.fields(par_j)
    wi, ai = fi["omega"], fi["beta"]
    wj, cj = fj["omega"], fj["beta"]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    shape = np.broadcast_shapes(t.shape, s.shape)
    val = np.zeros(shape)
    gi = {k: np.zeros((ker_i.r,) + shape) for k in ("omega", "beta")} if want_grads else None
    gj = {k: np.zeros((ker_j.r,) + shape) for k in ("omega", "beta")} if want_grads else None
    finite_t = np.isfinite(t)
    t_safe = np.where(finite_t, t, 0.0)  # placeholders; inf branches patched below
    for l in range(ker_i.r):
        for m in range(ker_j.r):
            a, c = ai[l], cj[m]
            v = a * a + c * c
            bI = a * a / v
            bJ = c * c / v
            b2 = a * a * c * c / v
            b = a * c / np.sqrt(v)
            e0 = np.exp(-0.5 * s * s / v)
            w1 = s * bI
            w2 = t_safe + s * bI
            g1 = np.exp(-0.5 * w1 * w1 / b2)
            g2 = np.where(finite_t, np.exp(-0.5 * w2 * w2 / b2), 0.0)
            c1 = s * bJ / v
            c2 = -(t_safe + s * bJ) / v
            c3 = SQRT_2PI * (a * c / v**1.5) * (1.0 - s * s / v)
            mass = gauss_mass(w1 / b, np.where(finite_t, w2 / b, np.inf))
            core = e0 * (c1 * g1 + np.where(finite_t, c2 * g2, 0.0) + c3 * mass)
            val += wi[l] * wj[m] * core
            if not want_grads:
                continue
            f1 = norm_pdf(w1 / b)
            f2 = np.where(finite_t, norm_pdf(w2 / b), 0.0)
            for own, r_idx, grads in ((True, l, gi), (False, m, gj)):
                # partials of the intermediates wrt this side's scale
                if own:
                    p, q = a, c  # differentiate wrt p = a
                else:
                    p, q = c, a
                dv = 2.0 * p
                # bI = a^2/v, bJ = c^2/v
                if own:
                    dbI = 2.0 * a * c * c / v**2
                else:
                    dbI = -2.0 * a * a * c / v**2
                dbJ = -dbI
                db2 = 2.0 * p * q**4 / v**2
                db = q**3 / v**1.5
                de0 = e0 * (0.5 * s * s * dv / v**2)
                dw1 = s * dbI
                dw2 = s * dbI
                dg1 = g1 * (-w1 * dw1 / b2 + 0.5 * w1 * w1 * db2 / b2**2)
                dg2 = np.where(
                    finite_t, g2 * (-w2 * dw2 / b2 + 0.5 * w2 * w2 * db2 / b2**2), 0.0
                )
                dc1 = s * (dbJ * v - bJ * dv) / v**2
                dc2 = -(s * dbJ * v - (t_safe + s * bJ) * dv) / v**2
                dc3 = SQRT_2PI * (
                    (q * (v - 3.0 * p * p) / v**2.5) * (1.0 - s * s / v)
                    + (a * c / v**1.5) * (s * s * dv / v**2)
                )
                dmass = f2 * np.where(finite_t, (dw2 * b - w2 * db) / b**2, 0.0) - f1 * (
                    dw1 * b - w1 * db
                ) / b**2
                dcore = de0 * (c1 * g1 + np.where(finite_t, c2 * g2, 0.0) + c3 * mass) + e0 * (
                    dc1 * g1
                    + c1 * dg1
                    + np.where(finite_t, dc2 * g2 + c2 * dg2, 0.0)
                    + dc3 * mass
                    + c3 * dmass
                )
                grads["beta"][r_idx] += wi[l] * wj[m] * dcore
            gi["omega"][l] += wj[m] * core
            gj["omega"][m] += wi[l] * core
    return val, gi, gj
