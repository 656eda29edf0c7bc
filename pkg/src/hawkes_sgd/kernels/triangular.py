"""Triangular mixture kernel (finite support, non-monotonic).

Each basis component is a triangle: rising on [alpha, alpha+beta), peaking at
height 1, falling to zero on [alpha+beta, alpha+beta+delta). Indicator
boundaries use the half-open convention throughout so phi is right-continuous
and gradients at kink points are right limits.

The correlation of two triangles is a sum over the four piece pairs of exact
integrals integral of _x^y (u - a)(u - b) du with clipped bounds; partials follow by the
chain rule through the clip selections (argmax/argmin bookkeeping).
"""

import numpy as np

from .base import Kernel


class TriangularKernel(Kernel):
    """Triangle mixture with left corner alpha, rise beta, fall delta."""

    family = "triangular"
    FIELDS = ("omega", "alpha", "beta", "delta")

    def _pieces(self, x, f):
        w, a, b, d = f["omega"], f["alpha"], f["beta"], f["delta"]
        up = (x[None, :] >= a[:, None]) & (x[None, :] < (a + b)[:, None])
        down = (x[None, :] >= (a + b)[:, None]) & (x[None, :] < (a + b + d)[:, None])
        return w, a, b, d, up, down

    def phi(self, params, x):
        x = self._check_x(x)
        w, a, b, d, up, down = self._pieces(x, self.fields(params))
        rise = (x[None, :] - a[:, None]) / b[:, None]
        fall = -(x[None, :] - (a + b + d)[:, None]) / d[:, None]
        return np.einsum("l,ln->n", w, np.where(up, rise, 0.0) + np.where(down, fall, 0.0))

    def psi(self, params, x):
        x = self._check_x(x)
        f = self.fields(params)
        w, a, b, d, up, down = self._pieces(x, f)
        done = x[None, :] >= (a + b + d)[:, None]
        y = x[None, :] - (a + b)[:, None]
        rise = np.square(x[None, :] - a[:, None]) / (2.0 * b[:, None])
        fall = b[:, None] / 2.0 + y - np.square(y) / (2.0 * d[:, None])
        full = (b + d)[:, None] / 2.0
        acc = np.where(up, rise, 0.0) + np.where(down, fall, 0.0) + np.where(done, full, 0.0)
        return np.einsum("l,ln->n", w, acc)

    def phi_partials(self, params, x):
        f = self.fields(params)
        w, a, b, d, up, down = self._pieces(x, f)
        rise = (x[None, :] - a[:, None]) / b[:, None]
        fall = -(x[None, :] - (a + b + d)[:, None]) / d[:, None]
        return {
            "omega": np.where(up, rise, 0.0) + np.where(down, fall, 0.0),
            "alpha": w[:, None] * (np.where(up, -1.0 / b[:, None], 0.0) + np.where(down, 1.0 / d[:, None], 0.0)),
            "beta": w[:, None] * (np.where(up, -rise / b[:, None], 0.0) + np.where(down, 1.0 / d[:, None], 0.0)),
            "delta": w[:, None] * np.where(down, (x[None, :] - (a + b)[:, None]) / np.square(d[:, None]), 0.0),
        }

    def psi_partials(self, params, x):
        f = self.fields(params)
        w, a, b, d, up, down = self._pieces(x, f)
        done = x[None, :] >= (a + b + d)[:, None]
        xa = x[None, :] - a[:, None]
        y = x[None, :] - (a + b)[:, None]
        rise = np.square(xa) / (2.0 * b[:, None])
        fall = b[:, None] / 2.0 + y - np.square(y) / (2.0 * d[:, None])
        full = (b + d)[:, None] / 2.0
        return {
            "omega": np.where(up, rise, 0.0) + np.where(down, fall, 0.0) + np.where(done, full, 0.0),
            "alpha": w[:, None]
            * (np.where(up, -xa / b[:, None], 0.0) + np.where(down, (y - d[:, None]) / d[:, None], 0.0)),
            "beta": w[:, None]
            * (
                np.where(up, -0.5 * np.square(xa / b[:, None]), 0.0)
                + np.where(down, y / d[:, None] - 0.5, 0.0)
                + np.where(done, 0.5, 0.0)
            ),
            "delta": w[:, None]
            * (
                np.where(down, 0.5 * np.square(y / d[:, None]), 0.0)
                + np.where(done, 0.5, 0.0)
            ),
        }

    def l1(self, params):
        f = self.fields(params)
        return float(np.sum(f["omega"] * (f["beta"] + f["delta"]) / 2.0))

    def component_masses(self, params):
        f = self.fields(params)
        return f["omega"] * (f["beta"] + f["delta"]) / 2.0

    def support_end(self, params):
        f = self.fields(params)
        return float(np.max(f["alpha"] + f["beta"] + f["delta"]))

    def l2_sq(self, params):
        # finite support: the correlation is exact for any t past the support end
        val, _, _ = triangular_upsilon(
            self, params, self, params, np.array([self.support_end(params)]), np.array([0.0])
        )
        return float(val[0])

    def sample(self, params, size, rng):
        f = self.fields(params)
        a, b, d = f["alpha"], f["beta"], f["delta"]
        return self.sample_mixture(
            params, size, rng, lambda l, n: rng.triangular(a[l], a[l] + b[l], a[l] + b[l] + d[l], size=n)
        )

    def envelope(self, params, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        f = self.fields(params)
        w, a, b, d = f["omega"], f["alpha"], f["beta"], f["delta"]
        peak = x[None, :] < (a + b)[:, None]
        down = (x[None, :] >= (a + b)[:, None]) & (x[None, :] < (a + b + d)[:, None])
        fall = -(x[None, :] - (a + b + d)[:, None]) / d[:, None]
        return np.einsum("l,ln->n", w, np.where(peak, 1.0, 0.0) + np.where(down, fall, 0.0))


# piece descriptors: (lo fields, hi fields, root fields, denominator field, sign)
_PIECE = (
    {"lo": ("alpha",), "hi": ("alpha", "beta"), "root": ("alpha",), "den": "beta", "sign": 1.0},
    {
        "lo": ("alpha", "beta"),
        "hi": ("alpha", "beta", "delta"),
        "root": ("alpha", "beta", "delta"),
        "den": "delta",
        "sign": -1.0,
    },
)


def _piece_geometry(f, l, piece):
    a, b, d = f["alpha"][l], f["beta"][l], f["delta"][l]
    if piece == 0:
        return a, a + b, a  # lo, hi, root
    return a + b, a + b + d, a + b + d


def triangular_upsilon(ker_i, par_i, ker_j, par_j, t, s, want_grads=False):
    """Correlation of two triangular kernels over the four piece pairs."""
    fi = ker_i.fields(par_i)
    fj = ker_j.fields(par_j)
    wi, wj = fi["omega"], fj["omega"]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    shape = np.broadcast_shapes(t.shape, s.shape)
    t = np.broadcast_to(t, shape)
    s = np.broadcast_to(s, shape)
    val = np.zeros(shape)
    fields = ("omega", "alpha", "beta", "delta")
    gi = {k: np.zeros((ker_i.r,) + shape) for k in fields} if want_grads else None
    gj = {k: np.zeros((ker_j.r,) + shape) for k in fields} if want_grads else None
    for l in range(ker_i.r):
        for m in range(ker_j.r):
            for pi in (0, 1):
                for pj in (0, 1):
                    spec_i, spec_j = _PIECE[pi], _PIECE[pj]
                    lo_i, hi_i, root_i = _piece_geometry(fi, l, pi)
                    lo_j, hi_j, root_j = _piece_geometry(fj, m, pj)
                    den_i = fi[spec_i["den"]][l]
                    den_j = fj[spec_j["den"]][m]
                    c = spec_i["sign"] * spec_j["sign"] / (den_i * den_j)
                    # clipped integration bounds; argmax/argmin remember which
                    # candidate is active so gradients flow through the clip
                    cand_x = np.stack([np.zeros(shape), np.full(shape, lo_i), lo_j - s])
                    cand_y = np.stack([t, np.full(shape, hi_i), hi_j - s])
                    sel_x = np.argmax(cand_x, axis=0)
                    sel_y = np.argmin(cand_y, axis=0)
                    x = np.max(cand_x, axis=0)
                    y = np.min(cand_y, axis=0)
                    live = x < y
                    dlt = np.where(live, y - x, 0.0)
                    b_root = root_j - s
                    xa = x - root_i
                    xb = x - b_root
                    F = dlt**3 / 3.0 + (xa + xb) * dlt**2 / 2.0 + xa * xb * dlt
                    contrib = c * np.where(live, F, 0.0)
                    val += wi[l] * wj[m] * contrib
                    if not want_grads:
                        continue
                    ya = y - root_i
                    yb = y - b_root
                    Fx = -xa * xb
                    Fy = ya * yb
                    Fa = -0.5 * (yb * yb - xb * xb)
                    Fb = -0.5 * (ya * ya - xa * xa)
                    gi["omega"][l] += wj[m] * contrib
                    gj["omega"][m] += wi[l] * contrib
                    for side, grads, spec, r_idx, w_other, w_own in (
                        ("i", gi, spec_i, l, wj[m], wi[l]),
                        ("j", gj, spec_j, m, wi[l], wj[m]),
                    ):
                        x_hit = (sel_x == (1 if side == "i" else 2)).astype(float)
                        y_hit = (sel_y == (1 if side == "i" else 2)).astype(float)
                        for field in ("alpha", "beta", "delta"):
                            dF = np.zeros(shape)
                            if field in spec["lo"]:
                                dF += Fx * x_hit
                            if field in spec["hi"]:
                                dF += Fy * y_hit
                            if field in spec["root"]:
                                dF += Fa if side == "i" else Fb
                            dc = -c / (den_i if side == "i" else den_j) if field == spec["den"] else 0.0
                            term = dc * F + c * dF
                            grads[field][r_idx] += w_own * w_other * np.where(live, term, 0.0)
    return val, gi, gj
