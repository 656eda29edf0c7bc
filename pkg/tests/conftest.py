import numpy as np
import pytest
from scipy.integrate import quad

from hawkes_sgd import (
    DelayedExponentialKernel,
    ExponentialKernel,
    GaussianKernel,
    HawkesModel,
    RayleighKernel,
    TriangularKernel,
    EventPath,
)


def random_path(rng, d=1, n_per_dim=40, horizon=None):
    """A valid random event path (sorted uniform jump times)."""
    times = []
    horizon = horizon or 10.0 * d
    for _ in range(d):
        n = int(rng.integers(max(2, n_per_dim // 2), n_per_dim + 1))
        times.append(np.sort(rng.uniform(0.0, horizon, size=n)))
    return EventPath(times, horizon=horizon)


def kernel_zoo(rng=None, r=2):
    """One instance of every family with generic random-ish parameters."""
    rng = rng or np.random.default_rng(0)
    zoo = {}
    ker = ExponentialKernel(r=r)
    zoo["exponential"] = (ker, ker.pack(omega=rng.uniform(0.1, 0.6, r), beta=rng.uniform(0.4, 2.5, r)))
    ker = DelayedExponentialKernel(r=r, frozen={"delta": rng.uniform(0.2, 1.5, r)})
    zoo["delayed_exponential"] = (ker, ker.pack(omega=rng.uniform(0.1, 0.6, r), beta=rng.uniform(0.4, 2.5, r)))
    ker = GaussianKernel(r=r)
    zoo["gaussian"] = (
        ker,
        ker.pack(omega=rng.uniform(0.1, 0.6, r), beta=rng.uniform(0.3, 1.5, r), delta=rng.uniform(0.0, 4.0, r)),
    )
    ker = RayleighKernel(r=r)
    zoo["rayleigh"] = (ker, ker.pack(omega=rng.uniform(0.1, 0.6, r), beta=rng.uniform(0.4, 2.0, r)))
    ker = TriangularKernel(r=r)
    zoo["triangular"] = (
        ker,
        ker.pack(
            omega=rng.uniform(0.1, 0.6, r),
            alpha=rng.uniform(0.1, 1.0, r),
            beta=rng.uniform(0.3, 1.5, r),
            delta=rng.uniform(0.3, 1.5, r),
        ),
    )
    return zoo


def kernel_breakpoints(ker, par):
    """Locations where a kernel is non-smooth (kinks/jumps), for quadrature."""
    fields = ker.fields(par)
    if ker.family == "delayed_exponential":
        return list(fields["delta"])
    if ker.family == "triangular":
        a, b, d = fields["alpha"], fields["beta"], fields["delta"]
        return list(a) + list(a + b) + list(a + b + d)
    return []


def quad_upsilon(ker_i, par_i, ker_j, par_j, t, s):
    """Quadrature oracle for the correlation integral (kink-aware)."""
    breaks = kernel_breakpoints(ker_i, par_i) + [b - s for b in kernel_breakpoints(ker_j, par_j)]
    breaks = sorted(b for b in breaks if 0.0 < b < t)
    return quad(
        lambda u: float(ker_i.phi(par_i, np.array([u]))[0] * ker_j.phi(par_j, np.array([u + s]))[0]),
        0.0,
        t,
        limit=400,
        points=breaks or None,
    )[0]


def fd_gradient(fun, par, idx, rel_step=1e-6):
    """Central finite difference of fun wrt par[idx]."""
    h = rel_step * max(1.0, abs(par[idx]))
    up = par.copy()
    up[idx] += h
    dn = par.copy()
    dn[idx] -= h
    return (fun(up) - fun(dn)) / (2.0 * h)


def exp_model_1d(mu=1.5, omega=0.2, beta=1.0):
    model = HawkesModel.homogeneous(1, "exponential", r=1)
    theta = model.pack([mu], [[model.kernels[0][0].pack(omega=omega, beta=beta)]])
    return model, theta


def exp_model_2d():
    """The bivariate exponential benchmark parameter matrices."""
    model = HawkesModel.homogeneous(2, "exponential", r=1)
    omega = [[0.2, 0.6], [0.7, 0.1]]
    beta = [[1.0, 1.5], [2.0, 1.3]]
    params = [
        [model.kernels[k][i].pack(omega=omega[k][i], beta=beta[k][i]) for i in range(2)]
        for k in range(2)
    ]
    theta = model.pack([1.5, 1.0], params)
    return model, theta


def gauss_model_1d(mu=1.5, omega=0.5, beta=0.5, delta=3.0):
    model = HawkesModel.homogeneous(1, "gaussian", r=1)
    theta = model.pack([mu], [[model.kernels[0][0].pack(omega=omega, beta=beta, delta=delta)]])
    return model, theta


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
