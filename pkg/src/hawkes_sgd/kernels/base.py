"""Shared plumbing for parametric kernel families.

Every family exposes:

* ``phi(params, x)`` -- kernel density values,
* ``psi(params, x)`` -- cumulative mass ``int_0^x phi``,
* per-parameter partials of both,
* closed-form L1 mass and (squared) L2 norm,
* an offspring-time sampler for the normalized density, and
* ``envelope(params, x)`` -- the non-increasing majorant ``sup_{y>=x} phi(y)``
  used by the thinning simulator.

Parameters are carried as a flat float array holding the *free* fields in
declaration order, each block of length ``r`` (the basis size). Frozen fields
(e.g. the delay of a delayed exponential, or everything but the weights in a
sum-of-basis-functions model) live on the kernel object itself.
"""

import numpy as np
from scipy.special import erfc, log_ndtr, ndtr

SQRT_2PI = np.sqrt(2.0 * np.pi)

# Lower feasibility floor applied after projection; keeps closed forms away
# from division by zero.
PARAM_FLOOR = 1e-10


def norm_pdf(x):
    return np.exp(-0.5 * np.square(x)) / SQRT_2PI


def gauss_mass(lo, hi):
    """Phi(hi) - Phi(lo) computed stably, including far same-side tails."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = ndtr(hi) - ndtr(lo)
    # same-side far tails lose all precision in the plain difference
    upper = lo > 8.0
    if np.any(upper):
        out = np.where(upper, 0.5 * (erfc(lo / np.sqrt(2)) - erfc(hi / np.sqrt(2))), out)
    lower = hi < -8.0
    if np.any(lower):
        out = np.where(lower, 0.5 * (erfc(-hi / np.sqrt(2)) - erfc(-lo / np.sqrt(2))), out)
    return np.maximum(out, 0.0)


def log_gauss_mass(lo, hi):
    """log(Phi(hi) - Phi(lo)), stable when the interval sits far in a tail."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    lo_b, hi_b = np.broadcast_arrays(lo, hi)
    out = np.full(lo_b.shape, -np.inf)
    # work in the lower tail: mass(lo, hi) = mass(-hi, -lo) mirrored
    flip = lo_b > 0
    a = np.where(flip, -hi_b, lo_b)
    b = np.where(flip, -lo_b, hi_b)
    la = log_ndtr(a)
    lb = log_ndtr(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = np.where(lb > la, np.log1p(-np.exp(la - lb)), -np.inf)
    valid = b > a
    out[valid] = (lb + diff)[valid]
    return out.reshape(np.broadcast_shapes(lo.shape, hi.shape))


class Kernel:
    """Base class: a parametric kernel basis of size ``r`` with frozen fields.

    Subclasses define ``family``, ``FIELDS`` (orderered tuple of parameter
    field names) and ``ALWAYS_FROZEN`` (fields that are hyperparameters, never
    fitted). Freezing additional fields at construction time yields
    sum-of-basis-functions behaviour (only the weights stay free).
    """

    family = None
    FIELDS = ()
    ALWAYS_FROZEN = ()

    def __init__(self, r=1, frozen=None):
        self.r = int(r)
        if self.r < 1:
            raise ValueError(f"basis size r must be >= 1, got {r}")
        frozen = dict(frozen or {})
        unknown = set(frozen) - set(self.FIELDS)
        if unknown:
            raise ValueError(f"unknown frozen fields for {self.family}: {sorted(unknown)}")
        for name in self.ALWAYS_FROZEN:
            if name not in frozen:
                raise ValueError(f"{self.family} kernel requires frozen field {name!r}")
        self.frozen = {}
        for name, value in frozen.items():
            arr = np.broadcast_to(np.asarray(value, dtype=float), (self.r,)).copy()
            self.frozen[name] = arr
        self.free_fields = tuple(f for f in self.FIELDS if f not in self.frozen)

    # -- parameter layout -----------------------------------------------------

    @property
    def n_free(self):
        return self.r * len(self.free_fields)

    def param_names(self):
        return [f"{field}_{l + 1}" for field in self.free_fields for l in range(self.r)]

    def fields(self, params):
        """Flat free-parameter array -> dict of all field arrays (length r)."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_free,):
            raise ValueError(f"expected {self.n_free} parameters for {self!r}, got shape {params.shape}")
        out = dict(self.frozen)
        for pos, field in enumerate(self.free_fields):
            out[field] = params[pos * self.r : (pos + 1) * self.r]
        return out

    def pack(self, **field_values):
        """Dict of free field arrays -> flat free-parameter array."""
        blocks = []
        for field in self.free_fields:
            if field not in field_values:
                raise ValueError(f"missing value for free field {field!r}")
            blocks.append(np.broadcast_to(np.asarray(field_values[field], dtype=float), (self.r,)))
        return np.concatenate(blocks) if blocks else np.zeros(0)

    def stack_free(self, partials):
        """Dict of per-field partial blocks -> (n_free, n) array in layout order."""
        return np.concatenate([np.atleast_2d(partials[f]) for f in self.free_fields], axis=0) \
            if self.free_fields else np.zeros((0, 0))

    # positive fields default: everything except the Gaussian mean
    POSITIVE_FIELDS = ("omega", "alpha", "beta", "delta")

    def lower_bounds(self):
        """Per-free-parameter lower bounds used by the solver's projection."""
        out = np.full(self.n_free, -np.inf)
        for pos, field in enumerate(self.free_fields):
            if field in self.POSITIVE_FIELDS:
                out[pos * self.r : (pos + 1) * self.r] = PARAM_FLOOR
        return out

    # -- numerical surface (implemented per family) ---------------------------

    def phi(self, params, x):
        raise NotImplementedError

    def psi(self, params, x):
        raise NotImplementedError

    def phi_partials(self, params, x):
        """Dict field -> (r, n) partial arrays of phi."""
        raise NotImplementedError

    def psi_partials(self, params, x):
        raise NotImplementedError

    def l1(self, params):
        raise NotImplementedError

    def l2_sq(self, params):
        raise NotImplementedError

    def sample(self, params, size, rng):
        """Draws from the normalized density phi / ||phi||_1."""
        raise NotImplementedError

    def envelope(self, params, x):
        """sup_{y >= x} phi(y); non-increasing in x."""
        raise NotImplementedError

    # -- shared helpers --------------------------------------------------------

    def grad_phi(self, params, x):
        return self.stack_free(self.phi_partials(params, np.atleast_1d(np.asarray(x, dtype=float))))

    def grad_psi(self, params, x):
        return self.stack_free(self.psi_partials(params, np.atleast_1d(np.asarray(x, dtype=float))))

    def component_masses(self, params):
        """L1 mass per basis component, used to pick mixture components."""
        raise NotImplementedError

    def _check_x(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(x < 0):
            raise ValueError("kernel argument x must be non-negative")
        return x

    def sample_mixture(self, params, size, rng, component_sampler):
        """Mixture sampling: component l with probability mass_l / total."""
        masses = self.component_masses(params)
        total = masses.sum()
        if total <= 0:
            raise ValueError("cannot sample offspring from a zero-mass kernel")
        choice = rng.choice(self.r, size=size, p=masses / total)
        out = np.empty(size, dtype=float)
        for l in range(self.r):
            take = choice == l
            n = int(take.sum())
            if n:
                out[take] = component_sampler(l, n)
        return out

    def __repr__(self):
        frozen = f", frozen={sorted(self.frozen)}" if self.frozen else ""
        return f"{type(self).__name__}(r={self.r}{frozen})"
