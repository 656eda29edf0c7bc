"""Model assembly: a d x d kernel matrix plus baselines, with a flat layout.

The flat parameter vector is grouped by target dimension:

    theta = (theta_1, ..., theta_d),   theta_k = (mu_k, params_k1, ..., params_kd)

where ``params_ki`` are the free parameters of the kernel quantifying how
type-i events excite type k. Everything the solver touches (bounds, random
initialization, intensity evaluation) lives here.
"""

import numpy as np

from . import kernels as K
from .exceptions import ValidationError
from .kernels import PARAM_FLOOR


class HawkesModel:
    """A linear multivariate Hawkes model: baselines + parametric kernel matrix.

    Parameters
    ----------
    kernel_matrix : Kernel | list[list[Kernel]]
        Either a single kernel (shared family/spec for a 1-dimensional model)
        or a d x d nested list; entry [k][i] governs excitation of type k by
        type-i events.
    """

    def __init__(self, kernel_matrix):
        if isinstance(kernel_matrix, K.Kernel):
            kernel_matrix = [[kernel_matrix]]
        self.kernels = [list(row) for row in kernel_matrix]
        self.d = len(self.kernels)
        for row in self.kernels:
            if len(row) != self.d:
                raise ValidationError("kernel matrix must be square")
        self._k_offsets = np.zeros(self.d + 1, dtype=np.int64)
        for k in range(self.d):
            self._k_offsets[k + 1] = self._k_offsets[k] + self.n_params_k(k)

    @classmethod
    def homogeneous(cls, d, family, r=1, frozen=None):
        """A d x d model with one shared family/spec for every pair."""
        return cls([[K.make_kernel(family, r=r, frozen=frozen) for _ in range(d)] for _ in range(d)])

    # -- layout ----------------------------------------------------------------

    def n_params_k(self, k):
        return 1 + sum(ker.n_free for ker in self.kernels[k])

    @property
    def n_params(self):
        return int(self._k_offsets[-1])

    def theta_k(self, theta, k):
        """View of dimension k's block inside the full flat vector."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValidationError(f"theta must have shape ({self.n_params},), got {theta.shape}")
        return theta[self._k_offsets[k] : self._k_offsets[k + 1]]

    def kernel_slice(self, k, i):
        """Slice of kernel (k, i)'s free parameters inside theta_k."""
        off = 1
        for col in range(i):
            off += self.kernels[k][col].n_free
        return slice(off, off + self.kernels[k][i].n_free)

    def mu_of(self, theta_k):
        return float(theta_k[0])

    def kernel_params(self, theta_k, k, i):
        return np.asarray(theta_k, dtype=float)[self.kernel_slice(k, i)]

    def param_names_k(self, k):
        names = [f"mu_{k + 1}"]
        for i, ker in enumerate(self.kernels[k]):
            names.extend(f"phi_{k + 1}{i + 1}.{n}" for n in ker.param_names())
        return names

    def param_names(self):
        return [n for k in range(self.d) for n in self.param_names_k(k)]

    def pack(self, mu, kernel_params):
        """(mu vector, [k][i] param arrays) -> flat theta."""
        mu = np.asarray(mu, dtype=float).reshape(self.d)
        blocks = []
        for k in range(self.d):
            blocks.append([mu[k]])
            for i in range(self.d):
                par = np.asarray(kernel_params[k][i], dtype=float)
                if par.shape != (self.kernels[k][i].n_free,):
                    raise ValidationError(
                        f"kernel ({k},{i}) expects {self.kernels[k][i].n_free} free parameters, "
                        f"got shape {par.shape}"
                    )
                blocks.append(par)
        return np.concatenate([np.asarray(b, dtype=float) for b in blocks])

    def unpack(self, theta):
        mu = np.array([self.mu_of(self.theta_k(theta, k)) for k in range(self.d)])
        pars = [
            [self.kernel_params(self.theta_k(theta, k), k, i) for i in range(self.d)]
            for k in range(self.d)
        ]
        return mu, pars

    def lower_bounds_k(self, k):
        parts = [np.array([PARAM_FLOOR])]  # mu > 0
        parts.extend(ker.lower_bounds() for ker in self.kernels[k])
        return np.concatenate(parts)

    # -- evaluation --------------------------------------------------------------

    def phi(self, theta, k, i, x):
        return self.kernels[k][i].phi(self.kernel_params(self.theta_k(theta, k), k, i), x)

    def psi(self, theta, k, i, x):
        return self.kernels[k][i].psi(self.kernel_params(self.theta_k(theta, k), k, i), x)

    def upsilon(self, theta, i, j, k, t, s):
        th_k = self.theta_k(theta, k)
        return K.upsilon(
            self.kernels[k][i],
            self.kernel_params(th_k, k, i),
            self.kernels[k][j],
            self.kernel_params(th_k, k, j),
            t,
            s,
        )

    def intensity(self, path, theta, k, t):
        """lambda_k at times t (array) given the path history; O(N) per point."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        th_k = self.theta_k(theta, k)
        out = np.full(t.shape, self.mu_of(th_k))
        for i in range(self.d):
            times_i = path.times[i]
            if not times_i.size:
                continue
            ker = self.kernels[k][i]
            par = self.kernel_params(th_k, k, i)
            for pos, tv in enumerate(t):
                n_before = np.searchsorted(times_i, tv, side="left")
                if n_before:
                    out[pos] += ker.phi(par, tv - times_i[:n_before]).sum()
        return out

    def l1_matrix(self, theta):
        """Matrix of kernel L1 masses (branching matrix)."""
        out = np.zeros((self.d, self.d))
        for k in range(self.d):
            th_k = self.theta_k(theta, k)
            for i in range(self.d):
                out[k, i] = self.kernels[k][i].l1(self.kernel_params(th_k, k, i))
        return out

    def spectral_radius(self, theta):
        return float(np.max(np.abs(np.linalg.eigvals(self.l1_matrix(theta)))))

    # -- initialization ------------------------------------------------------------

    def random_init_k(self, path, k, rng, beta_scale=None):
        """Data-scaled random start: mu at half the empirical rate, log-uniform
        weights, Gaussian means over the inter-arrival scale.

        The decay/scale field beta is either log-uniform (legacy) or pinned to
        ``beta_scale`` with mild jitter; the solver screens a deterministic
        ladder of scales because the objective is too flat to recover from a
        start several octaves off the true time scale.
        """
        parts = [np.array([path.event_rate(k) / 2.0])]
        for i, ker in enumerate(self.kernels[k]):
            fields = {}
            for field in ker.free_fields:
                if field == "omega":
                    fields[field] = np.exp(rng.uniform(np.log(1e-2), np.log(1.0), size=ker.r))
                elif field == "beta":
                    if beta_scale is None:
                        fields[field] = np.exp(rng.uniform(np.log(1e-1), np.log(1e1), size=ker.r))
                    else:
                        fields[field] = beta_scale * np.exp(rng.uniform(-0.25, 0.25, size=ker.r))
                elif field == "delta":
                    gaps = np.diff(path.times[i]) if path.counts[i] > 1 else np.array([1.0])
                    fields[field] = rng.uniform(0.0, 10.0 * np.median(gaps), size=ker.r)
                elif field == "alpha":
                    gaps = np.diff(path.times[i]) if path.counts[i] > 1 else np.array([1.0])
                    fields[field] = rng.uniform(PARAM_FLOOR, 5.0 * np.median(gaps), size=ker.r)
            parts.append(ker.pack(**fields))
        return np.concatenate(parts)

    def validate_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValidationError(f"theta must have shape ({self.n_params},), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("theta contains non-finite values")
        for k in range(self.d):
            th_k = self.theta_k(theta, k)
            low = self.lower_bounds_k(k)
            if np.any(th_k < low):
                bad = np.flatnonzero(th_k < low)
                names = self.param_names_k(k)
                raise ValidationError(f"parameters below bounds for dim {k}: {[names[b] for b in bad]}")
        return theta

    def __repr__(self):
        fams = {self.kernels[k][i].family for k in range(self.d) for i in range(self.d)}
        return f"HawkesModel(d={self.d}, families={sorted(fams)}, n_params={self.n_params})"
