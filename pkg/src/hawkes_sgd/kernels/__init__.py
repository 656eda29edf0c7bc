"""Parametric kernel families and their correlation (cross-product) forms."""

from ..exceptions import CapabilityError
from .base import Kernel, PARAM_FLOOR, gauss_mass, log_gauss_mass, norm_pdf
from .exponential import DelayedExponentialKernel, ExponentialKernel, shifted_exp_upsilon
from .gaussian import GaussianKernel, gaussian_exp_upsilon, gaussian_upsilon
from .rayleigh import RayleighKernel, rayleigh_upsilon
from .triangular import TriangularKernel, triangular_upsilon

FAMILIES = {
    "exponential": ExponentialKernel,
    "delayed_exponential": DelayedExponentialKernel,
    "gaussian": GaussianKernel,
    "rayleigh": RayleighKernel,
    "triangular": TriangularKernel,
}

_EXP_LIKE = ("exponential", "delayed_exponential")


def make_kernel(family, r=1, frozen=None):
    """Instantiate a kernel family by name."""
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise CapabilityError(
            f"unknown kernel family {family!r}; available: {sorted(FAMILIES)}"
        ) from None
    return cls(r=r, frozen=frozen)


def _dispatch(ker_i, ker_j):
    fam_i, fam_j = ker_i.family, ker_j.family
    if fam_i in _EXP_LIKE and fam_j in _EXP_LIKE:
        return shifted_exp_upsilon
    if fam_i == fam_j == "gaussian":
        return gaussian_upsilon
    if fam_i == "gaussian" and fam_j == "exponential":
        return gaussian_exp_upsilon
    if fam_i == fam_j and fam_i in ("rayleigh", "triangular"):
        return rayleigh_upsilon if fam_i == "rayleigh" else triangular_upsilon
    raise CapabilityError(
        f"no closed-form correlation for kernel pair ({fam_i}, {fam_j}); "
        "supported: same-family pairs, exponential/delayed mixes, and "
        "gaussian (first factor) with exponential (second factor)"
    )


def upsilon(ker_i, par_i, ker_j, par_j, t, s):
    """Correlation int_0^t phi_i(u) phi_j(u + s) du for a supported family pair."""
    val, _, _ = _dispatch(ker_i, ker_j)(ker_i, par_i, ker_j, par_j, t, s, want_grads=False)
    return val


def upsilon_with_grads(ker_i, par_i, ker_j, par_j, t, s):
    """Correlation value plus per-side free-parameter partials.

    Returns ``(value, grad_i, grad_j)`` with gradients stacked in each
    kernel's free-field layout, shape ``(n_free, n_points)``.
    """
    val, gi, gj = _dispatch(ker_i, ker_j)(ker_i, par_i, ker_j, par_j, t, s, want_grads=True)
    return val, ker_i.stack_free(gi), ker_j.stack_free(gj)


def upsilon_self_with_grads(ker, par, t, s):
    """Diagonal correlation of a kernel with itself; partials sum both factor sides."""
    val, gi, gj = _dispatch(ker, ker)(ker, par, ker, par, t, s, want_grads=True)
    combined = {k: gi[k] + gj[k] for k in gi}
    return val, ker.stack_free(combined)


def grad_upsilon(ker_i, par_i, ker_j, par_j, t, s):
    """Partials only; see upsilon_with_grads."""
    _, gi, gj = upsilon_with_grads(ker_i, par_i, ker_j, par_j, t, s)
    return gi, gj


__all__ = [
    "Kernel",
    "PARAM_FLOOR",
    "FAMILIES",
    "make_kernel",
    "ExponentialKernel",
    "DelayedExponentialKernel",
    "GaussianKernel",
    "RayleighKernel",
    "TriangularKernel",
    "upsilon",
    "upsilon_with_grads",
    "upsilon_self_with_grads",
    "grad_upsilon",
    "gauss_mass",
    "log_gauss_mass",
    "norm_pdf",
]
