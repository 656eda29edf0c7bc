import numpy as np
import pytest
from scipy import stats

from hawkes_sgd import (
    EventPath,
    GroundTruth,
    HawkesModel,
    ValidationError,
    grad_lse_exact,
    lse_decomposed,
    lse_exact,
    simulate_cluster,
)

from conftest import exp_model_1d, exp_model_2d, random_path


def random_model_theta(family, d, rng, r=1):
    model = HawkesModel.homogeneous(
        d, family, r=r, frozen={"delta": rng.uniform(0.2, 1.0, r)} if family == "delayed_exponential" else None
    )
    params = []
    for k in range(d):
        row = []
        for i in range(d):
            ker = model.kernels[k][i]
            fields = {}
            for f in ker.free_fields:
                if f == "omega":
                    fields[f] = rng.uniform(0.05, 0.3 / d, r)
                elif f == "beta":
                    fields[f] = rng.uniform(0.5, 2.0, r)
                elif f == "delta":
                    fields[f] = rng.uniform(0.0, 2.0, r) if family == "gaussian" else rng.uniform(0.2, 1.5, r)
                elif f == "alpha":
                    fields[f] = rng.uniform(0.1, 1.0, r)
            row.append(ker.pack(**fields))
        params.append(row)
    theta = model.pack(rng.uniform(0.5, 1.5, d), params)
    return model, theta


class TestLseExact:
    def test_pure_poisson_closed_form(self):
        # with a zero-mass kernel the objective is mu^2 - 2 eta mu
        model, theta = exp_model_1d(mu=1.2, omega=1e-10, beta=1.0)
        path = EventPath([np.linspace(0.5, 9.5, 25)], horizon=10.0)
        eta = path.event_rate(0)
        want = 1.2**2 - 2 * eta * 1.2
        # the omega floor 1e-10 leaves a matching-size remnant
        assert lse_exact(path, model, theta) == pytest.approx(want, abs=1e-8)
        assert lse_decomposed(path, model, theta) == pytest.approx(want, abs=1e-8)

    def test_poisson_plugin_value(self):
        model, _ = exp_model_1d()
        path = EventPath([np.linspace(0.5, 9.5, 25)], horizon=10.0)
        eta = path.event_rate(0)
        theta = model.pack([eta], [[model.kernels[0][0].pack(omega=1e-10, beta=1.0)]])
        assert lse_decomposed(path, model, theta) == pytest.approx(-(eta**2), abs=1e-9)

    def test_refuses_trivial_path(self):
        model, theta = exp_model_1d()
        with pytest.raises(ValidationError):
            lse_exact(EventPath([[1.0]], horizon=2.0), model, theta)

    def test_refuses_oversized_path(self):
        model, theta = exp_model_1d()
        big = EventPath([np.linspace(0.001, 9.999, 10_001)], horizon=10.0)
        with pytest.raises(ValidationError):
            lse_exact(big, model, theta)

    def test_two_quadrature_schemes_agree(self, rng):
        # lse_exact is the oracle; cross-check its integral against an
        # independent dense Simpson rule
        model, theta = exp_model_1d()
        path = random_path(rng, d=1, n_per_dim=40, horizon=12.0)
        got = lse_exact(path, model, theta)

        from scipy.integrate import simpson

        grid_all = np.unique(np.concatenate([[0.0, path.horizon], *path.times]))
        integral = 0.0
        for a, b in zip(grid_all[:-1], grid_all[1:]):
            xs = np.linspace(a, b, 81)
            # the intensity is right-continuous at jumps; stay inside the interval
            xs[0] = a + 1e-9 * (b - a)
            lam = model.intensity(path, theta, 0, xs)
            integral += simpson(lam**2, x=xs)
        term2 = 2.0 / path.horizon * model.intensity(path, theta, 0, path.times[0]).sum()
        alt = integral / path.horizon - term2
        assert got == pytest.approx(alt, rel=1e-6)


class TestDecompositionEquivalence:
    @pytest.mark.parametrize("family", ["exponential", "gaussian", "rayleigh", "triangular"])
    def test_matches_exact_univariate(self, family, rng):
        model, theta = random_model_theta(family, 1, rng)
        path = random_path(rng, d=1, n_per_dim=60, horizon=15.0)
        a = lse_exact(path, model, theta)
        b = lse_decomposed(path, model, theta)
        assert abs(a - b) / (1.0 + abs(a)) < 1e-6

    def test_matches_exact_bivariate_benchmark_params(self, rng):
        model, theta = exp_model_2d()
        gt = GroundTruth(model, theta)
        path = simulate_cluster(gt, 6.0, seed=10)
        a = lse_exact(path, model, theta)
        b = lse_decomposed(path, model, theta)
        assert abs(a - b) / (1.0 + abs(a)) < 1e-6

    def test_additivity_over_dimensions(self, rng):
        model, theta = random_model_theta("exponential", 2, rng)
        path = random_path(rng, d=2, n_per_dim=30, horizon=12.0)
        total = lse_decomposed(path, model, theta)
        parts = sum(lse_decomposed(path, model, theta, k) for k in range(2))
        assert total == pytest.approx(parts, rel=1e-14)


class TestExactGradient:
    def test_matches_finite_differences(self, rng):
        model, theta = random_model_theta("exponential", 2, rng)
        path = random_path(rng, d=2, n_per_dim=25, horizon=10.0)
        for k in range(2):
            grad = grad_lse_exact(path, model, theta, k)
            off = model._k_offsets[k]
            for idx in range(model.n_params_k(k)):
                h = 1e-6 * max(1.0, abs(theta[off + idx]))
                up = theta.copy()
                up[off + idx] += h
                dn = theta.copy()
                dn[off + idx] -= h
                fd = (lse_decomposed(path, model, up, k) - lse_decomposed(path, model, dn, k)) / (2 * h)
                assert abs(grad[idx] - fd) / max(1.0, abs(fd)) < 1e-5

    def test_mu_partial_kernel_free(self):
        model, _ = exp_model_1d()
        path = EventPath([np.linspace(0.5, 9.5, 30)], horizon=10.0)
        eta = path.event_rate(0)
        mu = 0.8
        theta = model.pack([mu], [[model.kernels[0][0].pack(omega=1e-10, beta=1.0)]])
        grad = grad_lse_exact(path, model, theta, 0)
        assert grad[0] == pytest.approx(2 * (mu - eta), abs=1e-8)

    def test_mu_partial_zero_at_poisson_optimum(self):
        model, _ = exp_model_1d()
        path = EventPath([np.linspace(0.5, 9.5, 30)], horizon=10.0)
        eta = path.event_rate(0)
        theta = model.pack([eta], [[model.kernels[0][0].pack(omega=1e-10, beta=1.0)]])
        assert grad_lse_exact(path, model, theta, 0)[0] == pytest.approx(0.0, abs=1e-8)


@pytest.mark.slow
def test_contrast_is_minimized_at_truth():
    """Statistical sanity: over many paths the objective is lowest at the
    generating parameters (one-sided paired t-test per perturbation)."""
    model, theta = exp_model_1d()
    gt = GroundTruth(model, theta)
    rng = np.random.default_rng(77)
    base_vals = []
    pert_vals = {p: [] for p in range(10)}
    perturbations = []
    for p in range(10):
        delta = rng.uniform(-0.3, 0.3, size=3)
        delta[np.abs(delta) < 0.1] = 0.25
        perturbations.append(theta * (1.0 + delta))
    for rep in range(50):
        path = simulate_cluster(gt, 200.0, seed=1000 + rep)
        base_vals.append(lse_decomposed(path, model, theta))
        for p, th in enumerate(perturbations):
            pert_vals[p].append(lse_decomposed(path, model, th))
    base_vals = np.array(base_vals)
    for p in range(10):
        diff = np.array(pert_vals[p]) - base_vals
        t_stat, p_val = stats.ttest_1samp(diff, 0.0, alternative="greater")
        assert p_val < 0.05, f"perturbation {p} not significantly worse (p={p_val})"
