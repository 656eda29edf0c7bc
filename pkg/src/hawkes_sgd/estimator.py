"""Scikit-learn style front end for the stochastic least-squares fitter."""

import numpy as np
from sklearn.base import BaseEstimator

from . import diagnostics
from .exceptions import ValidationError
from .lse import lse_decomposed
from .model import HawkesModel
from .paths import EventPath
from .simulate import GroundTruth, simulate_cluster
from .solver import SolverConfig, StrataConfig, fit
from .validation import check_seed, require_fitted


class HawkesProcessEstimator(BaseEstimator):
    """Parametric multivariate Hawkes estimator with stochastic LSE descent.

    Follows the estimator API: hyperparameters in ``__init__`` (untouched by
    ``fit``), fitted state in trailing-underscore attributes, ``get_params`` /
    ``set_params`` for composition with the wider ecosystem.

    Parameters
    ----------
    family : str or list of list of str
        Kernel family for every pair, or a d x d matrix of family names.
    n_basis : int
        Number of basis components per kernel.
    frozen : dict, optional
        Field name -> fixed value(s), broadcast to every kernel pair. Freezing
        all shape fields leaves a sum-of-basis-functions model where only the
        weights are fitted. Delayed-exponential kernels require frozen
        ``delta``.
    n_iter, learning_rate, early_stop : solver schedule controls.
    single_budget, double_budget, h_max, lag_strata, adaptive_rounds,
    ema_weight : sampling controls for the gradient estimator.
    random_state : int, Generator or None
        Seed for the sampling streams and the random initialization.

    Attributes
    ----------
    n_dims_ : int
    baseline_ : ndarray of shape (d,)
    kernel_params_ : list of list of ndarray, fitted free parameters per pair.
    adjacency_ : ndarray of shape (d, d), kernel L1 masses.
    model_ : the fitted HawkesModel structure.
    theta_ : flat fitted parameter vector.
    fit_record_ : trajectory record from the solver.
    """

    def __init__(
        self,
        family="exponential",
        n_basis=1,
        frozen=None,
        n_iter=1000,
        learning_rate=0.05,
        early_stop=True,
        single_budget=1024,
        double_budget=1024,
        h_max=40,
        lag_strata=10,
        adaptive_rounds=4,
        ema_weight=0.6,
        random_state=None,
    ):
        self.family = family
        self.n_basis = n_basis
        self.frozen = frozen
        self.n_iter = n_iter
        self.learning_rate = learning_rate
        self.early_stop = early_stop
        self.single_budget = single_budget
        self.double_budget = double_budget
        self.h_max = h_max
        self.lag_strata = lag_strata
        self.adaptive_rounds = adaptive_rounds
        self.ema_weight = ema_weight
        self.random_state = random_state

    # -- construction helpers ---------------------------------------------------

    def _build_model(self, d):
        fam = self.family
        if isinstance(fam, str):
            fam = [[fam] * d for _ in range(d)]
        if len(fam) != d or any(len(row) != d for row in fam):
            raise ValidationError(f"family matrix must be {d} x {d} to match the event streams")
        from .kernels import make_kernel

        return HawkesModel(
            [[make_kernel(fam[k][i], r=self.n_basis, frozen=self.frozen) for i in range(d)] for k in range(d)]
        )

    def _configs(self):
        solver_cfg = SolverConfig(
            n_iter=self.n_iter,
            learning_rate=self.learning_rate,
            early_stop=self.early_stop,
            seed=check_seed(self.random_state),
        )
        strata_cfg = StrataConfig(
            single_budget=self.single_budget,
            double_budget=self.double_budget,
            h_max=self.h_max,
            n_lag_bins=self.lag_strata,
            rounds=self.adaptive_rounds,
            ema_weight=self.ema_weight,
        )
        return solver_cfg, strata_cfg

    def _as_path(self, events, horizon):
        if isinstance(events, EventPath):
            return events
        return EventPath(events, horizon=horizon)

    # -- estimator API ------------------------------------------------------------

    def fit(self, events, horizon=None):
        """Fit the model to one observed path.

        Parameters
        ----------
        events : EventPath or sequence of arrays
            One strictly increasing array of jump times per event type.
        horizon : float, optional
            Observation window end (defaults to the last event time).
        """
        path = self._as_path(events, horizon)
        model = self._build_model(path.d)
        solver_cfg, strata_cfg = self._configs()
        record = fit(path, model, theta0=None, solver_cfg=solver_cfg, strata_cfg=strata_cfg)
        self.model_ = model
        self.theta_ = record.theta
        self.fit_record_ = record
        self.n_dims_ = path.d
        self.horizon_ = path.horizon
        self.baseline_ = np.array(
            [model.mu_of(model.theta_k(record.theta, k)) for k in range(path.d)]
        )
        self.kernel_params_ = [
            [model.kernel_params(model.theta_k(record.theta, k), k, i) for i in range(path.d)]
            for k in range(path.d)
        ]
        self.adjacency_ = model.l1_matrix(record.theta)
        return self

    def predict_intensity(self, events, times, horizon=None):
        """Conditional intensity of every type at the given times, under the fit."""
        require_fitted(self)
        path = self._as_path(events, horizon)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        return np.vstack(
            [self.model_.intensity(path, self.theta_, k, times) for k in range(self.n_dims_)]
        )

    def residuals(self, events, horizon=None):
        """Time-rescaling residual set of the fitted model on a path."""
        require_fitted(self)
        path = self._as_path(events, horizon)
        return diagnostics.residuals(path, self.model_, self.theta_)

    def score(self, events, horizon=None):
        """Negative exhaustive least-squares error (higher is better)."""
        require_fitted(self)
        path = self._as_path(events, horizon)
        return -lse_decomposed(path, self.model_, self.theta_)

    def simulate(self, horizon, random_state=None):
        """Draw a path from the fitted model (cluster construction)."""
        require_fitted(self)
        gt = GroundTruth(self.model_, self.theta_)
        return simulate_cluster(gt, horizon, seed=check_seed(random_state))
