"""Scikit-learn style estimators wrapping the trainable components.

The basis computation behaves like an uncentered PCA and the weight solver
like a constrained linear regression, so both are exposed with the
fit/transform/predict API and work inside standard pipelines and
cross-validation tooling. Rows are samples (snapshots), columns features
(dofs), following the sklearn convention; the solver-facing code keeps the
transposed column-snapshot layout.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .ecsw import nnls
from .pod import pod_of_matrix


class PodReducer(BaseEstimator, TransformerMixin):
    """Orthogonal mode reduction of snapshot data.

    Parameters
    ----------
    n_modes:
        Number of modes to keep; mutually exclusive with energy.
    energy:
        Energy-fraction target in (0, 1]; the smallest mode count reaching it
        is used.
    dirichlet_ids:
        Feature indices zeroed before the decomposition; the corresponding
        rows of every mode vanish exactly.
    """

    def __init__(self, n_modes=None, energy=None, dirichlet_ids=()):
        self.n_modes = n_modes
        self.energy = energy
        self.dirichlet_ids = dirichlet_ids

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if (self.n_modes is None) == (self.energy is None):
            raise ValueError("set exactly one of n_modes or energy")
        size = int(self.n_modes) if self.n_modes is not None else float(self.energy)
        basis = pod_of_matrix(X.T, np.asarray(self.dirichlet_ids, dtype=int), size)
        self.basis_ = basis
        self.modes_ = basis.modes
        self.singular_values_ = basis.singular_values
        self.n_modes_ = basis.n_modes
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "modes_"):
            raise NotFittedError("PodReducer is not fitted")

    def transform(self, X):
        self._check_fitted()
        X = check_array(X, dtype=float)
        return X @ self.modes_

    def inverse_transform(self, Z):
        self._check_fitted()
        Z = check_array(Z, dtype=float)
        return Z @ self.modes_.T


class NonnegativeLeastSquares(BaseEstimator, RegressorMixin):
    """Linear regression with nonnegative coefficients.

    Active-set solve with the same early-termination rule on the coefficient
    step used by the hyper-reduction training; fitted attributes expose the
    sparsity and convergence diagnostics.
    """

    def __init__(self, step_tolerance=1e-4, max_iters=None):
        self.step_tolerance = step_tolerance
        self.max_iters = max_iters

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        coef, info = nnls(X, y, step_tolerance=self.step_tolerance, max_iters=self.max_iters)
        self.coef_ = coef
        self.residual_norm_ = info["residual_norm"]
        self.converged_ = info["converged"]
        self.termination_ = info["termination"]
        self.n_iterations_ = info["n_iterations"]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("NonnegativeLeastSquares is not fitted")
        X = check_array(X, dtype=float)
        return X @ self.coef_
