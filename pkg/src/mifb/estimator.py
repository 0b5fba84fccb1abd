"""Scikit-learn regressor fitting penalized least squares with MiFB."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .problem import CompositeProblem, least_squares_term, regularizer_from_config
from .solver import PRESETS, preset, solve

__all__ = ["MifbRegressor"]

PENALTIES = ("scad", "l1", "l0")


class MifbRegressor(RegressorMixin, BaseEstimator):
    """Sparse linear regression ``min 0.5 ||Xw - y||^2 + penalty(w)``.

    Parameters
    ----------
    penalty : {"scad", "l1", "l0"}
    alpha : float
        Penalty level (SCAD/l1/l0 ``lambda``).
    scad_a : float
        SCAD concavity parameter, > 2.
    preset : str
        Inertia pattern, one of ``"none"``, ``"heavy-ball"``, ``"ipiano"``,
        ``"ifb-equal"``, ``"two-step"``.
    inertia : float or sequence, optional
        Inertia for the preset; the preset default when omitted.
    step_fraction : float
        Stepsize as a fraction of ``1 / L``.
    max_iter, tol : int, float
        Iteration cap and step-length tolerance.
    force : bool
        Fit even when the parameters carry no descent certificate.
    fit_intercept : bool
        Center ``X`` and ``y`` before solving and refit the offset.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    n_iter_ : int
    trace_ : SolveTrace
    admissibility_ : AdmissibilityReport
    """

    def __init__(
        self,
        penalty="scad",
        alpha=1.0,
        scad_a=5.0,
        preset="none",
        inertia=None,
        step_fraction=0.5,
        max_iter=1000,
        tol=1e-10,
        force=False,
        fit_intercept=True,
    ):
        self.penalty = penalty
        self.alpha = alpha
        self.scad_a = scad_a
        self.preset = preset
        self.inertia = inertia
        self.step_fraction = step_fraction
        self.max_iter = max_iter
        self.tol = tol
        self.force = force
        self.fit_intercept = fit_intercept

    def _regularizer_config(self):
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        cfg = {"type": self.penalty, "lambda": float(self.alpha)}
        if self.penalty == "scad":
            cfg["a"] = float(self.scad_a)
        return cfg

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.fit_intercept:
            x_mean, y_mean = X.mean(axis=0), float(y.mean())
            Xc, yc = X - x_mean, y - y_mean
        else:
            x_mean, y_mean = np.zeros(X.shape[1]), 0.0
            Xc, yc = X, y
        if not np.any(Xc):
            raise ValueError("X has no variation to fit")
        n_features = X.shape[1]
        problem = CompositeProblem(
            least_squares_term(Xc, yc),
            regularizer_from_config(n_features, self._regularizer_config()),
        )
        params = preset(
            self.preset,
            inertia=self.inertia,
            gamma_fraction=self.step_fraction,
            max_iters=self.max_iter,
            tol_delta_x=self.tol,
        )
        self.trace_ = solve(problem, params, np.zeros(n_features), force=self.force, keep_iterates=0)
        self.coef_ = self.trace_.x_final.copy()
        self.intercept_ = y_mean - float(x_mean @ self.coef_)
        self.n_iter_ = self.trace_.n_iter
        self.admissibility_ = self.trace_.admissibility
        self.n_features_in_ = n_features
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_ + self.intercept_
