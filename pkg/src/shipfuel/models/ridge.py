"""L2-penalized linear regression solved exactly via the normal equations."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_X_y

from ..errors import SingularSystem


class RidgeRegressor(BaseEstimator, RegressorMixin):
    """Minimizes ||y - Xb||^2 + lam*||b||^2 on standardized columns.

    The intercept is unpenalized (fit on centered y) and the penalty applies
    in standardized feature space; reported ``coef_``/``intercept_`` are mapped
    back to raw units so predictions read ``intercept_ + X @ coef_``.
    """

    def __init__(self, lam: float = 1.0):
        self.lam = lam

    def fit(self, X, y):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        X, y = check_X_y(X, y, y_numeric=True)
        n, p = X.shape

        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_
        y_mean = y.mean()
        yc = y - y_mean

        if self.lam == 0 and np.linalg.matrix_rank(Z) < p:
            raise SingularSystem("rank-deficient design with lam = 0")
        gram = Z.T @ Z + self.lam * np.eye(p)
        try:
            beta = np.linalg.solve(gram, Z.T @ yc)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc

        self.beta_std_ = beta
        self.coef_ = beta / self.scale_
        self.intercept_ = y_mean - float(self.coef_ @ self.mean_)
        self.n_features_in_ = p
        return self

    def predict(self, X):
        X = check_array(X)
        return self.intercept_ + X @ self.coef_

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RidgeRegressor":
        model = cls(lam=payload["lam"])
        model.coef_ = np.asarray(payload["coef"], dtype=float)
        model.intercept_ = float(payload["intercept"])
        model.mean_ = np.asarray(payload["mean"], dtype=float)
        model.scale_ = np.asarray(payload["scale"], dtype=float)
        model.beta_std_ = model.coef_ * model.scale_
        model.n_features_in_ = model.coef_.size
        return model
