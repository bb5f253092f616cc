"""Epsilon-insensitive support vector regression via an SMO-style dual solver.

The dual is solved over 2n box-bounded variables (alpha, alpha*) under the
single equality constraint sum(alpha - alpha*) = 0, picking the maximal
violating pair each iteration and solving the two-variable subproblem
analytically. Stopping rule: maximal KKT violation (m - M) <= tol.
"""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_X_y

from ..errors import ConvergenceWarning

_TAU = 1e-12


def _rbf(A, B, gamma):
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class SvrRegressor(BaseEstimator, RegressorMixin):
    """SVR with linear or rbf kernel on internally standardized features.

    ``gamma="scale"`` resolves to 1 / (p * var(Z)) on the standardized training
    matrix. When the iteration cap is reached the best iterate is kept,
    ``converged_`` is False and a ConvergenceWarning is emitted.
    """

    def __init__(self, C: float = 1.0, epsilon: float = 0.1, kernel: str = "rbf",
                 gamma="scale", tol: float = 1e-6, max_iter: int = 200_000):
        self.C = C
        self.epsilon = epsilon
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    # -- kernel plumbing ----------------------------------------------------

    def _kernel(self, A, B):
        if self.kernel == "linear":
            return A @ B.T
        if self.kernel == "rbf":
            return _rbf(A, B, self.gamma_)
        raise ValueError(f"unknown kernel {self.kernel!r}")

    def _standardize(self, X):
        return (X - self.mean_) / self.scale_

    # -- solver ---------------------------------------------------------------

    def fit(self, X, y):
        if self.C <= 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        X, y = check_X_y(X, y, y_numeric=True)
        n, p = X.shape

        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = self._standardize(X)
        if self.gamma == "scale":
            var = float(Z.var())
            self.gamma_ = 1.0 / (p * var) if var > 0 else 1.0
        else:
            self.gamma_ = float(self.gamma)

        K = self._kernel(Z, Z)
        C, eps = float(self.C), float(self.epsilon)

        v = np.zeros(2 * n)                      # [alpha, alpha*]
        d = np.concatenate([np.ones(n), -np.ones(n)])
        grad = np.concatenate([eps - y, eps + y])
        beta = np.zeros(n)                       # alpha - alpha*

        it = 0
        converged = False
        while it < self.max_iter:
            val = -d * grad
            up = np.concatenate([v[:n] < C, v[n:] > 0])
            low = np.concatenate([v[:n] > 0, v[n:] < C])
            if not up.any() or not low.any():
                converged = True
                break
            up_vals = np.where(up, val, -np.inf)
            low_vals = np.where(low, val, np.inf)
            i = int(np.argmax(up_vals))
            j = int(np.argmin(low_vals))
            m, M = val[i], val[j]
            if m - M <= self.tol:
                converged = True
                break

            pi, pj = i % n, j % n
            quad = K[pi, pi] + K[pj, pj] - 2.0 * K[pi, pj]
            if quad <= _TAU:
                quad = _TAU
            step = (m - M) / quad
            cap_i = (C - v[i]) if d[i] > 0 else v[i]
            cap_j = v[j] if d[j] > 0 else (C - v[j])
            step = min(step, cap_i, cap_j)
            if step <= 0:
                converged = True
                break

            v[i] += d[i] * step
            v[j] -= d[j] * step
            np.clip(v, 0.0, C, out=v)
            beta[pi] += step
            beta[pj] -= step
            col = step * (K[:, pi] - K[:, pj])
            grad[:n] += col
            grad[n:] -= col
            it += 1

        if not converged:
            warnings.warn("SVR solver hit max_iter before reaching tolerance",
                          ConvergenceWarning)

        # bias from the final gradient: free variables pin it, bounds bracket it
        val = -d * grad
        up = np.concatenate([v[:n] < C, v[n:] > 0])
        low = np.concatenate([v[:n] > 0, v[n:] < C])
        m = float(np.max(np.where(up, val, -np.inf))) if up.any() else None
        M = float(np.min(np.where(low, val, np.inf))) if low.any() else None
        if m is not None and M is not None:
            b = (m + M) / 2.0
        else:
            b = m if m is not None else (M if M is not None else 0.0)

        sv = np.abs(beta) > 1e-12
        self.dual_coef_ = beta[sv]
        self.support_idx_ = np.flatnonzero(sv)
        self.support_vectors_ = Z[sv]
        self.intercept_ = float(b)
        self.converged_ = converged
        self.n_iter_ = it
        self.n_features_in_ = p
        return self

    def predict(self, X):
        X = check_array(X)
        Z = self._standardize(X)
        if self.dual_coef_.size == 0:
            return np.full(Z.shape[0], self.intercept_)
        return self._kernel(Z, self.support_vectors_) @ self.dual_coef_ + self.intercept_

    def weight_norm(self) -> float:
        """||w|| of the (kernel-space) hyperplane: sqrt(beta' K beta)."""
        if self.dual_coef_.size == 0:
            return 0.0
        Ksv = self._kernel(self.support_vectors_, self.support_vectors_)
        return float(np.sqrt(max(0.0, self.dual_coef_ @ Ksv @ self.dual_coef_)))

    def to_dict(self) -> dict:
        return {
            "C": self.C, "epsilon": self.epsilon, "kernel": self.kernel,
            "gamma": self.gamma, "gamma_resolved": self.gamma_,
            "tol": self.tol, "max_iter": self.max_iter,
            "dual_coef": self.dual_coef_.tolist(),
            "support_idx": self.support_idx_.tolist(),
            "support_vectors": self.support_vectors_.tolist(),
            "intercept": self.intercept_,
            "mean": self.mean_.tolist(), "scale": self.scale_.tolist(),
            "converged": self.converged_,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SvrRegressor":
        model = cls(C=payload["C"], epsilon=payload["epsilon"], kernel=payload["kernel"],
                    gamma=payload["gamma"], tol=payload["tol"], max_iter=payload["max_iter"])
        model.gamma_ = float(payload["gamma_resolved"])
        model.dual_coef_ = np.asarray(payload["dual_coef"], dtype=float)
        model.support_idx_ = np.asarray(payload["support_idx"], dtype=int)
        model.support_vectors_ = np.asarray(payload["support_vectors"], dtype=float)
        model.intercept_ = float(payload["intercept"])
        model.mean_ = np.asarray(payload["mean"], dtype=float)
        model.scale_ = np.asarray(payload["scale"], dtype=float)
        model.converged_ = bool(payload["converged"])
        model.n_features_in_ = model.mean_.size
        return model


def kkt_violations(model: SvrRegressor, X, y) -> np.ndarray:
    """Per-point KKT violation of a fitted model on its training set.

    A dual coefficient at the box boundary must pair with a point outside/on
    the epsilon-tube; an interior coefficient pins the residual to the tube
    edge; a zero coefficient requires the point inside the tube.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    beta = np.zeros(n)
    beta[model.support_idx_] = model.dual_coef_
    e = model.predict(X) - y
    C, eps = float(model.C), float(model.epsilon)
    atol = 1e-8 * max(C, 1.0)

    viol = np.empty(n)
    for k in range(n):
        b = beta[k]
        if b >= C - atol:
            viol[k] = max(0.0, e[k] + eps)
        elif b > atol:
            viol[k] = abs(e[k] + eps)
        elif b <= -(C - atol):
            viol[k] = max(0.0, eps - e[k])
        elif b < -atol:
            viol[k] = abs(e[k] - eps)
        else:
            viol[k] = max(0.0, abs(e[k]) - eps)
    return viol
