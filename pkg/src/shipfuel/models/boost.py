"""Second-order boosted trees with a leaf-count + L2-leaf-weight regularizer.

Squared-error loss l = (f - y)^2 / 2, so per-point gradient g = f - y and
hessian h = 1. Leaves take the damped Newton weight w* = -G / (H + lambda);
splits are accepted on positive gain

    gain = [G_l^2/(H_l+lam) + G_r^2/(H_r+lam) - G^2/(H+lam)] / 2 - gamma

by exact greedy enumeration (no histogram approximation -- the data here is
a few hundred rows). A round whose tree fails to lower the regularized
training objective is discarded and boosting stops, so the recorded
objective trace is non-increasing by construction and honestly evaluated.
"""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_X_y

from .tree import LEAF, Node, RegressionTree


class GradientTree(RegressionTree):
    """Tree grown on (gradient, hessian) statistics; leaf values are weights."""

    def __init__(self, max_depth: Optional[int] = 6, lambda_leaf: float = 1.0,
                 gamma_leaf: float = 0.0):
        super().__init__(max_depth=max_depth)
        self.lambda_leaf = lambda_leaf
        self.gamma_leaf = gamma_leaf

    def fit_gradients(self, X, g, h):
        X = np.asarray(X, dtype=float)
        g = np.asarray(g, dtype=float)
        h = np.asarray(h, dtype=float)
        self.nodes = []
        stack = [(np.arange(X.shape[0]), 0, -1, "left")]
        while stack:
            idx, depth, parent, side = stack.pop()
            node_id = len(self.nodes)
            if parent >= 0:
                setattr(self.nodes[parent], side, node_id)
            G = float(g[idx].sum())
            H = float(h[idx].sum())
            self.nodes.append(Node(value=self._leaf_weight(G, H), n_samples=idx.size))
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            found = self._best_gain_split(X, g, h, idx, G, H)
            if found is None:
                continue
            feature, threshold = found
            mask = X[idx, feature] <= threshold
            if not mask.any() or mask.all():    # degenerate split: stay a leaf
                continue
            node = self.nodes[node_id]
            node.feature = feature
            node.threshold = threshold
            stack.append((idx[~mask], depth + 1, node_id, "right"))
            stack.append((idx[mask], depth + 1, node_id, "left"))
        return self

    def _leaf_weight(self, G, H) -> float:
        return -G / (H + self.lambda_leaf)

    def _best_gain_split(self, X, g, h, idx, G, H):
        n = idx.size
        if n < 2:
            return None
        lam = self.lambda_leaf
        parent_score = G * G / (H + lam)
        Xs = X[idx]                                    # (n, p)
        order = np.argsort(Xs, axis=0, kind="stable")
        xs = np.take_along_axis(Xs, order, axis=0)
        Gl = np.cumsum(g[idx][order], axis=0)[:-1]
        Hl = np.cumsum(h[idx][order], axis=0)[:-1]
        Gr = G - Gl
        Hr = H - Hl
        gain = 0.5 * (Gl * Gl / (Hl + lam) + Gr * Gr / (Hr + lam) - parent_score) \
            - self.gamma_leaf
        gain[~(xs[:-1] < xs[1:])] = -np.inf
        flat = gain.T.reshape(-1)
        k = int(np.argmax(flat))
        if flat[k] <= 0:
            return None
        j, i = divmod(k, n - 1)
        threshold = (xs[i, j] + xs[i + 1, j]) / 2.0
        if threshold >= xs[i + 1, j]:     # midpoint of adjacent floats can round up
            threshold = xs[i, j]
        return (int(j), float(threshold))

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.feature == LEAF)

    def leaf_weights(self) -> np.ndarray:
        return np.array([n.value for n in self.nodes if n.feature == LEAF])


class BoostRegressor(BaseEstimator, RegressorMixin):
    """Sequential trees fit to residual gradients; prediction accumulates
    base_score + eta * sum of tree outputs (leaf weights stored unscaled)."""

    def __init__(self, rounds: int = 100, eta: float = 0.3, lambda_leaf: float = 1.0,
                 gamma_leaf: float = 0.0, max_depth: Optional[int] = 6):
        self.rounds = rounds
        self.eta = eta
        self.lambda_leaf = lambda_leaf
        self.gamma_leaf = gamma_leaf
        self.max_depth = max_depth

    def _penalty(self, tree: GradientTree) -> float:
        # Omega of the additive function actually applied: leaf outputs eta*w
        w_eff = self.eta * tree.leaf_weights()
        return self.gamma_leaf * tree.n_leaves + 0.5 * self.lambda_leaf * float(w_eff @ w_eff)

    def fit(self, X, y):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.lambda_leaf < 0 or self.gamma_leaf < 0:
            raise ValueError("lambda_leaf and gamma_leaf must be >= 0")
        X, y = check_X_y(X, y, y_numeric=True)

        self.base_score_ = float(y.mean())
        pred = np.full(y.shape[0], self.base_score_)
        loss = 0.5 * float(((pred - y) ** 2).sum())
        omega = 0.0
        self.trees_ = []
        self.objective_history_ = [loss]

        for _ in range(self.rounds):
            g = pred - y
            h = np.ones_like(y)
            tree = GradientTree(max_depth=self.max_depth, lambda_leaf=self.lambda_leaf,
                                gamma_leaf=self.gamma_leaf)
            tree.fit_gradients(X, g, h)
            new_pred = pred + self.eta * tree.predict(X)
            new_loss = 0.5 * float(((new_pred - y) ** 2).sum())
            new_obj = new_loss + omega + self._penalty(tree)
            if not np.isfinite(new_obj) or new_obj >= self.objective_history_[-1] - 1e-12:
                break  # the tree cannot pay for its regularization cost
            self.trees_.append(tree)
            pred = new_pred
            omega += self._penalty(tree)
            self.objective_history_.append(new_obj)

        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        X = check_array(X)
        pred = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_:
            pred = pred + self.eta * tree.predict(X)
        return pred

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds, "eta": self.eta, "lambda_leaf": self.lambda_leaf,
            "gamma_leaf": self.gamma_leaf, "max_depth": self.max_depth,
            "base_score": self.base_score_,
            "objective_history": list(self.objective_history_),
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BoostRegressor":
        model = cls(rounds=payload["rounds"], eta=payload["eta"],
                    lambda_leaf=payload["lambda_leaf"], gamma_leaf=payload["gamma_leaf"],
                    max_depth=payload["max_depth"])
        model.base_score_ = float(payload["base_score"])
        model.objective_history_ = list(payload["objective_history"])
        model.trees_ = []
        for tdict in payload["trees"]:
            tree = GradientTree(max_depth=payload["max_depth"],
                                lambda_leaf=payload["lambda_leaf"],
                                gamma_leaf=payload["gamma_leaf"])
            tree.nodes = RegressionTree.from_dict(tdict).nodes
            model.trees_.append(tree)
        model.n_features_in_ = None
        return model
