"""Bagged ensemble of CART trees with impurity-based feature importance."""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_X_y

from .tree import RegressionTree


class ForestRegressor(BaseEstimator, RegressorMixin):
    """Trees trained on bootstrap resamples; prediction is the tree mean.

    All randomness (resampling, per-split feature subsets) flows from the
    single ``seed`` through spawned per-tree generators, so fits are
    bit-reproducible and trees could be grown in parallel.
    """

    def __init__(self, n_trees: int = 100, max_depth: Optional[int] = None,
                 min_samples_leaf: int = 1, features_per_split=1.0,
                 bootstrap: bool = True, seed: int = 0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.seed = seed

    def fit(self, X, y):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        X, y = check_X_y(X, y, y_numeric=True)
        n, p = X.shape
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees_ = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            if self.bootstrap:
                idx = rng.integers(0, n, size=n)
                Xb, yb = X[idx], y[idx]
            else:
                Xb, yb = X, y
            tree = RegressionTree(max_depth=self.max_depth,
                                  min_samples_leaf=self.min_samples_leaf,
                                  max_features=self.features_per_split)
            tree.fit(Xb, yb, rng=rng)
            self.trees_.append(tree)
        self.n_features_in_ = p
        return self

    def predict(self, X):
        X = check_array(X)
        preds = np.stack([t.predict(X) for t in self.trees_], axis=0)
        return preds.mean(axis=0)

    def feature_importances(self) -> np.ndarray:
        """Mean-decrease-impurity scores, averaged over trees, summing to 1.

        Variance is the impurity (regression); each split contributes its
        node-share-weighted impurity drop to the split feature.
        """
        p = self.n_features_in_
        raw = np.zeros(p)
        for tree in self.trees_:
            raw += tree.importance_raw(p)
        raw /= len(self.trees_)
        total = raw.sum()
        return raw / total if total > 0 else raw

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "features_per_split": self.features_per_split,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "n_features": self.n_features_in_,
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ForestRegressor":
        model = cls(n_trees=payload["n_trees"], max_depth=payload["max_depth"],
                    min_samples_leaf=payload["min_samples_leaf"],
                    features_per_split=payload["features_per_split"],
                    bootstrap=payload["bootstrap"], seed=payload["seed"])
        model.trees_ = [RegressionTree.from_dict(t) for t in payload["trees"]]
        model.n_features_in_ = payload["n_features"]
        return model
