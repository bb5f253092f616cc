"""CART regression tree: greedy variance-reduction splits, flat node storage."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

LEAF = -1


@dataclass
class Node:
    feature: int = LEAF            # LEAF marks a terminal node
    threshold: float = 0.0
    left: int = -1                 # node indices; -1 for leaves
    right: int = -1
    value: float = 0.0             # leaf prediction (mean y)
    n_samples: int = 0
    impurity: float = 0.0          # variance of y within the node


def best_split(X, y, feature_indices, min_samples_leaf=1):
    """Best (feature, threshold, gain) over candidate features, or None.

    Gain is the total SSE reduction; thresholds are midpoints between
    consecutive distinct values. All candidate features are scanned in one
    vectorized prefix-sum pass; ties keep the earliest feature, then the
    lowest boundary.
    """
    n = y.shape[0]
    if n < 2:
        return None
    feature_indices = np.asarray(feature_indices, dtype=int)
    Xs = X[:, feature_indices]                         # (n, m)
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    ys = y[order]                                      # (n, m)
    s1 = np.cumsum(ys, axis=0)
    s2 = np.cumsum(ys * ys, axis=0)
    total_s1 = float(y.sum())
    total_s2 = float((y * y).sum())
    sse_total = total_s2 - total_s1 * total_s1 / n

    # candidate boundary after row i: left = [0..i], right = [i+1..]
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    sse_left = s2[:-1] - s1[:-1] ** 2 / n_left
    sse_right = (total_s2 - s2[:-1]) - (total_s1 - s1[:-1]) ** 2 / n_right
    gain = sse_total - sse_left - sse_right            # (n-1, m)
    valid = xs[:-1] < xs[1:]
    if min_samples_leaf > 1:
        valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    gain[~valid] = -np.inf

    flat = gain.T.reshape(-1)                          # feature-major for ties
    k = int(np.argmax(flat))
    if flat[k] <= 0:
        return None
    sel, i = divmod(k, n - 1)
    threshold = (xs[i, sel] + xs[i + 1, sel]) / 2.0
    if threshold >= xs[i + 1, sel]:       # midpoint of adjacent floats can round up
        threshold = xs[i, sel]
    return (int(feature_indices[sel]), float(threshold), float(flat[k]))


class RegressionTree:
    """Single CART tree. ``max_features`` (int count or float fraction) draws a
    fresh random feature subset at every split when an ``rng`` is supplied."""

    def __init__(self, max_depth: Optional[int] = None, min_samples_leaf: int = 1,
                 max_features=None):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.nodes: list[Node] = []

    def _n_candidates(self, p: int) -> int:
        mf = self.max_features
        if mf is None:
            return p
        if isinstance(mf, float):
            return max(1, min(p, int(round(mf * p))))
        return max(1, min(p, int(mf)))

    def fit(self, X, y, rng: Optional[np.random.Generator] = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        m = self._n_candidates(p)
        self.nodes = []
        # explicit stack (LIFO, right pushed first) keeps preorder numbering
        # without recursion-depth limits on degenerate chains
        stack = [(np.arange(n), 0, -1, "left")]
        while stack:
            idx, depth, parent, side = stack.pop()
            node_id = len(self.nodes)
            if parent >= 0:
                setattr(self.nodes[parent], side, node_id)
            sub_y = y[idx]
            var = float(sub_y.var())
            self.nodes.append(Node(value=float(sub_y.mean()), n_samples=idx.size,
                                   impurity=var))
            if var <= 0 or idx.size < 2 * self.min_samples_leaf:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if rng is not None and m < p:
                feats = rng.choice(p, size=m, replace=False)
            elif rng is not None:
                feats = rng.permutation(p)
            else:
                feats = np.arange(p)
            found = best_split(X[idx], sub_y, feats, self.min_samples_leaf)
            if found is None:
                continue
            feature, threshold, _ = found
            mask = X[idx, feature] <= threshold
            if not mask.any() or mask.all():    # degenerate split: stay a leaf
                continue
            node = self.nodes[node_id]
            node.feature = feature
            node.threshold = threshold
            stack.append((idx[~mask], depth + 1, node_id, "right"))
            stack.append((idx[mask], depth + 1, node_id, "left"))
        return self

    def predict_one(self, x) -> float:
        node = self.nodes[0]
        while node.feature != LEAF:
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return node.value

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.array([self.predict_one(row) for row in X])

    def importance_raw(self, p: int) -> np.ndarray:
        """Per-feature sum of sample-weighted impurity decreases (unnormalized)."""
        out = np.zeros(p)
        if not self.nodes:
            return out
        n_root = self.nodes[0].n_samples
        for node in self.nodes:
            if node.feature == LEAF:
                continue
            left = self.nodes[node.left]
            right = self.nodes[node.right]
            child = (left.n_samples * left.impurity + right.n_samples * right.impurity) / node.n_samples
            out[node.feature] += (node.n_samples / n_root) * (node.impurity - child)
        return out

    def to_dict(self) -> dict:
        return {"nodes": [[n.feature, n.threshold, n.left, n.right, n.value,
                           n.n_samples, n.impurity] for n in self.nodes]}

    @classmethod
    def from_dict(cls, payload: dict) -> "RegressionTree":
        tree = cls()
        tree.nodes = [Node(feature=int(f), threshold=float(t), left=int(l), right=int(r),
                           value=float(v), n_samples=int(ns), impurity=float(im))
                      for f, t, l, r, v, ns, im in payload["nodes"]]
        return tree
