"""Training-matrix container shared by every model family."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class DesignMatrix:
    """Fully numeric n x p feature matrix plus response (metric tons/day).

    Rejects missing or non-finite values outright: gap repair belongs to the
    fusion pipeline, not to the solvers.
    """

    X: np.ndarray
    y: np.ndarray
    column_names: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        n, p = self.X.shape
        if n < 1 or p < 1:
            raise ValueError(f"need n >= 1 and p >= 1, got {self.X.shape}")
        if self.y.shape != (n,):
            raise ValueError(f"y shape {self.y.shape} does not match n={n}")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains missing or non-finite values")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("y contains missing or non-finite values")
        if not self.column_names:
            self.column_names = [f"x{j}" for j in range(p)]
        if len(self.column_names) != p:
            raise ValueError("column_names length does not match p")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def select(self, names) -> "DesignMatrix":
        """Column-subset copy, e.g. the single-predictor baseline matrix."""
        missing = [c for c in names if c not in self.column_names]
        if missing:
            raise KeyError(f"columns not in design matrix: {missing}")
        idx = [self.column_names.index(c) for c in names]
        return DesignMatrix(X=self.X[:, idx].copy(), y=self.y.copy(),
                            column_names=list(names))
