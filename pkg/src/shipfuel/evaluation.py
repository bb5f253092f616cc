"""k-fold cross-validation, the four scoring metrics, and exhaustive grid search.

Fold evaluation is deterministic for a fixed seed: fold membership comes from
one shuffled partition, per-fold model seeds are derived from (seed, fold),
and reduction order is fixed, so a parallel runner must reproduce the
sequential result bit for bit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDof, BadK, DegenerateVariance, MissingColumn
from .models import DesignMatrix, ModelSpec

METRIC_COLUMNS = [
    "r2_mean", "r2_std", "adj_r2_mean", "adj_r2_std",
    "rmse_mean", "rmse_std", "mae_mean", "mae_std",
]


# ---------------------------------------------------------------------------
# folds

@dataclass(frozen=True)
class FoldAssignment:
    k: int
    assignment: np.ndarray      # length n, fold index in [0, k)
    seed: int

    @property
    def n(self) -> int:
        return self.assignment.size

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def kfold_split(n: int, k: int, seed: int) -> FoldAssignment:
    """Uniformly shuffled partition into k folds whose sizes differ by <= 1."""
    if k < 2 or k > n:
        raise BadK(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    assignment = np.empty(n, dtype=int)
    start = 0
    for fold, size in enumerate(sizes):
        assignment[perm[start:start + size]] = fold
        start += size
    return FoldAssignment(k=k, assignment=assignment, seed=seed)


# ---------------------------------------------------------------------------
# metrics

def r2(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    _check_pair(y, yhat)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        raise DegenerateVariance("r2 undefined for constant y")
    ss_res = float(((y - yhat) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def adjusted_r2(y, yhat, p: int) -> float:
    n = len(y)
    if n - p - 1 <= 0:
        raise BadDof(f"adjusted r2 needs n - p - 1 > 0, got n={n}, p={p}")
    return 1.0 - (1.0 - r2(y, yhat)) * (n - 1) / (n - p - 1)


def rmse(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    _check_pair(y, yhat)
    return float(np.sqrt(((y - yhat) ** 2).mean()))


def mae(y, yhat) -> float:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    _check_pair(y, yhat)
    return float(np.abs(y - yhat).mean())


def _check_pair(y, yhat):
    if y.shape != yhat.shape or y.ndim != 1 or y.size < 2:
        raise ValueError(f"need equal-length 1-D arrays of size >= 2, "
                         f"got {y.shape} vs {yhat.shape}")


# ---------------------------------------------------------------------------
# cross-validation

@dataclass
class CvRow:
    label: str
    fold_metrics: dict                 # metric name -> list of per-fold values
    stats: dict = field(init=False)    # METRIC_COLUMNS -> float

    def __post_init__(self):
        self.stats = {}
        for name in ("r2", "adj_r2", "rmse", "mae"):
            vals = np.asarray(self.fold_metrics[name], dtype=float)
            self.stats[f"{name}_mean"] = float(vals.mean())
            self.stats[f"{name}_std"] = float(vals.std(ddof=1))


@dataclass
class CvReport:
    rows: list

    def row(self, label: str) -> CvRow:
        for row in self.rows:
            if row.label == label:
                return row
        raise KeyError(label)

    @property
    def labels(self) -> list:
        return [row.label for row in self.rows]

    def to_csv(self) -> str:
        lines = ["model," + ",".join(METRIC_COLUMNS)]
        for row in self.rows:
            lines.append(row.label + "," + ",".join(repr(row.stats[c]) for c in METRIC_COLUMNS))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max([len("model")] + [len(r.label) for r in self.rows]) + 2
        header = "model".ljust(width) + "".join(c.rjust(12) for c in METRIC_COLUMNS)
        lines = [header]
        for row in self.rows:
            cells = "".join(f"{row.stats[c]:12.6f}" for c in METRIC_COLUMNS)
            lines.append(row.label.ljust(width) + cells)
        return "\n".join(lines) + "\n"


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(fold)]).generate_state(1)[0])


def cross_validate(model_spec: ModelSpec, dataset: DesignMatrix,
                   folds: FoldAssignment, label=None, seed: int = 0) -> CvRow:
    """Fit on k-1 folds, score on the held-out fold, aggregate mean and
    sample std (k-1 denominator). Adjusted R2 uses the fold's test n and the
    model's feature count."""
    if folds.n != dataset.n:
        raise ValueError(f"fold assignment covers {folds.n} rows, dataset has {dataset.n}")
    metrics = {"r2": [], "adj_r2": [], "rmse": [], "mae": []}
    p = dataset.p
    for fold in range(folds.k):
        train = folds.train_indices(fold)
        test = folds.test_indices(fold)
        model = model_spec.build(seed=_fold_seed(seed, fold))
        y_test = dataset.y[test]
        try:
            model.fit(dataset.X[train], dataset.y[train])
            yhat = model.predict(dataset.X[test])
            metrics["r2"].append(r2(y_test, yhat))
            metrics["adj_r2"].append(adjusted_r2(y_test, yhat, p))
            metrics["rmse"].append(rmse(y_test, yhat))
            metrics["mae"].append(mae(y_test, yhat))
        except Exception as exc:
            exc.args = (f"fold {fold} ({model_spec.family}): " + ", ".join(
                str(a) for a in exc.args),) if exc.args else (f"fold {fold}",)
            raise
    return CvRow(label=label or model_spec.family, fold_metrics=metrics)


def evaluate_families(specs: list, dataset: DesignMatrix, folds: FoldAssignment,
                      seed: int = 0) -> CvReport:
    return CvReport(rows=[cross_validate(spec, dataset, folds, seed=seed) for spec in specs])


# ---------------------------------------------------------------------------
# grid search

@dataclass
class HyperGrid:
    """Named axes of candidate values; the search set is their product."""

    axes: dict

    def __post_init__(self):
        if not self.axes:
            raise ValueError("grid needs at least one axis")
        for name, values in self.axes.items():
            if len(values) == 0:
                raise ValueError(f"grid axis {name!r} is empty")

    def points(self) -> list:
        names = list(self.axes.keys())
        return [dict(zip(names, combo))
                for combo in itertools.product(*(self.axes[n] for n in names))]


def grid_search(family: str, grid: HyperGrid, dataset: DesignMatrix,
                folds: FoldAssignment, objective: str = "r2", seed: int = 0):
    """Evaluate every grid point by cross-validation; return (best spec, table).

    ``objective`` is maximized for r2 and minimized for rmse; ties keep the
    first point in grid order.
    """
    if objective not in ("r2", "rmse"):
        raise ValueError(f"objective must be r2 or rmse, got {objective!r}")
    column = f"{objective}_mean"
    table = []
    best = None
    for point in grid.points():
        spec = ModelSpec(family=family, params=point)
        row = cross_validate(spec, dataset, folds, seed=seed)
        score = row.stats[column]
        table.append({"params": point, "stats": dict(row.stats)})
        better = (best is None
                  or (objective == "r2" and score > best[1])
                  or (objective == "rmse" and score < best[1]))
        if better:
            best = (spec, score)
    return best[0], table


# ---------------------------------------------------------------------------
# baseline protocol

def baseline_protocol(dataset: DesignMatrix, folds: FoldAssignment, specs: list,
                      predictor: str = "engine_rpm_avg_24h", seed: int = 0) -> CvReport:
    """Score every family on a single-predictor design matrix (engine rpm by
    default; pass the speed-over-ground column to reproduce the rpm-vs-sog
    comparison)."""
    if predictor not in dataset.column_names:
        raise MissingColumn(f"baseline predictor {predictor!r} not in design matrix")
    single = dataset.select([predictor])
    return evaluate_families(specs, single, folds, seed=seed)
