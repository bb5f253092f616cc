"""Deterministic, leak-free transformation steps from parsed reports to the
training matrix.

Steps follow the fit/transform convention: ``fit`` learns statistics (drop
lists, outlier fences, category vocabularies) from training data only, and
``transform`` is a pure function of the fitted state, so fitting on one fold
and transforming another can never read the second fold's statistics. The
first stage operates on record sequences, ``AssembleDataset`` bridges into the
column-oriented ``FusedDataset``, and every later step maps dataset to dataset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
from sklearn.base import BaseEstimator

from .errors import AllMissing, OutOfBounds, ResponseDropped, UnknownCategory
from .grids import fill_series, sample_at
from .models import DesignMatrix
from .reports import Compass

RESPONSE = "total_fuel"

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class _Point:
    lat: float
    lon: float


@dataclass(frozen=True)
class Column:
    name: str
    unit: str = ""
    kind: str = NUMERIC      # numeric | categorical | response


class FusedDataset:
    """Column-oriented table: float arrays (NaN = missing) for numeric columns,
    object arrays (None = missing) for categorical ones."""

    def __init__(self, columns, data, response_column: str = RESPONSE):
        self.columns = list(columns)
        self.data = dict(data)
        self.response_column = response_column
        self._validate()

    def _validate(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        if set(names) != set(self.data):
            raise ValueError("column metadata and data keys differ")
        lengths = {arr.shape[0] for arr in self.data.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: lengths {sorted(lengths)}")
        responses = [c.name for c in self.columns if c.kind == "response"]
        if responses and responses != [self.response_column]:
            raise ValueError(f"expected single response {self.response_column!r}, got {responses}")

    @property
    def n_rows(self) -> int:
        if not self.columns:
            return 0
        return self.data[self.columns[0].name].shape[0]

    @property
    def column_names(self) -> list:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def copy(self) -> "FusedDataset":
        return FusedDataset(columns=list(self.columns),
                            data={k: v.copy() for k, v in self.data.items()},
                            response_column=self.response_column)

    def take_rows(self, mask_or_idx) -> "FusedDataset":
        return FusedDataset(columns=list(self.columns),
                            data={k: v[mask_or_idx] for k, v in self.data.items()},
                            response_column=self.response_column)

    def add_column(self, column: Column, values: np.ndarray) -> None:
        if self.has_column(column.name):
            raise ValueError(f"column {column.name!r} already present")
        if self.columns and values.shape[0] != self.n_rows:
            raise ValueError("new column length mismatch")
        self.columns.append(column)
        self.data[column.name] = values

    def drop_columns(self, names) -> "FusedDataset":
        names = set(names)
        return FusedDataset(columns=[c for c in self.columns if c.name not in names],
                            data={k: v for k, v in self.data.items() if k not in names},
                            response_column=self.response_column)

    def missing_mask(self, name: str) -> np.ndarray:
        arr = self.data[name]
        if arr.dtype == object:
            return np.array([v is None for v in arr], dtype=bool)
        return np.isnan(arr)

    def response(self) -> np.ndarray:
        return self.data[self.response_column]


# ---------------------------------------------------------------------------
# record-level stage

def drop_state_shift_rows(records):
    """Remove every record carrying a loading/anchor/bunkering/discharging/
    anchored/drifting flag; those rows report no usable measurements."""
    return [r for r in records if not r.state_flags]


_BASE_NUMERIC = [
    ("lat", "deg"), ("lon", "deg"), ("timestamp_epoch", "s"),
    ("sog_avg_24h", "kn"), ("engine_rpm_avg_24h", "rpm"),
    ("propeller_slip", "fraction"), ("wind_force", "beaufort"),
    ("swell_force", "beaufort"), ("current_speed", "kn"),
    ("fuel_ulsfo_me", "mt"), ("fuel_ulsfo_boiler", "mt"), ("fuel_mgo_me", "mt"),
    ("fuel_mgo_boiler", "mt"), ("fuel_mgo_aux", "mt"),
    ("draft_fwd", "m"), ("draft_aft", "m"),
]

_BASE_CATEGORICAL = [
    ("wind_dir", "compass"), ("swell_dir", "compass"), ("current_dir", "compass"),
    ("next_port", ""),
]


def assemble_dataset(records) -> FusedDataset:
    """Turn parsed records into the base feature table (one slot per column)."""
    n = len(records)
    columns = []
    data = {}

    def num(name, values, unit):
        columns.append(Column(name=name, unit=unit, kind=NUMERIC))
        data[name] = np.array([np.nan if v is None else float(v) for v in values], dtype=float)

    def cat(name, values, unit):
        columns.append(Column(name=name, unit=unit, kind=CATEGORICAL))
        arr = np.empty(n, dtype=object)
        arr[:] = values
        data[name] = arr

    for name, unit in _BASE_NUMERIC:
        if name == "lat":
            num(name, [r.position.lat if r.position else None for r in records], unit)
        elif name == "lon":
            num(name, [r.position.lon if r.position else None for r in records], unit)
        elif name == "timestamp_epoch":
            num(name, [r.timestamp_utc.timestamp() for r in records], unit)
        else:
            num(name, [getattr(r, name) for r in records], unit)
    for name, unit in _BASE_CATEGORICAL:
        if unit == "compass":
            cat(name, [getattr(r, name).name if getattr(r, name) else None for r in records], unit)
        else:
            cat(name, [getattr(r, name) for r in records], unit)
    return FusedDataset(columns=columns, data=data)


# ---------------------------------------------------------------------------
# derivations

_NORTH_SEASON = {12: "winter", 1: "winter", 2: "winter",
                 3: "spring", 4: "spring", 5: "spring",
                 6: "summer", 7: "summer", 8: "summer",
                 9: "autumn", 10: "autumn", 11: "autumn"}
_FLIP = {"winter": "summer", "summer": "winter", "spring": "autumn", "autumn": "spring"}


def derive_features(dataset: FusedDataset) -> FusedDataset:
    """Add trim, fuel roll-ups (response), calendar fields, hemisphere-aware
    season, and change-point voyage segments. Missing inputs propagate."""
    ds = dataset.copy()
    n = ds.n_rows

    ds.add_column(Column("trim", "m"), ds.data["draft_aft"] - ds.data["draft_fwd"])
    fuel_me = ds.data["fuel_ulsfo_me"] + ds.data["fuel_mgo_me"]
    ds.add_column(Column("fuel_me", "mt"), fuel_me)
    total = fuel_me + ds.data["fuel_ulsfo_boiler"] + ds.data["fuel_mgo_boiler"] \
        + ds.data["fuel_mgo_aux"]
    ds.add_column(Column(RESPONSE, "mt", kind="response"), total)

    stamps = [datetime.fromtimestamp(e, tz=timezone.utc) for e in ds.data["timestamp_epoch"]]
    ds.add_column(Column("year", ""), np.array([t.year for t in stamps], dtype=float))
    ds.add_column(Column("month", ""), np.array([t.month for t in stamps], dtype=float))
    ds.add_column(Column("day", ""), np.array([t.day for t in stamps], dtype=float))

    season = np.empty(n, dtype=object)
    for i, t in enumerate(stamps):
        lat = ds.data["lat"][i]
        if math.isnan(lat):
            season[i] = None
            continue
        s = _NORTH_SEASON[t.month]
        season[i] = _FLIP[s] if lat < 0 else s
    ds.add_column(Column("season", "", kind=CATEGORICAL), season)

    segment = np.empty(n, dtype=object)
    seg = 0
    prev_port = None
    for i in range(n):
        port = ds.data["next_port"][i]
        if port is not None and prev_port is not None and port != prev_port:
            seg += 1
        if port is not None:
            prev_port = port
        segment[i] = f"s{seg:02d}"
    ds.add_column(Column("voyage_segment", "", kind=CATEGORICAL), segment)
    return ds


def fuse_environment(dataset: FusedDataset, grids) -> tuple:
    """Append one column per grid param via nearest-cell sampling, then repair
    in-coverage gaps (masked cells) along the voyage with fill_series.

    Rows outside a grid's bounds stay missing for that grid's columns (they
    are a coverage problem, not a cell gap) and are left to pruning. Returns
    (dataset, coverage) where coverage maps column -> counts.
    """
    ds = dataset.copy()
    n = ds.n_rows
    stamps = [datetime.fromtimestamp(e, tz=timezone.utc) for e in ds.data["timestamp_epoch"]]
    order = np.argsort(ds.data["timestamp_epoch"], kind="stable")
    coverage = {}

    for gi, grid in enumerate(grids):
        raw = {code: np.full(n, np.nan) for code in grid.param_codes}
        in_bounds = np.zeros(n, dtype=bool)
        for i in range(n):
            lat, lon = ds.data["lat"][i], ds.data["lon"][i]
            if math.isnan(lat) or math.isnan(lon):
                continue
            try:
                sample = sample_at(grid, _Point(lat=lat, lon=lon), stamps[i])
            except OutOfBounds:
                continue
            in_bounds[i] = True
            for code, value in sample.values.items():
                if value is not None:
                    raw[code][i] = value

        for code in grid.param_codes:
            name = code if not ds.has_column(code) else f"{code}_g{gi}"
            values = raw[code]
            gaps = int(np.sum(in_bounds & np.isnan(values)))
            out_rows = int(np.sum(~in_bounds))
            cov_idx = order[in_bounds[order]]
            if cov_idx.size:
                try:
                    values[cov_idx] = fill_series(values[cov_idx])
                except AllMissing:
                    pass
            still_missing = int(np.sum(in_bounds & np.isnan(values)))
            coverage[name] = {
                "missing_before_repair": gaps + out_rows,
                "repaired": gaps - still_missing,
                "out_of_coverage_rows": out_rows,
            }
            unit = grid.meta.get(code, ("", ""))[1]
            ds.add_column(Column(name, unit), values)
    return ds, coverage


# ---------------------------------------------------------------------------
# dataset steps (sklearn-style fit/transform)

class DropStateShiftRows(BaseEstimator):
    """Record-level step wrapper so the full chain is configurable by name."""

    def fit(self, records, y=None):
        return self

    def transform(self, records):
        return drop_state_shift_rows(records)


class AssembleDataset(BaseEstimator):
    def fit(self, records, y=None):
        return self

    def transform(self, records):
        return assemble_dataset(records)


class DeriveFeatures(BaseEstimator):
    def fit(self, dataset, y=None):
        return self

    def transform(self, dataset):
        return derive_features(dataset)


class FuseEnvironment(BaseEstimator):
    def __init__(self, grids=()):
        self.grids = grids

    def fit(self, dataset, y=None):
        return self

    def transform(self, dataset):
        fused, coverage = fuse_environment(dataset, self.grids)
        self.coverage_ = coverage
        return fused


class PruneColumns(BaseEstimator):
    """Drop >threshold-missing, zero-variance, and explicitly redundant columns.

    The drop list is learned at fit time and replayed verbatim at transform,
    so test folds never contribute statistics.
    """

    def __init__(self, missing_threshold: float = 0.05, redundant=()):
        self.missing_threshold = missing_threshold
        self.redundant = tuple(redundant)

    def fit(self, dataset: FusedDataset, y=None):
        drop = []
        n = dataset.n_rows
        for col in dataset.columns:
            name = col.name
            reason = None
            missing = dataset.missing_mask(name)
            frac = missing.sum() / n if n else 0.0
            if name in self.redundant:
                reason = "redundant"
            elif frac > self.missing_threshold:
                reason = f"missing {frac:.1%}"
            elif col.kind == NUMERIC:
                values = dataset.data[name][~missing]
                if values.size == 0 or np.all(values == values[0]):
                    reason = "zero variance"
            elif col.kind == CATEGORICAL:
                values = [v for v in dataset.data[name] if v is not None]
                if len(set(values)) <= 1 and not missing.any():
                    reason = "zero variance"
            if reason is not None:
                if name == dataset.response_column:
                    raise ResponseDropped(f"pruning would remove the response ({reason})")
                drop.append(name)
        self.columns_to_drop_ = drop
        return self

    def transform(self, dataset: FusedDataset) -> FusedDataset:
        present = [c for c in self.columns_to_drop_ if dataset.has_column(c)]
        return dataset.drop_columns(present)


class RemoveResponseOutliers(BaseEstimator):
    """Remove rows whose response falls outside learned fences.

    ``iqr``: [Q1 - k*IQR, Q3 + k*IQR]; ``zscore``: |y - mean| <= k*std.
    Rows with a missing response are also removed (nothing supervised can use
    them) and counted separately.
    """

    def __init__(self, method: str = "iqr", k: float = 1.5):
        self.method = method
        self.k = k

    def fit(self, dataset: FusedDataset, y=None):
        values = dataset.response()
        values = values[~np.isnan(values)]
        if values.size == 0:
            raise ResponseDropped("response column has no observed values")
        if self.method == "iqr":
            q1, q3 = np.quantile(values, [0.25, 0.75])
            iqr = q3 - q1
            self.low_, self.high_ = q1 - self.k * iqr, q3 + self.k * iqr
        elif self.method == "zscore":
            mean, std = values.mean(), values.std()
            self.low_ = mean - self.k * std
            self.high_ = mean + self.k * std
        else:
            raise ValueError(f"unknown outlier method {self.method!r}")
        return self

    def transform(self, dataset: FusedDataset) -> FusedDataset:
        y = dataset.response()
        present = ~np.isnan(y)
        keep = present & (y >= self.low_) & (y <= self.high_)
        self.last_removed_ = int(dataset.n_rows - keep.sum())
        self.last_removed_missing_ = int((~present).sum())
        return dataset.take_rows(keep)


class FilterStartupAcceleration(BaseEstimator):
    """Drop startup transients: speed at or above min_speed while consumption
    is anomalously low (strictly below min_fuel)."""

    def __init__(self, min_fuel: float = 15.0, min_speed: float = 8.0,
                 speed_column: str = "sog_avg_24h"):
        self.min_fuel = min_fuel
        self.min_speed = min_speed
        self.speed_column = speed_column

    def fit(self, dataset, y=None):
        return self

    def transform(self, dataset: FusedDataset) -> FusedDataset:
        sog = dataset.data[self.speed_column]
        fuel = dataset.response()
        with np.errstate(invalid="ignore"):
            drop = (sog >= self.min_speed) & (fuel < self.min_fuel)
        drop &= ~np.isnan(sog) & ~np.isnan(fuel)
        self.last_removed_ = int(drop.sum())
        return dataset.take_rows(~drop)


class EncodeCategoricals(BaseEstimator):
    """Compass columns become sine/cosine of the 16-wind angle; every other
    categorical becomes one-hot over the fit-time vocabulary (sorted, so the
    generated column order is deterministic)."""

    def fit(self, dataset: FusedDataset, y=None):
        self.vocab_ = {}
        self.compass_ = []
        for col in dataset.columns:
            if col.kind != CATEGORICAL:
                continue
            if col.unit == "compass":
                self.compass_.append(col.name)
            else:
                seen = {v for v in dataset.data[col.name] if v is not None}
                self.vocab_[col.name] = sorted(seen)
        return self

    def transform(self, dataset: FusedDataset) -> FusedDataset:
        ds = dataset
        for name in self.compass_:
            if not ds.has_column(name):
                continue
            tokens = ds.data[name]
            sin = np.full(ds.n_rows, np.nan)
            cos = np.full(ds.n_rows, np.nan)
            for i, tok in enumerate(tokens):
                if tok is None:
                    continue
                try:
                    sin[i], cos[i] = Compass[tok].sin_cos()
                except KeyError as exc:
                    raise UnknownCategory(f"{name}: {tok!r}") from exc
            ds = ds.drop_columns([name])
            ds.add_column(Column(f"{name}_sin", ""), sin)
            ds.add_column(Column(f"{name}_cos", ""), cos)
        for name, vocab in self.vocab_.items():
            if not ds.has_column(name):
                continue
            tokens = ds.data[name]
            unseen = {t for t in tokens if t is not None and t not in vocab}
            if unseen:
                raise UnknownCategory(f"{name}: {sorted(unseen)} not in fitted vocabulary")
            columns = {v: np.zeros(ds.n_rows) for v in vocab}
            for i, tok in enumerate(tokens):
                if tok is not None:
                    columns[tok][i] = 1.0
            ds = ds.drop_columns([name])
            for v in vocab:
                ds.add_column(Column(f"{name}={v}", ""), columns[v])
        return ds


class RepairGaps(BaseEstimator):
    """Interpolate remaining numeric feature gaps along voyage time order
    (linear inside, edge-hold at the ends). The response is never repaired."""

    def fit(self, dataset, y=None):
        return self

    def transform(self, dataset: FusedDataset) -> FusedDataset:
        ds = dataset.copy()
        if ds.has_column("timestamp_epoch"):
            order = np.argsort(ds.data["timestamp_epoch"], kind="stable")
        else:
            order = np.arange(ds.n_rows)
        for col in ds.columns:
            if col.kind != NUMERIC or col.name == ds.response_column:
                continue
            arr = ds.data[col.name]
            nan = np.isnan(arr)
            if not nan.any() or nan.all():
                continue
            arr[order] = fill_series(arr[order])
        return ds


# ---------------------------------------------------------------------------
# orchestration

STEP_REGISTRY = {
    "drop_state_shift_rows": DropStateShiftRows,
    "assemble": AssembleDataset,
    "derive_features": DeriveFeatures,
    "fuse_environment": FuseEnvironment,
    "prune_columns": PruneColumns,
    "remove_response_outliers": RemoveResponseOutliers,
    "filter_startup_acceleration": FilterStartupAcceleration,
    "encode_categoricals": EncodeCategoricals,
    "repair_gaps": RepairGaps,
}

DEFAULT_STEP_ORDER = [
    "drop_state_shift_rows",
    "assemble",
    "derive_features",
    "fuse_environment",
    "prune_columns",
    "remove_response_outliers",
    "filter_startup_acceleration",
    "encode_categoricals",
    "repair_gaps",
]


class Pipeline:
    """Ordered steps with a fit_transform pass that records a coverage report."""

    def __init__(self, steps):
        self.steps = list(steps)

    def fit_transform(self, data):
        self.report_ = {"steps": [], "columns": {}}
        for name, step in self.steps:
            rows_in = _count_rows(data)
            data = step.fit(data).transform(data)
            entry = {"step": name, "rows_in": rows_in, "rows_out": _count_rows(data)}
            if hasattr(step, "last_removed_"):
                entry["rows_removed"] = step.last_removed_
            if hasattr(step, "columns_to_drop_"):
                entry["columns_dropped"] = list(step.columns_to_drop_)
            if hasattr(step, "coverage_"):
                self.report_["columns"].update(step.coverage_)
            self.report_["steps"].append(entry)
        return data

    def transform(self, data):
        for _, step in self.steps:
            data = step.transform(data)
        return data


def _count_rows(data) -> int:
    if isinstance(data, FusedDataset):
        return data.n_rows
    return len(data)


def build_pipeline(grids=(), step_names=None, missing_threshold: float = 0.05,
                   redundant=(), outlier_method: str = "iqr", outlier_k: float = 1.5,
                   min_fuel: float = 15.0, min_speed: float = 8.0) -> Pipeline:
    names = list(step_names) if step_names else list(DEFAULT_STEP_ORDER)
    steps = []
    for name in names:
        if name not in STEP_REGISTRY:
            raise ValueError(f"unknown pipeline step {name!r}")
        if name == "fuse_environment":
            step = FuseEnvironment(grids=grids)
        elif name == "prune_columns":
            step = PruneColumns(missing_threshold=missing_threshold, redundant=redundant)
        elif name == "remove_response_outliers":
            step = RemoveResponseOutliers(method=outlier_method, k=outlier_k)
        elif name == "filter_startup_acceleration":
            step = FilterStartupAcceleration(min_fuel=min_fuel, min_speed=min_speed)
        else:
            step = STEP_REGISTRY[name]()
        steps.append((name, step))
    return Pipeline(steps)


# spec'd single-shot forms of the stateful steps
def prune_columns(dataset, missing_threshold: float = 0.05, redundant=()):
    step = PruneColumns(missing_threshold=missing_threshold, redundant=redundant)
    return step.fit(dataset).transform(dataset)


def remove_response_outliers(dataset, method: str = "iqr", k: float = 1.5):
    step = RemoveResponseOutliers(method=method, k=k)
    return step.fit(dataset).transform(dataset)


def filter_startup_acceleration(dataset, min_fuel: float = 15.0, min_speed: float = 8.0):
    step = FilterStartupAcceleration(min_fuel=min_fuel, min_speed=min_speed)
    return step.fit(dataset).transform(dataset)


def encode_categoricals(dataset):
    step = EncodeCategoricals()
    return step.fit(dataset).transform(dataset)


# ---------------------------------------------------------------------------
# matrix boundary and file formats

def to_design_matrix(dataset: FusedDataset) -> DesignMatrix:
    feature_names = [c.name for c in dataset.columns if c.kind == NUMERIC]
    categorical = [c.name for c in dataset.columns if c.kind == CATEGORICAL]
    if categorical:
        raise ValueError(f"categorical columns not encoded: {categorical}")
    X = np.column_stack([dataset.data[name] for name in feature_names])
    y = dataset.response()
    return DesignMatrix(X=X, y=y, column_names=feature_names)


def write_fused_csv(dataset: FusedDataset, path) -> None:
    """Header carries the column metadata: units line, kinds line, names line."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("#units," + ",".join(c.unit for c in dataset.columns) + "\n")
        fh.write("#kinds," + ",".join(c.kind for c in dataset.columns) + "\n")
        fh.write(",".join(c.name for c in dataset.columns) + "\n")
        for i in range(dataset.n_rows):
            cells = []
            for col in dataset.columns:
                v = dataset.data[col.name][i]
                if col.kind == CATEGORICAL:
                    cells.append("" if v is None else str(v))
                else:
                    cells.append("" if math.isnan(v) else repr(float(v)))
            fh.write(",".join(cells) + "\n")


def read_fused_csv(path) -> FusedDataset:
    with open(path, "r", encoding="utf-8") as fh:
        units_line = fh.readline().rstrip("\n")
        kinds_line = fh.readline().rstrip("\n")
        names_line = fh.readline().rstrip("\n")
        if not units_line.startswith("#units,") or not kinds_line.startswith("#kinds,"):
            raise ValueError(f"{path}: missing fused-csv metadata header")
        units = units_line.split(",")[1:]
        kinds = kinds_line.split(",")[1:]
        names = names_line.split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    columns = [Column(name=n, unit=u, kind=k) for n, u, k in zip(names, units, kinds)]
    data = {}
    for j, col in enumerate(columns):
        raw = [r[j] for r in rows]
        if col.kind == CATEGORICAL:
            arr = np.empty(len(raw), dtype=object)
            arr[:] = [v if v != "" else None for v in raw]
        else:
            arr = np.array([float(v) if v != "" else np.nan for v in raw], dtype=float)
        data[col.name] = arr
    return FusedDataset(columns=columns, data=data)
