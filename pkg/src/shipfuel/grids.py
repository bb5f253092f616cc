"""Regular lat/lon/time rasters of ocean and atmosphere parameters.

Grids are immutable after load. Missing cells are NaN internally; the file
sentinel (``fill_value``) is translated on read/write. Spatial matching is
nearest-cell-center on each axis independently -- no bilinear interpolation,
which buys nothing at daily/sub-degree granularity against hand-logged reports.

``grid.csv`` layout::

    #axes lat=<start>:<step>:<count> lon=<start>:<step>:<count> time=<iso>:<step-hours>:<count>
    #params so,thetao
    #fill -999.0
    #data
    t_index,lat_index,lon_index,v1,v2,...

The packed-binary variant keeps the same header preamble, then contiguous
little-endian float32 blocks, one per param, each in (time, lat, lon)
row-major order. The interchange files are surface-only: depth-resolved
sources are reduced to their shallowest level by the converter; in-memory
grids may still carry a depth dimension, of which sampling reads level 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional, Sequence, Union

import numpy as np

from .errors import AllMissing, FormatError, NonDivisibleStep, OutOfBounds, ShapeMismatch

Scalar = Union[float, datetime]


def _to_number(x) -> float:
    """Degrees stay as-is; instants become epoch seconds."""
    if isinstance(x, datetime):
        if x.tzinfo is None:
            x = x.replace(tzinfo=timezone.utc)
        return x.timestamp()
    if isinstance(x, timedelta):
        return x.total_seconds()
    return float(x)


@dataclass(frozen=True)
class GridAxis:
    """Regular coordinate axis: values are start + i*step, strictly increasing."""

    start: Scalar
    step: Union[float, timedelta]
    count: int

    def __post_init__(self):
        if _to_number(self.step) <= 0:
            raise FormatError(f"axis step must be > 0, got {self.step}")
        if self.count < 1:
            raise FormatError(f"axis count must be >= 1, got {self.count}")

    def value(self, i: int) -> Scalar:
        if isinstance(self.start, datetime):
            return self.start + i * self.step
        return self.start + i * self.step

    def values(self) -> list:
        return [self.value(i) for i in range(self.count)]

    def nearest(self, x: Scalar, name: str = "axis") -> int:
        """Index of the nearest coordinate; ties break toward the lower index.

        Raises OutOfBounds when x lies beyond the range by more than half a step.
        """
        x0 = _to_number(self.start)
        s = _to_number(self.step)
        q = (_to_number(x) - x0) / s
        tol = 1e-9
        if q < -0.5 - tol or q > self.count - 0.5 + tol:
            raise OutOfBounds(name, x)
        i = math.floor(q)
        if q - i > 0.5:
            i += 1
        return min(max(i, 0), self.count - 1)

    @classmethod
    def from_values(cls, values: Sequence[Scalar], tol: float = 1e-4) -> "GridAxis":
        """Fit a regular axis to explicit coordinates; residuals beyond tol reject."""
        if len(values) == 0:
            raise FormatError("empty coordinate list")
        if len(values) == 1:
            step = 1.0 if not isinstance(values[0], datetime) else timedelta(days=1)
            return cls(start=values[0], step=step, count=1)
        nums = np.array([_to_number(v) for v in values], dtype=float)
        step_num = (nums[-1] - nums[0]) / (len(nums) - 1)
        if step_num <= 0:
            raise FormatError("coordinates must be strictly increasing")
        expected = nums[0] + step_num * np.arange(len(nums))
        worst = float(np.max(np.abs(nums - expected)))
        if worst > tol:
            raise FormatError(f"axis irregular: max deviation {worst:.3g} > tol {tol:.3g}")
        if isinstance(values[0], datetime):
            return cls(start=values[0], step=timedelta(seconds=step_num), count=len(values))
        return cls(start=float(nums[0]), step=float(step_num), count=len(values))


@dataclass(frozen=True)
class EnvSample:
    """Result of one spatiotemporal point query."""

    values: dict                      # param code -> float, or None when the cell is missing
    matched_cell: tuple               # (lat index, lon index, time index)
    distance_deg: float               # planar per-axis degree offset to the cell center


@dataclass
class EnvGrid:
    lat_axis: GridAxis
    lon_axis: GridAxis
    time_axis: GridAxis
    params: dict                      # code -> ndarray (time, lat, lon) or (time, depth, lat, lon)
    fill_value: float = -999.0
    depth_levels: Optional[list] = None
    meta: dict = field(default_factory=dict)   # code -> (description, unit)

    def __post_init__(self):
        if self.depth_levels is not None:
            want = (self.time_axis.count, len(self.depth_levels),
                    self.lat_axis.count, self.lon_axis.count)
        else:
            want = (self.time_axis.count, self.lat_axis.count, self.lon_axis.count)
        for code, arr in self.params.items():
            if arr.shape != want:
                raise ShapeMismatch(f"param {code!r} has shape {arr.shape}, axes imply {want}")
        for code in self.params:
            self.meta.setdefault(code, ("", ""))

    @property
    def param_codes(self) -> list:
        return list(self.params.keys())

    def cell_value(self, code: str, t: int, la: int, lo: int) -> float:
        arr = self.params[code]
        if self.depth_levels is not None:
            return float(arr[t, 0, la, lo])    # shallowest level only
        return float(arr[t, la, lo])

    def subset(self, lat_slice: slice = slice(None), lon_slice: slice = slice(None),
               time_slice: slice = slice(None)) -> "EnvGrid":
        """Index-sliced copy; lets callers choose subset-then-average ordering."""
        def cut(axis: GridAxis, sl: slice) -> GridAxis:
            idx = range(axis.count)[sl]
            if len(idx) == 0:
                raise ShapeMismatch("subset leaves an empty axis")
            if idx.step != 1:
                raise ShapeMismatch("subset stride must be 1")
            return GridAxis(start=axis.value(idx.start), step=axis.step, count=len(idx))

        new_params = {}
        for code, arr in self.params.items():
            if self.depth_levels is not None:
                new_params[code] = arr[time_slice, :, lat_slice, lon_slice].copy()
            else:
                new_params[code] = arr[time_slice, lat_slice, lon_slice].copy()
        return EnvGrid(
            lat_axis=cut(self.lat_axis, lat_slice),
            lon_axis=cut(self.lon_axis, lon_slice),
            time_axis=cut(self.time_axis, time_slice),
            params=new_params,
            fill_value=self.fill_value,
            depth_levels=list(self.depth_levels) if self.depth_levels is not None else None,
            meta=dict(self.meta),
        )


# ---------------------------------------------------------------------------
# queries

def sample_at(grid: EnvGrid, pos, t: datetime) -> EnvSample:
    """Nearest-cell-center match, independently on lat, lon and time."""
    la = grid.lat_axis.nearest(pos.lat, "lat")
    lo = grid.lon_axis.nearest(pos.lon, "lon")
    ti = grid.time_axis.nearest(t, "time")
    values = {}
    for code in grid.params:
        v = grid.cell_value(code, ti, la, lo)
        values[code] = None if math.isnan(v) else v
    dist = max(abs(pos.lat - grid.lat_axis.value(la)),
               abs(pos.lon - grid.lon_axis.value(lo)))
    return EnvSample(values=values, matched_cell=(la, lo, ti), distance_deg=float(dist))


def daily_mean(grid: EnvGrid) -> EnvGrid:
    """Collapse a sub-daily time axis to per-calendar-day means (daily noons).

    Each output cell is the arithmetic mean of that day's non-missing values;
    an all-missing day stays missing. Metadata is preserved.
    """
    step_s = _to_number(grid.time_axis.step)
    if step_s <= 0 or step_s != int(step_s) or 86400 % int(step_s) != 0:
        raise NonDivisibleStep(f"time step {grid.time_axis.step} does not divide 24 h")
    if not isinstance(grid.time_axis.start, datetime):
        raise NonDivisibleStep("daily_mean needs a datetime time axis")

    times = grid.time_axis.values()
    days = [t.astimezone(timezone.utc).date() if t.tzinfo else t.date() for t in times]
    day_list: list = []
    for d in days:
        if not day_list or day_list[-1] != d:
            day_list.append(d)
    groups = [[i for i, d in enumerate(days) if d == day] for day in day_list]

    new_params = {}
    for code, arr in grid.params.items():
        pieces = []
        for idx in groups:
            block = arr[idx]
            good = ~np.isnan(block)
            count = good.sum(axis=0)
            total = np.where(good, block, 0.0).sum(axis=0)
            with np.errstate(invalid="ignore"):
                mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
            pieces.append(mean)
        new_params[code] = np.stack(pieces, axis=0)

    first_noon = datetime(day_list[0].year, day_list[0].month, day_list[0].day,
                          12, 0, tzinfo=timezone.utc)
    new_axis = GridAxis(start=first_noon, step=timedelta(hours=24), count=len(day_list))
    return EnvGrid(
        lat_axis=grid.lat_axis,
        lon_axis=grid.lon_axis,
        time_axis=new_axis,
        params=new_params,
        fill_value=grid.fill_value,
        depth_levels=list(grid.depth_levels) if grid.depth_levels is not None else None,
        meta=dict(grid.meta),
    )


def fill_series(values: Sequence) -> np.ndarray:
    """Repair a time-ordered series: linear interpolation inside, edge-hold outside.

    Leading gaps take the first observed value (backward fill); trailing gaps
    take the last. Raises AllMissing when nothing is observed.
    """
    arr = np.array([np.nan if v is None else float(v) for v in values], dtype=float)
    good = ~np.isnan(arr)
    if not good.any():
        raise AllMissing("series has no non-missing entry")
    idx = np.arange(arr.size, dtype=float)
    return np.interp(idx, idx[good], arr[good])


# ---------------------------------------------------------------------------
# file I/O

def _format_axis(axis: GridAxis, time: bool) -> str:
    if time:
        start = axis.start.astimezone(timezone.utc).replace(tzinfo=None) \
            if axis.start.tzinfo else axis.start
        hours = _to_number(axis.step) / 3600.0
        return f"{start.isoformat()}:{hours:g}:{axis.count}"
    return f"{axis.start:g}:{axis.step:g}:{axis.count}"


def _parse_axis(token: str, time: bool) -> GridAxis:
    try:
        raw, step, count = token.rsplit(":", 2)
        if time:
            start = datetime.fromisoformat(raw).replace(tzinfo=timezone.utc)
            return GridAxis(start=start, step=timedelta(hours=float(step)), count=int(count))
        return GridAxis(start=float(raw), step=float(step), count=int(count))
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad axis spec {token!r}: {exc}") from exc


def _parse_header(lines):
    axes = {}
    params = None
    fill = None
    meta = {}
    for line in lines:
        line = line.strip()
        if line.startswith("#axes"):
            for part in line[len("#axes"):].split():
                name, _, spec = part.partition("=")
                if name not in ("lat", "lon", "time"):
                    raise FormatError(f"unknown axis {name!r}")
                axes[name] = _parse_axis(spec, time=(name == "time"))
        elif line.startswith("#params"):
            params = [p.strip() for p in line[len("#params"):].strip().split(",") if p.strip()]
        elif line.startswith("#fill"):
            fill = float(line[len("#fill"):].strip())
        elif line.startswith("#meta"):
            body = line[len("#meta"):].strip()
            code, _, rest = body.partition("=")
            desc, _, unit = rest.partition("|")
            meta[code.strip()] = (desc.strip(), unit.strip())
    if set(axes) != {"lat", "lon", "time"}:
        raise FormatError("header must declare lat, lon and time axes")
    if not params:
        raise FormatError("header must declare at least one param")
    if fill is None:
        raise FormatError("header must declare a fill sentinel")
    return axes, params, fill, meta


def load_grid(path, format: str = "auto") -> EnvGrid:
    """Read a normalized grid file (CSV rows or packed float32 blocks)."""
    if format == "auto":
        format = "binary" if str(path).endswith(".bin") else "csv"
    if format == "csv":
        return _load_csv(path)
    if format == "binary":
        return _load_binary(path)
    raise FormatError(f"unknown grid format {format!r}")


def _empty_arrays(axes, params):
    shape = (axes["time"].count, axes["lat"].count, axes["lon"].count)
    return {code: np.full(shape, np.nan, dtype=float) for code in params}


def _mask_fill(arr: np.ndarray, fill: float) -> np.ndarray:
    if math.isnan(fill):
        return arr
    arr[arr == fill] = np.nan
    return arr


def _load_csv(path) -> EnvGrid:
    header = []
    data_lines = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                header.append(line)
            elif line.strip():
                data_lines.append(line)
    axes, params, fill, meta = _parse_header(header)
    arrays = _empty_arrays(axes, params)
    width = 3 + len(params)
    for lineno, line in enumerate(data_lines):
        parts = line.strip().split(",")
        if len(parts) != width:
            raise FormatError(f"{path}: data line {lineno} has {len(parts)} fields, expected {width}")
        try:
            t, la, lo = int(parts[0]), int(parts[1]), int(parts[2])
            vals = [float(p) for p in parts[3:]]
        except ValueError as exc:
            raise FormatError(f"{path}: data line {lineno}: {exc}") from exc
        if not (0 <= t < axes["time"].count and 0 <= la < axes["lat"].count
                and 0 <= lo < axes["lon"].count):
            raise FormatError(f"{path}: data line {lineno}: cell index out of range")
        for code, v in zip(params, vals):
            arrays[code][t, la, lo] = v
    for code in params:
        _mask_fill(arrays[code], fill)
    return EnvGrid(lat_axis=axes["lat"], lon_axis=axes["lon"], time_axis=axes["time"],
                   params=arrays, fill_value=fill, meta=meta)


def _load_binary(path) -> EnvGrid:
    header = []
    with open(path, "rb") as fh:
        while True:
            line = fh.readline()
            if not line.startswith(b"#"):
                raise FormatError(f"{path}: missing #data terminator in preamble")
            text = line.decode("utf-8")
            if text.strip() == "#data":
                break
            header.append(text)
        blob = fh.read()
    axes, params, fill, meta = _parse_header(header)
    cells = axes["time"].count * axes["lat"].count * axes["lon"].count
    want = cells * len(params)
    flat = np.frombuffer(blob, dtype="<f4")
    if flat.size != want:
        raise ShapeMismatch(f"{path}: {flat.size} values, axes imply {want}")
    shape = (axes["time"].count, axes["lat"].count, axes["lon"].count)
    arrays = {}
    for k, code in enumerate(params):
        block = flat[k * cells:(k + 1) * cells].astype(float).reshape(shape)
        arrays[code] = _mask_fill(block, fill)
    return EnvGrid(lat_axis=axes["lat"], lon_axis=axes["lon"], time_axis=axes["time"],
                   params=arrays, fill_value=fill, meta=meta)


def _header_lines(grid: EnvGrid) -> list:
    lines = [
        "#axes lat={} lon={} time={}\n".format(
            _format_axis(grid.lat_axis, time=False),
            _format_axis(grid.lon_axis, time=False),
            _format_axis(grid.time_axis, time=True),
        ),
        "#params {}\n".format(",".join(grid.param_codes)),
        "#fill {:g}\n".format(grid.fill_value),
    ]
    for code, (desc, unit) in grid.meta.items():
        if desc or unit:
            lines.append(f"#meta {code}={desc}|{unit}\n")
    return lines


def _surface(grid: EnvGrid, code: str) -> np.ndarray:
    arr = grid.params[code]
    return arr[:, 0] if grid.depth_levels is not None else arr


def save_grid(grid: EnvGrid, path, format: str = "auto") -> None:
    if format == "auto":
        format = "binary" if str(path).endswith(".bin") else "csv"
    if format == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.writelines(_header_lines(grid))
            fh.write("#data\n")
            for t in range(grid.time_axis.count):
                for la in range(grid.lat_axis.count):
                    for lo in range(grid.lon_axis.count):
                        vals = []
                        for code in grid.param_codes:
                            v = _surface(grid, code)[t, la, lo]
                            vals.append(f"{grid.fill_value:g}" if math.isnan(v) else repr(float(v)))
                        fh.write(f"{t},{la},{lo}," + ",".join(vals) + "\n")
    elif format == "binary":
        with open(path, "wb") as fh:
            for line in _header_lines(grid):
                fh.write(line.encode("utf-8"))
            fh.write(b"#data\n")
            for code in grid.param_codes:
                block = _surface(grid, code).astype("<f4").copy()
                if not math.isnan(grid.fill_value):
                    block[np.isnan(block)] = np.float32(grid.fill_value)
                fh.write(block.tobytes())
    else:
        raise FormatError(f"unknown grid format {format!r}")
