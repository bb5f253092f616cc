"""Synthetic voyages with a known fuel law, for ground-truth end-to-end checks.

The generator emits exactly the raw artifacts the ingestion side consumes --
a report CSV with DDM positions and local-time stamps, normalized grid files,
and a manifest holding the generating law -- so a full run exercises parsing,
fusion and modelling against a recoverable truth. Environmental fields are
seeded low-frequency sinusoid mixtures: cheap, deterministic, and smooth
enough that nearest-cell sampling stays close to the pointwise truth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import RouteOutOfBounds
from .grids import EnvGrid, GridAxis, save_grid
from .reports import Compass, GeoPosition, format_ddm

START_DATE = datetime(2021, 11, 16, 12, 0, tzinfo=timezone.utc)

DEFAULT_ROUTE = [
    (2.27, 101.88),   # Malacca strait
    (6.0, 92.0),      # Bay of Bengal
    (5.8, 80.5),      # off Colombo
    (-5.0, 65.0),     # central Indian Ocean
    (-20.0, 57.5),    # Mascarene basin
]

DEFAULT_PORTS = ["SINGAPORE", "COLOMBO", "PORT LOUIS", "DURBAN", "SANTOS"]

# raw report column -> record field, as consumed by the parser
REPORT_SCHEMA = {
    "date": "timestamp",
    "position": "position",
    "average_speed_24h": "sog_avg_24h",
    "average_rpm_24h": "engine_rpm_avg_24h",
    "propeller_slip": "propeller_slip",
    "wind_direction": "wind_dir",
    "wind_force": "wind_force",
    "swell_direction": "swell_dir",
    "swell_force": "swell_force",
    "current_direction": "current_dir",
    "current_speed": "current_speed",
    "ulsfo_me_24h": "fuel_ulsfo_me",
    "ulsfo_boiler_24h": "fuel_ulsfo_boiler",
    "mgo_me_24h": "fuel_mgo_me",
    "mgo_boiler_24h": "fuel_mgo_boiler",
    "mgo_aux_24h": "fuel_mgo_aux",
    "draft_fwd_aft": "draft",
    "next_port": "next_port",
    "remarks": "state_flags",
}

_BEAUFORT_EDGES = [0.5, 1.5, 3.3, 5.5, 8.0, 10.8, 13.9, 17.2, 20.7, 24.5, 28.4, 32.6]

_MONTH_ABBR = ["JAN", "FEB", "MAR", "APR", "MAY", "JUN",
               "JUL", "AUG", "SEP", "OCT", "NOV", "DEC"]


def _stamp_text(t: datetime) -> str:
    return f"{t.day:02d} {_MONTH_ABBR[t.month - 1]} {t.year} 1200LT"

_COMPASS16 = [Compass.N, Compass.NNE, Compass.NE, Compass.ENE, Compass.E, Compass.ESE,
              Compass.SE, Compass.SSE, Compass.S, Compass.SSW, Compass.SW, Compass.WSW,
              Compass.W, Compass.WNW, Compass.NW, Compass.NNW]


@dataclass
class FuelLaw:
    """FC = base + rpm_coef*RPM^3 + sum(env_coefs * field) + trim_coef*trim^2 + noise.

    Defaults put roughly 75-80% of the response variance on the cubic rpm
    term and a material remainder on the two env fields, so an rpm-only
    baseline is good but beatable once the environment is fused in.
    """

    rpm_coef: float = 32.0 / 105.0 ** 3
    base_load: float = 10.0
    env_coefs: dict = field(default_factory=lambda: {"so": 3.5, "tsn": 0.7})
    trim_coef: float = 0.8
    noise_sigma_frac: float = 0.05    # sigma as a fraction of the deterministic FC std
    seed: int = 11

    def __post_init__(self):
        if self.rpm_coef <= 0:
            raise ValueError("rpm_coef must be > 0")
        if self.noise_sigma_frac < 0:
            raise ValueError("noise_sigma_frac must be >= 0")

    def to_dict(self) -> dict:
        return {
            "rpm_coef": self.rpm_coef,
            "base_load": self.base_load,
            "env_coefs": dict(self.env_coefs),
            "trim_coef": self.trim_coef,
            "noise_sigma_frac": self.noise_sigma_frac,
            "seed": self.seed,
        }


class SmoothField:
    """Deterministic smooth scalar field over (lat, lon, day index)."""

    def __init__(self, seed_key, offset: float, amplitude: float, modes: int = 3):
        rng = np.random.default_rng(np.random.SeedSequence(seed_key))
        self.offset = offset
        self.amps = amplitude * rng.uniform(0.4, 1.0, modes) / math.sqrt(modes)
        self.freq_lat = rng.uniform(0.05, 0.25, modes)
        self.freq_lon = rng.uniform(0.03, 0.15, modes)
        # fast enough in time that day-to-day variation dominates leg-to-leg,
        # slow enough that daily averaging of sub-daily grids stays faithful
        self.freq_t = rng.uniform(0.08, 0.35, modes)
        self.phase = rng.uniform(0, 2 * math.pi, modes)

    def __call__(self, lat, lon, t_days):
        lat, lon, t_days = np.broadcast_arrays(np.asarray(lat, float),
                                               np.asarray(lon, float),
                                               np.asarray(t_days, float))
        out = np.full(lat.shape, self.offset, dtype=float)
        for a, fa, fo, ft, ph in zip(self.amps, self.freq_lat, self.freq_lon,
                                     self.freq_t, self.phase):
            out = out + a * np.sin(fa * lat + fo * lon + ft * t_days + ph)
        return out


# field families: (offset, amplitude, unit, description)
OCEAN_FIELDS = {
    "so": (35.0, 1.6, "1e-3", "sea water salinity"),
    "thetao": (18.0, 5.0, "degC", "sea water potential temperature"),
}
ATMO_FIELDS = {
    "tsn": (272.0, 6.0, "K", "temperature of surface snow layer"),
    "u10": (2.0, 6.0, "m/s", "10m eastward wind"),
    "v10": (-1.0, 6.0, "m/s", "10m northward wind"),
}


def _build_fields(seed: int) -> dict:
    fields = {}
    for k, (name, (off, amp, _, _)) in enumerate(list(OCEAN_FIELDS.items())
                                                 + list(ATMO_FIELDS.items())):
        fields[name] = SmoothField([seed, 100 + k], off, amp)
    return fields


def _slerp(a: GeoPosition, b: GeoPosition, frac: float) -> GeoPosition:
    """Spherical linear interpolation between two waypoints."""
    la1, lo1, la2, lo2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    v1 = np.array([math.cos(la1) * math.cos(lo1), math.cos(la1) * math.sin(lo1), math.sin(la1)])
    v2 = np.array([math.cos(la2) * math.cos(lo2), math.cos(la2) * math.sin(lo2), math.sin(la2)])
    dot = float(np.clip(v1 @ v2, -1.0, 1.0))
    omega = math.acos(dot)
    if omega < 1e-12:
        v = v1
    else:
        v = (math.sin((1 - frac) * omega) * v1 + math.sin(frac * omega) * v2) / math.sin(omega)
    lat = math.degrees(math.asin(np.clip(v[2], -1.0, 1.0)))
    lon = math.degrees(math.atan2(v[1], v[0]))
    return GeoPosition(lat=lat, lon=lon)


def _route_positions(route, n_days: int) -> list:
    waypoints = [GeoPosition(lat=la, lon=lo) for la, lo in route]
    if len(waypoints) == 1:
        return [waypoints[0]] * n_days
    legs = len(waypoints) - 1
    if n_days == 1:
        return [waypoints[0]]
    positions = []
    for i in range(n_days):
        s = i / (n_days - 1) * legs
        leg = min(int(s), legs - 1)
        frac = s - leg
        positions.append(_slerp(waypoints[leg], waypoints[leg + 1], frac))
    return positions


def _leg_index(route, n_days: int, i: int) -> int:
    legs = max(len(route) - 1, 1)
    if n_days <= 1:
        return 0
    return min(int(i / (n_days - 1) * legs), legs - 1)


def _beaufort(speed_ms: float) -> int:
    return int(np.searchsorted(_BEAUFORT_EDGES, speed_ms))


def _compass_of(u: float, v: float) -> Compass:
    deg = math.degrees(math.atan2(u, v)) % 360.0
    return _COMPASS16[int(round(deg / 22.5)) % 16]


@dataclass
class SyntheticCorpus:
    raw_rows: list                # list of dict raw-column -> text
    grids: dict                   # name -> EnvGrid ("ocean" daily, "atmo" 3-hourly)
    true_fc: np.ndarray
    law: FuelLaw
    route: list
    n_days: int
    manifest: dict


def generate_voyage(law: FuelLaw, n_days: int, route=None,
                    grid_margin_deg: float = 2.0,
                    ocean_step: float = 0.5, atmo_step: float = 1.0,
                    atmo_hours: int = 3) -> SyntheticCorpus:
    """Noon reports along a great-circle route plus covering environment grids.

    The ocean grid is daily at ``ocean_step`` degrees; the atmosphere grid is
    ``atmo_hours``-hourly at ``atmo_step`` degrees (to be averaged to daily
    noons downstream). True per-day fuel values are returned alongside.
    """
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    route = list(route) if route is not None else list(DEFAULT_ROUTE)
    rng = np.random.default_rng(np.random.SeedSequence([law.seed, 7]))
    fields = _build_fields(law.seed)
    positions = _route_positions(route, n_days)

    lat_min = min(p.lat for p in positions) - grid_margin_deg
    lat_max = max(p.lat for p in positions) + grid_margin_deg
    lon_min = min(p.lon for p in positions) - grid_margin_deg
    lon_max = max(p.lon for p in positions) + grid_margin_deg
    if lat_min < -90 or lat_max > 90 or lon_min < -180 or lon_max >= 180:
        raise RouteOutOfBounds("route (plus grid margin) leaves the supported box")

    days = np.arange(n_days, dtype=float)
    times = [START_DATE + timedelta(days=int(i)) for i in range(n_days)]

    # per-leg operating point (evenly spread, permuted for route realism)
    legs = max(len(route) - 1, 1)
    leg_rpm = rng.permutation(np.linspace(76.0, 102.0, legs)) if legs > 1 \
        else np.array([90.0])
    leg_laden = rng.uniform(0, 1, legs) < 0.5
    rpm = np.clip(np.array([leg_rpm[_leg_index(route, n_days, i)] for i in range(n_days)])
                  + rng.normal(0, 3.0, n_days), 72.0, 105.0)

    lats = np.array([p.lat for p in positions])
    lons = np.array([p.lon for p in positions])
    env_at_ship = {name: f(lats, lons, days) for name, f in fields.items()}

    current_disturb = SmoothField([law.seed, 501], 0.0, 1.2)(lats, lons, days)
    sog = 14.5 * rpm / 105.0 + current_disturb + rng.normal(0, 0.3, n_days)
    sog = np.clip(sog, 4.0, 18.0)

    draft_fwd = np.empty(n_days)
    draft_aft = np.empty(n_days)
    for i in range(n_days):
        leg = _leg_index(route, n_days, i)
        base = 11.6 if leg_laden[leg] else 6.6
        draft_fwd[i] = base + 0.05 * math.sin(0.4 * i)
        draft_aft[i] = draft_fwd[i] + 0.55 + 0.15 * math.sin(0.23 * i + 1.0)
    trim = draft_aft - draft_fwd

    deterministic = (law.base_load + law.rpm_coef * rpm ** 3 + law.trim_coef * trim ** 2)
    for code, coef in law.env_coefs.items():
        if code not in env_at_ship:
            raise ValueError(f"law references unknown env field {code!r}")
        centered = env_at_ship[code] - fields[code].offset
        deterministic = deterministic + coef * centered
    sigma = law.noise_sigma_frac * float(deterministic.std())
    noise = rng.normal(0, 1.0, n_days) * sigma
    true_fc = deterministic + noise

    # weather as a hand-logged observer would record it
    u10 = env_at_ship["u10"]
    v10 = env_at_ship["v10"]
    wind_speed = np.hypot(u10, v10)
    slip_pct = 2.5 + 0.35 * np.array([_beaufort(w) for w in wind_speed]) \
        + rng.normal(0, 0.6, n_days)

    raw_rows = []
    for i in range(n_days):
        total = float(true_fc[i])
        base = min(law.base_load, total)
        rest = max(total - base, 0.0)
        fuels = {
            "ulsfo_me_24h": 0.85 * rest,
            "mgo_me_24h": 0.15 * rest,
            "ulsfo_boiler_24h": 0.4 * base,
            "mgo_boiler_24h": 0.3 * base,
            "mgo_aux_24h": 0.3 * base,
        }
        wind_dir = _compass_of(u10[i], v10[i])
        swell_dir = _compass_of(u10[i] + 2.0, v10[i] - 1.0)
        cur_dir = _compass_of(-v10[i], u10[i])
        leg = _leg_index(route, n_days, i)
        row = {
            "date": _stamp_text(times[i]),
            "position": format_ddm(positions[i]),
            "average_speed_24h": f"{sog[i]:.1f}",
            "average_rpm_24h": f"{rpm[i]:.1f}",
            "propeller_slip": f"{slip_pct[i]:.2f}",
            "wind_direction": wind_dir.name,
            "wind_force": str(_beaufort(wind_speed[i])),
            "swell_direction": swell_dir.name,
            "swell_force": str(max(_beaufort(wind_speed[i]) - 1, 0)),
            "current_direction": cur_dir.name,
            "current_speed": f"{abs(current_disturb[i]):.1f}",
            "draft_fwd_aft": f"{draft_fwd[i]:.2f}/{draft_aft[i]:.2f}",
            "next_port": DEFAULT_PORTS[(leg + 1) % len(DEFAULT_PORTS)],
            "remarks": "At sea",
        }
        for k, v in fuels.items():
            row[k] = f"{v:.3f}"
        raw_rows.append(row)

    grids = {
        "ocean": _make_grid(fields, OCEAN_FIELDS, lat_min, lat_max, lon_min, lon_max,
                            ocean_step, times[0], timedelta(hours=24), n_days),
        "atmo": _make_grid(fields, ATMO_FIELDS, lat_min, lat_max, lon_min, lon_max,
                           atmo_step, times[0] - timedelta(hours=12),
                           timedelta(hours=atmo_hours),
                           n_days * (24 // atmo_hours)),
    }

    manifest = {
        "law": law.to_dict(),
        "n_days": n_days,
        "route": route,
        "start": START_DATE.isoformat(),
        "report_schema": dict(REPORT_SCHEMA),
        "timezone_policy": "utc",
        "true_fc": [round(float(v), 6) for v in true_fc],
    }
    return SyntheticCorpus(raw_rows=raw_rows, grids=grids, true_fc=true_fc, law=law,
                           route=route, n_days=n_days, manifest=manifest)


def _make_grid(fields, family, lat_min, lat_max, lon_min, lon_max, step,
               t0: datetime, t_step: timedelta, t_count: int) -> EnvGrid:
    lat_axis = GridAxis(start=float(lat_min), step=float(step),
                        count=int(math.ceil((lat_max - lat_min) / step)) + 1)
    lon_axis = GridAxis(start=float(lon_min), step=float(step),
                        count=int(math.ceil((lon_max - lon_min) / step)) + 1)
    time_axis = GridAxis(start=t0, step=t_step, count=t_count)

    lat_v = np.array(lat_axis.values())
    lon_v = np.array(lon_axis.values())
    t_days = np.array([(t - START_DATE).total_seconds() / 86400.0
                       for t in time_axis.values()])
    T, La, Lo = len(t_days), len(lat_v), len(lon_v)
    lat_g = lat_v[None, :, None]
    lon_g = lon_v[None, None, :]
    t_g = t_days[:, None, None]

    params = {}
    meta = {}
    for code, (_, _, unit, desc) in family.items():
        params[code] = np.broadcast_to(fields[code](lat_g, lon_g, t_g), (T, La, Lo)).copy()
        meta[code] = (desc, unit)
    return EnvGrid(lat_axis=lat_axis, lon_axis=lon_axis, time_axis=time_axis,
                   params=params, fill_value=-9999.0, meta=meta)


# ---------------------------------------------------------------------------
# defect injection

@dataclass
class DefectSpec:
    """Counts of each §-style defect to plant; all disjoint row sets."""

    state_rows: int = 0
    startup_rows: int = 0
    outlier_rows: int = 0
    missing_cell_rate: float = 0.0
    seed: int = 99

    def __post_init__(self):
        if not (0.0 <= self.missing_cell_rate <= 1.0):
            raise ValueError("missing_cell_rate must be in [0, 1]")
        for name in ("state_rows", "startup_rows", "outlier_rows"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


STATE_TEXTS = ["Loading Operation", "Anchor", "Bunkering Operation",
               "Discharging Operation", "VSL Anchored", "Drifting"]

_FUEL_COLUMNS = ["ulsfo_me_24h", "mgo_me_24h", "ulsfo_boiler_24h",
                 "mgo_boiler_24h", "mgo_aux_24h"]

_MEASUREMENT_COLUMNS = [c for c in REPORT_SCHEMA
                        if c not in ("date", "next_port", "remarks")]

_OPTIONAL_NUMERIC = ["average_speed_24h", "propeller_slip", "current_speed",
                     "wind_force", "swell_force", "draft_fwd_aft"]


@dataclass
class DefectBook:
    state_rows: list
    startup_rows: list
    outlier_rows: list
    missing_cells: list   # (row, column)

    def to_dict(self) -> dict:
        return {
            "state_rows": list(self.state_rows),
            "startup_rows": list(self.startup_rows),
            "outlier_rows": list(self.outlier_rows),
            "missing_cells": [[r, c] for r, c in self.missing_cells],
        }


def inject_defects(raw_rows: list, spec: DefectSpec) -> tuple:
    """Plant state-shift rows, startup transients, response outliers and
    random missing cells into a raw report table; returns (rows, DefectBook).

    State rows mirror the source convention: status text set, measurements
    blanked. Startup rows keep speed high but scale total fuel to ~13.5 t/day
    (above any plausible low fence, below the 15 t/day cutoff). Outlier rows
    scale all fuel cells by 4x, far beyond an iqr-1.5 fence.
    """
    rows = [dict(r) for r in raw_rows]
    n = len(rows)
    total_marked = spec.state_rows + spec.startup_rows + spec.outlier_rows
    if total_marked > n:
        raise ValueError(f"cannot mark {total_marked} rows in a table of {n}")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 3]))
    marked = rng.choice(n, size=total_marked, replace=False)
    state_idx = sorted(int(i) for i in marked[:spec.state_rows])
    startup_idx = sorted(int(i) for i in marked[spec.state_rows:
                                                spec.state_rows + spec.startup_rows])
    outlier_idx = sorted(int(i) for i in marked[spec.state_rows + spec.startup_rows:])

    for k, i in enumerate(state_idx):
        rows[i]["remarks"] = STATE_TEXTS[k % len(STATE_TEXTS)]
        for col in _MEASUREMENT_COLUMNS:
            rows[i][col] = ""

    for i in startup_idx:
        total = sum(float(rows[i][c]) for c in _FUEL_COLUMNS)
        target = 13.5
        factor = target / total if total > 0 else 0.0
        for c in _FUEL_COLUMNS:
            rows[i][c] = f"{float(rows[i][c]) * factor:.3f}"
        # make the transient unmistakable: shaft turning fast, tank barely moving
        rows[i]["average_speed_24h"] = f"{max(float(rows[i]['average_speed_24h']), 12.0):.1f}"
        rows[i]["average_rpm_24h"] = f"{max(float(rows[i]['average_rpm_24h']), 95.0):.1f}"

    for i in outlier_idx:
        for c in _FUEL_COLUMNS:
            rows[i][c] = f"{float(rows[i][c]) * 4.0:.3f}"

    missing_cells = []
    if spec.missing_cell_rate > 0:
        protected = set(state_idx) | set(startup_idx) | set(outlier_idx)
        for i in range(n):
            if i in protected:
                continue
            for col in _OPTIONAL_NUMERIC:
                if rng.uniform() < spec.missing_cell_rate:
                    rows[i][col] = ""
                    missing_cells.append((i, col))

    book = DefectBook(state_rows=state_idx, startup_rows=startup_idx,
                      outlier_rows=outlier_idx, missing_cells=missing_cells)
    return rows, book


# ---------------------------------------------------------------------------
# corpus emission

def write_corpus(corpus: SyntheticCorpus, out_dir, defect_book: DefectBook = None,
                 rows=None) -> dict:
    """Write reports.csv, grid files and manifest.json into out_dir; returns paths."""
    import csv
    import os

    os.makedirs(out_dir, exist_ok=True)
    rows = rows if rows is not None else corpus.raw_rows
    report_path = os.path.join(out_dir, "reports.csv")
    columns = list(REPORT_SCHEMA.keys())
    with open(report_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    paths = {"reports": report_path, "grids": []}
    for name, grid in corpus.grids.items():
        grid_path = os.path.join(out_dir, f"{name}.grid.bin")
        save_grid(grid, grid_path, format="binary")
        paths["grids"].append(grid_path)

    manifest = dict(corpus.manifest)
    if defect_book is not None:
        manifest["defects"] = defect_book.to_dict()
    manifest["files"] = {"reports": "reports.csv",
                         "grids": [os.path.basename(p) for p in paths["grids"]]}
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    paths["manifest"] = manifest_path
    return paths
