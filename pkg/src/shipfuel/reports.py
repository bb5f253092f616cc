"""Noon-report parsing: raw voyage-report tables to typed, unit-normalized records.

Raw reports arrive as spreadsheet-exported CSV with positions in
degrees-decimal-minutes ("02-16.0N\\n101-52.5E"), local-time stamps
("16 NOV 2021 1200LT"), draft ratios ("7.20/7.80") and compass categories.
Everything here is a pure function over immutable inputs.
"""
from __future__ import annotations

import csv
import enum
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Mapping, Optional, Sequence
from zoneinfo import ZoneInfo

from .errors import (
    AmbiguousTimezone,
    MalformedDate,
    MalformedPosition,
    MissingColumn,
    OutOfRange,
    RowParseError,
)


class CellStatus(enum.Enum):
    """Tri-state cell bookkeeping: present, empty, or present-but-unparseable."""

    PRESENT = "present"
    MISSING = "missing"
    REJECTED = "rejected"


class Compass(enum.Enum):
    """Closed 16-wind rose plus Variable/Calm. Unknown tokens reject the row."""

    N = 0.0
    NNE = 22.5
    NE = 45.0
    ENE = 67.5
    E = 90.0
    ESE = 112.5
    SE = 135.0
    SSE = 157.5
    S = 180.0
    SSW = 202.5
    SW = 225.0
    WSW = 247.5
    W = 270.0
    WNW = 292.5
    NW = 315.0
    NNW = 337.5
    VARIABLE = float("nan")
    CALM = float("nan")

    @property
    def degrees(self) -> float:
        return self.value

    def sin_cos(self) -> tuple[float, float]:
        """Unit-circle encoding of the wind angle; Variable/Calm map to (0, 0)."""
        if math.isnan(self.value):
            return (0.0, 0.0)
        rad = math.radians(self.value)
        return (math.sin(rad), math.cos(rad))


class StateFlag(enum.Enum):
    LOADING = "Loading"
    ANCHOR = "Anchor"
    BUNKERING = "Bunkering"
    DISCHARGING = "Discharging"
    ANCHORED = "Anchored"
    DRIFTING = "Drifting"


@dataclass(frozen=True)
class RawReportRow:
    """One exported table row, text kept verbatim (embedded line breaks included)."""

    cells: Mapping[str, str]


@dataclass(frozen=True)
class GeoPosition:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise OutOfRange(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon < 180.0):
            raise OutOfRange(f"longitude {self.lon} outside [-180, 180)")


@dataclass(frozen=True)
class VoyageRecord:
    """One parsed noon report. Unparseable optional cells are explicit missing
    markers (see ``cell_status``), never silent zeros."""

    timestamp_utc: datetime
    position: Optional[GeoPosition]
    sog_avg_24h: Optional[float] = None          # knots
    engine_rpm_avg_24h: Optional[float] = None   # rpm
    propeller_slip: Optional[float] = None       # fraction, not percent
    wind_dir: Optional[Compass] = None
    wind_force: Optional[int] = None             # Beaufort 0..12
    swell_dir: Optional[Compass] = None
    swell_force: Optional[int] = None
    current_dir: Optional[Compass] = None
    current_speed: Optional[float] = None        # knots
    fuel_ulsfo_me: Optional[float] = None        # metric tons / 24h
    fuel_ulsfo_boiler: Optional[float] = None
    fuel_mgo_me: Optional[float] = None
    fuel_mgo_boiler: Optional[float] = None
    fuel_mgo_aux: Optional[float] = None
    draft_fwd: Optional[float] = None            # meters
    draft_aft: Optional[float] = None
    next_port: Optional[str] = None
    state_flags: frozenset[StateFlag] = frozenset()
    cell_status: Mapping[str, CellStatus] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# position parsing

_DDM_RE = re.compile(
    r"^\s*(\d{1,3})-(\d{1,2}(?:\.\d+)?)\s*([NSns])"
    r"[\s,;/]*"
    r"(\d{1,3})-(\d{1,2}(?:\.\d+)?)\s*([EWew])\s*$"
)


def parse_ddm_position(text: str) -> GeoPosition:
    """Convert a degrees-decimal-minutes pair to decimal degrees.

    Accepts ``DD-MM.M[NS]`` + separator + ``DDD-MM.M[EW]``; the separator may
    be a real line break or a literalized ``\\n``. South/West are negative and
    longitude is wrapped into [-180, 180).
    """
    if not isinstance(text, str):
        raise MalformedPosition(f"expected string, got {type(text).__name__}")
    cleaned = text.replace("\\n", " ")
    m = _DDM_RE.match(cleaned)
    if m is None:
        raise MalformedPosition(f"not a DDM position: {text!r}")
    lat_deg, lat_min, lat_hem, lon_deg, lon_min, lon_hem = m.groups()
    lat_min = float(lat_min)
    lon_min = float(lon_min)
    if lat_min >= 60.0 or lon_min >= 60.0:
        raise OutOfRange(f"minutes >= 60 in {text!r}")
    lat = int(lat_deg) + lat_min / 60.0
    lon = int(lon_deg) + lon_min / 60.0
    if lat_hem.upper() == "S":
        lat = -lat
    if lon_hem.upper() == "W":
        lon = -lon
    if abs(lat) > 90.0:
        raise OutOfRange(f"latitude {lat} outside [-90, 90]")
    lon = (lon + 180.0) % 360.0 - 180.0
    return GeoPosition(lat=lat, lon=lon)


def format_ddm(pos: GeoPosition) -> str:
    """Inverse of :func:`parse_ddm_position` at one decimal minute."""

    def one(value: float, pos_hem: str, neg_hem: str, deg_width: int) -> str:
        hem = pos_hem if value >= 0 else neg_hem
        mag = abs(value)
        deg = int(mag)
        minutes = round((mag - deg) * 60.0, 1)
        if minutes >= 60.0:
            deg += 1
            minutes = 0.0
        return f"{deg:0{deg_width}d}-{minutes:04.1f}{hem}"

    return f"{one(pos.lat, 'N', 'S', 2)}\n{one(pos.lon, 'E', 'W', 3)}"


# ---------------------------------------------------------------------------
# timestamp parsing

_MONTHS = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "oct": 10, "nov": 11, "dec": 12,
}

_STAMP_RE = re.compile(
    r"^\s*(\d{1,2})\s+([A-Za-z]{3})\s+(\d{4})[\s]*(\d{4})\s*LT\s*$",
    re.IGNORECASE,
)


class UtcPolicy:
    """Treat the local stamp as already UTC."""

    def to_utc(self, local: datetime) -> datetime:
        return local.replace(tzinfo=timezone.utc)


class FixedOffsetPolicy:
    """Local time is UTC + a fixed offset (no DST)."""

    def __init__(self, offset: timedelta):
        self.offset = offset

    def to_utc(self, local: datetime) -> datetime:
        return (local - self.offset).replace(tzinfo=timezone.utc)


class NamedZonePolicy:
    """Local time in an IANA zone; DST folds and gaps are refused, not guessed."""

    def __init__(self, zone: str):
        self.zone = ZoneInfo(zone)
        self.zone_name = zone

    def to_utc(self, local: datetime) -> datetime:
        early = local.replace(tzinfo=self.zone, fold=0)
        late = local.replace(tzinfo=self.zone, fold=1)
        if early.utcoffset() != late.utcoffset():
            raise AmbiguousTimezone(f"{local} is ambiguous in {self.zone_name}")
        round_trip = early.astimezone(timezone.utc).astimezone(self.zone)
        if round_trip.replace(tzinfo=None) != local:
            raise AmbiguousTimezone(f"{local} does not exist in {self.zone_name}")
        return early.astimezone(timezone.utc)


def timezone_policy(spec: str):
    """Build a policy from a config string: ``utc``, ``fixed:+HH:MM`` or ``zone:NAME``."""
    spec = spec.strip()
    if spec.lower() == "utc":
        return UtcPolicy()
    if spec.lower().startswith("fixed:"):
        raw = spec[6:].strip()
        m = re.match(r"^([+-]?)(\d{1,2}):(\d{2})$", raw)
        if m is None:
            raise AmbiguousTimezone(f"bad fixed offset {raw!r}")
        sign = -1 if m.group(1) == "-" else 1
        return FixedOffsetPolicy(sign * timedelta(hours=int(m.group(2)), minutes=int(m.group(3))))
    if spec.lower().startswith("zone:"):
        return NamedZonePolicy(spec[5:].strip())
    raise AmbiguousTimezone(f"unknown timezone policy {spec!r}")


def parse_report_timestamp(text: str, tz_policy) -> datetime:
    """Parse ``DD MON YYYY hhmmLT`` (line break allowed before the time) to UTC."""
    if not isinstance(text, str):
        raise MalformedDate(f"expected string, got {type(text).__name__}")
    cleaned = text.replace("\\n", " ")
    m = _STAMP_RE.match(cleaned)
    if m is None:
        raise MalformedDate(f"not a report stamp: {text!r}")
    day, mon, year, hhmm = m.groups()
    month = _MONTHS.get(mon.lower())
    if month is None:
        raise MalformedDate(f"unknown month {mon!r} in {text!r}")
    hour, minute = int(hhmm[:2]), int(hhmm[2:])
    if hour > 23 or minute > 59:
        raise MalformedDate(f"invalid time {hhmm!r} in {text!r}")
    try:
        local = datetime(int(year), month, int(day), hour, minute)
    except ValueError as exc:
        raise MalformedDate(f"impossible calendar date in {text!r}") from exc
    return tz_policy.to_utc(local)


# ---------------------------------------------------------------------------
# cell parsers

_COMPASS_ALIASES = {name: member for name, member in Compass.__members__.items()}
_COMPASS_ALIASES.update({"VAR": Compass.VARIABLE, "VRB": Compass.VARIABLE})


def parse_compass(token: str) -> Compass:
    key = token.strip().upper()
    member = _COMPASS_ALIASES.get(key)
    if member is None:
        raise ValueError(f"unknown compass token {token!r}")
    return member


def parse_state_flags(text: str) -> frozenset[StateFlag]:
    """Extract known state keywords from a free-text status cell."""
    low = text.lower()
    flags = set()
    if "loading" in low and "unloading" not in low:
        flags.add(StateFlag.LOADING)
    if "bunkering" in low:
        flags.add(StateFlag.BUNKERING)
    if "discharging" in low:
        flags.add(StateFlag.DISCHARGING)
    if "anchored" in low:
        flags.add(StateFlag.ANCHORED)
    elif "anchor" in low:
        flags.add(StateFlag.ANCHOR)
    if "drifting" in low:
        flags.add(StateFlag.DRIFTING)
    return frozenset(flags)


def _parse_float(token, lo=None, hi=None):
    value = float(token)
    if not math.isfinite(value):
        raise ValueError("non-finite")
    if lo is not None and value < lo:
        raise ValueError(f"below {lo}")
    if hi is not None and value > hi:
        raise ValueError(f"above {hi}")
    return value


def _parse_slip(token):
    token = token.strip()
    if token.endswith("%"):
        token = token[:-1]
    value = float(token)
    if not math.isfinite(value):
        raise ValueError("non-finite")
    return value / 100.0


def _parse_beaufort(token):
    value = float(token)
    if value != int(value) or not (0 <= value <= 12):
        raise ValueError("Beaufort must be an integer in [0, 12]")
    return int(value)


def _parse_draft_pair(token):
    parts = token.split("/")
    if len(parts) != 2:
        raise ValueError("expected FWD/AFT")
    fwd, aft = (_parse_float(p) for p in parts)
    if fwd <= 0 or aft <= 0:
        raise ValueError("draft must be > 0")
    return fwd, aft


# field name -> cell parser; "draft" fans out into draft_fwd/draft_aft
_FIELD_PARSERS = {
    "sog_avg_24h": lambda t: _parse_float(t, lo=0.0),
    "engine_rpm_avg_24h": lambda t: _parse_float(t, lo=0.0),
    "propeller_slip": _parse_slip,
    "wind_dir": parse_compass,
    "wind_force": _parse_beaufort,
    "swell_dir": parse_compass,
    "swell_force": _parse_beaufort,
    "current_dir": parse_compass,
    "current_speed": lambda t: _parse_float(t, lo=0.0),
    "fuel_ulsfo_me": lambda t: _parse_float(t, lo=0.0),
    "fuel_ulsfo_boiler": lambda t: _parse_float(t, lo=0.0),
    "fuel_mgo_me": lambda t: _parse_float(t, lo=0.0),
    "fuel_mgo_boiler": lambda t: _parse_float(t, lo=0.0),
    "fuel_mgo_aux": lambda t: _parse_float(t, lo=0.0),
    "draft": _parse_draft_pair,
    "next_port": lambda t: t.strip(),
    "state_flags": parse_state_flags,
}

_COMPASS_FIELDS = {"wind_dir", "swell_dir", "current_dir"}

REQUIRED_FIELDS = ("timestamp", "position")

KNOWN_FIELDS = ("timestamp", "position") + tuple(_FIELD_PARSERS)


@dataclass
class ParseResult:
    records: list[VoyageRecord]
    rejected: list[RowParseError]


def parse_report_table(
    rows: Sequence[RawReportRow],
    schema: Mapping[str, str],
    tz_policy=None,
) -> ParseResult:
    """Parse raw rows under a raw-column -> field schema mapping.

    Rows with a malformed timestamp/position or an unknown compass token are
    rejected (collected, with row index and offending cell); other unparseable
    optional cells become REJECTED markers on the record and the row survives.
    """
    if tz_policy is None:
        tz_policy = UtcPolicy()
    if not rows:
        raise MissingColumn("empty row set: nothing to parse")

    fields_mapped = set(schema.values())
    for required in REQUIRED_FIELDS:
        if required not in fields_mapped:
            raise MissingColumn(f"schema does not map required field {required!r}")
    for fld in fields_mapped:
        if fld not in KNOWN_FIELDS:
            raise MissingColumn(f"schema maps unknown field {fld!r}")
    header = set(rows[0].cells.keys())
    for column in schema:
        if column not in header:
            raise MissingColumn(f"column {column!r} not found in report header")

    records: list[VoyageRecord] = []
    rejected: list[RowParseError] = []
    for index, row in enumerate(rows):
        try:
            records.append(_parse_row(index, row, schema, tz_policy))
        except RowParseError as err:
            rejected.append(err)
    return ParseResult(records=records, rejected=rejected)


def _parse_row(index, row, schema, tz_policy) -> VoyageRecord:
    values: dict = {}
    status: dict[str, CellStatus] = {}

    def cell_for(field_name):
        for column, fld in schema.items():
            if fld == field_name:
                return column, row.cells.get(column, "")
        return None, ""

    # timestamp: the join key, always required
    column, raw = cell_for("timestamp")
    try:
        values["timestamp_utc"] = parse_report_timestamp(raw, tz_policy)
    except (MalformedDate, AmbiguousTimezone) as exc:
        raise RowParseError(index, column, raw, str(exc)) from exc

    # position: missing is tolerated (idle reports), malformed is not
    column, raw = cell_for("position")
    if raw.strip() == "":
        values["position"] = None
        status["position"] = CellStatus.MISSING
    else:
        try:
            values["position"] = parse_ddm_position(raw)
            status["position"] = CellStatus.PRESENT
        except (MalformedPosition, OutOfRange) as exc:
            raise RowParseError(index, column, raw, str(exc)) from exc

    for column, fld in schema.items():
        if fld in ("timestamp", "position"):
            continue
        raw = row.cells.get(column, "")
        parser = _FIELD_PARSERS[fld]
        if raw.strip() == "":
            status[fld] = CellStatus.MISSING
            if fld == "state_flags":
                values["state_flags"] = frozenset()
            continue
        try:
            parsed = parser(raw)
        except ValueError as exc:
            if fld in _COMPASS_FIELDS:
                # silent category collapse corrupts feature encoding
                raise RowParseError(index, column, raw, str(exc)) from exc
            status[fld] = CellStatus.REJECTED
            continue
        status[fld] = CellStatus.PRESENT
        if fld == "draft":
            values["draft_fwd"], values["draft_aft"] = parsed
        else:
            values[fld] = parsed

    if values.get("next_port") == "":
        values.pop("next_port")
        status["next_port"] = CellStatus.MISSING

    return VoyageRecord(cell_status=status, **values)


# ---------------------------------------------------------------------------
# file ingestion

def read_report_rows(path, delimiter=None) -> list[RawReportRow]:
    """Load delimiter-separated report rows; quoted cells may embed newlines."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        if delimiter is None:
            try:
                delimiter = csv.Sniffer().sniff(sample, delimiters=",;\t").delimiter
            except csv.Error:
                delimiter = ","
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise MissingColumn(f"{path}: no header row")
        return [RawReportRow(cells={k: (v if v is not None else "") for k, v in r.items()})
                for r in reader]
