import math
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from shipfuel.errors import (AmbiguousTimezone, MalformedDate, MalformedPosition,
                             MissingColumn, OutOfRange)
from shipfuel.reports import (Compass, FixedOffsetPolicy, GeoPosition, NamedZonePolicy,
                              RawReportRow, UtcPolicy, format_ddm, parse_compass,
                              parse_ddm_position, parse_report_table,
                              parse_report_timestamp, parse_state_flags, CellStatus,
                              StateFlag, timezone_policy)


class TestDdmPosition:
    def test_sample_from_voyage_report(self):
        pos = parse_ddm_position("02-16.0N\n101-52.5E")
        assert pos.lat == pytest.approx(2 + 16.0 / 60, abs=1e-6)
        assert pos.lon == pytest.approx(101 + 52.5 / 60, abs=1e-6)

    def test_zero_case(self):
        assert parse_ddm_position("00-00.0N\n000-00.0E") == GeoPosition(0.0, 0.0)

    def test_south_west_signs(self):
        pos = parse_ddm_position("36-00.0S\n043-00.0W")
        assert pos.lat == -36.0
        assert pos.lon == -43.0

    def test_literalized_newline_separator(self):
        pos = parse_ddm_position("02-16.0N\\n101-52.5E")
        assert pos.lat == pytest.approx(2.266667, abs=1e-6)

    def test_minutes_sixty_rejected(self):
        with pytest.raises(OutOfRange):
            parse_ddm_position("02-60.0N\n101-52.5E")

    def test_latitude_overflow_rejected(self):
        with pytest.raises(OutOfRange):
            parse_ddm_position("91-00.0N\n101-52.5E")

    def test_garbage_rejected(self):
        with pytest.raises(MalformedPosition):
            parse_ddm_position("just text")

    def test_longitude_wraps_into_range(self):
        assert parse_ddm_position("00-00.0N\n180-00.0E").lon == -180.0
        assert parse_ddm_position("00-00.0N\n190-00.0E").lon == pytest.approx(-170.0)

    @given(
        lat_deg=st.integers(0, 89), lat_min=st.integers(0, 599),
        lon_deg=st.integers(0, 179), lon_min=st.integers(0, 599),
        ns=st.sampled_from("NS"), ew=st.sampled_from("EW"),
    )
    def test_round_trip_up_to_whitespace(self, lat_deg, lat_min, lon_deg, lon_min, ns, ew):
        # 00-00.0S / 000-00.0W canonicalize to N / E: same point, one spelling
        assume(not (lat_deg == 0 and lat_min == 0 and ns == "S"))
        assume(not (lon_deg == 0 and lon_min == 0 and ew == "W"))
        text = (f"{lat_deg:02d}-{lat_min / 10:04.1f}{ns}\n"
                f"{lon_deg:03d}-{lon_min / 10:04.1f}{ew}")
        back = format_ddm(parse_ddm_position(text))
        assert back.split() == text.split()

    @given(lat_min=st.integers(0, 598))
    def test_monotone_in_minutes(self, lat_min):
        lo = parse_ddm_position(f"10-{lat_min / 10:04.1f}N\n050-00.0E")
        hi = parse_ddm_position(f"10-{(lat_min + 1) / 10:04.1f}N\n050-00.0E")
        assert hi.lat > lo.lat


class TestTimestamp:
    def test_fixed_offset(self):
        got = parse_report_timestamp("16 NOV 2021 1200LT",
                                     FixedOffsetPolicy(timedelta(hours=1)))
        assert got == datetime(2021, 11, 16, 11, 0, tzinfo=timezone.utc)

    def test_utc_passthrough_with_line_break(self):
        got = parse_report_timestamp("19 Nov 2021\n1200LT", UtcPolicy())
        assert got == datetime(2021, 11, 19, 12, 0, tzinfo=timezone.utc)

    def test_impossible_date(self):
        with pytest.raises(MalformedDate):
            parse_report_timestamp("31 FEB 2022 1200LT", UtcPolicy())

    def test_unknown_layout(self):
        with pytest.raises(MalformedDate):
            parse_report_timestamp("2021-11-16 12:00", UtcPolicy())

    def test_named_zone(self):
        got = parse_report_timestamp("16 NOV 2021 1200LT", NamedZonePolicy("Europe/Zurich"))
        assert got == datetime(2021, 11, 16, 11, 0, tzinfo=timezone.utc)

    def test_named_zone_rejects_dst_fold(self):
        # 02:30 repeats when Zurich falls back on 2021-10-31
        with pytest.raises(AmbiguousTimezone):
            parse_report_timestamp("31 OCT 2021 0230LT", NamedZonePolicy("Europe/Zurich"))

    def test_named_zone_rejects_dst_gap(self):
        with pytest.raises(AmbiguousTimezone):
            parse_report_timestamp("28 MAR 2021 0230LT", NamedZonePolicy("Europe/Zurich"))

    def test_policy_from_string(self):
        assert isinstance(timezone_policy("utc"), UtcPolicy)
        p = timezone_policy("fixed:+01:00")
        assert p.offset == timedelta(hours=1)
        assert timezone_policy("zone:Europe/Zurich").zone_name == "Europe/Zurich"


class TestCompassAndFlags:
    def test_axis_cases(self):
        assert Compass.N.sin_cos() == (0.0, 1.0)
        sin_e, cos_e = Compass.E.sin_cos()
        assert sin_e == pytest.approx(1.0)
        assert cos_e == pytest.approx(0.0, abs=1e-12)

    def test_unknown_token(self):
        with pytest.raises(ValueError):
            parse_compass("NNNE")

    def test_variable_and_calm(self):
        assert parse_compass("var") is Compass.VARIABLE
        assert Compass.CALM.sin_cos() == (0.0, 0.0)

    def test_state_flag_extraction(self):
        assert parse_state_flags("Bunkering Operation") == frozenset({StateFlag.BUNKERING})
        assert parse_state_flags("VSL Anchored") == frozenset({StateFlag.ANCHORED})
        assert parse_state_flags("Anchor") == frozenset({StateFlag.ANCHOR})
        assert parse_state_flags("At sea") == frozenset()
        both = parse_state_flags("Loading Operation, Drifting")
        assert both == frozenset({StateFlag.LOADING, StateFlag.DRIFTING})


SCHEMA = {
    "date": "timestamp",
    "position": "position",
    "speed": "sog_avg_24h",
    "rpm": "engine_rpm_avg_24h",
    "wind dir": "wind_dir",
    "draft": "draft",
    "remarks": "state_flags",
}


def _row(**overrides):
    cells = {
        "date": "16 NOV 2021 1200LT",
        "position": "02-16.0N\n101-52.5E",
        "speed": "13.6",
        "rpm": "89.0",
        "wind dir": "NE",
        "draft": "7.20/7.80",
        "remarks": "",
    }
    cells.update(overrides)
    return RawReportRow(cells=cells)


class TestReportTable:
    def test_draft_ratio_split(self):
        result = parse_report_table([_row()], SCHEMA)
        rec = result.records[0]
        assert rec.draft_fwd == pytest.approx(7.2)
        assert rec.draft_aft == pytest.approx(7.8)

    def test_well_formed_rows_all_parse(self):
        result = parse_report_table([_row() for _ in range(296)], SCHEMA)
        assert len(result.records) == 296
        assert not result.rejected

    def test_empty_input_rejected(self):
        with pytest.raises(MissingColumn):
            parse_report_table([], SCHEMA)

    def test_schema_must_cover_required(self):
        with pytest.raises(MissingColumn):
            parse_report_table([_row()], {"speed": "sog_avg_24h"})

    def test_schema_column_must_exist(self):
        bad = dict(SCHEMA)
        bad["no_such_column"] = "current_speed"
        with pytest.raises(MissingColumn):
            parse_report_table([_row()], bad)

    def test_bad_timestamp_rejects_row(self):
        result = parse_report_table([_row(date="teatime"), _row()], SCHEMA)
        assert len(result.records) == 1
        assert len(result.rejected) == 1
        assert result.rejected[0].row_index == 0

    def test_unknown_compass_rejects_row(self):
        result = parse_report_table([_row(**{"wind dir": "NNNW"})], SCHEMA)
        assert not result.records
        assert result.rejected[0].column == "wind dir"

    def test_unparseable_optional_cell_is_marker_not_zero(self):
        result = parse_report_table([_row(speed="fast")], SCHEMA)
        rec = result.records[0]
        assert rec.sog_avg_24h is None
        assert rec.cell_status["sog_avg_24h"] is CellStatus.REJECTED

    def test_empty_optional_cell_is_missing(self):
        result = parse_report_table([_row(speed="")], SCHEMA)
        rec = result.records[0]
        assert rec.sog_avg_24h is None
        assert rec.cell_status["sog_avg_24h"] is CellStatus.MISSING

    def test_emitted_plus_rejected_partition_input(self):
        rows = [_row(), _row(date="bad"), _row(), _row(**{"wind dir": "??"})]
        result = parse_report_table(rows, SCHEMA)
        assert len(result.records) + len(result.rejected) == len(rows)
        assert sorted(e.row_index for e in result.rejected) == [1, 3]

    def test_negative_fuel_becomes_rejected_marker(self):
        schema = dict(SCHEMA)
        schema["me fuel"] = "fuel_ulsfo_me"
        result = parse_report_table([_row(**{"me fuel": "-2.0"})], schema)
        rec = result.records[0]
        assert rec.fuel_ulsfo_me is None
        assert rec.cell_status["fuel_ulsfo_me"] is CellStatus.REJECTED

    def test_slip_percent_to_fraction(self):
        schema = dict(SCHEMA)
        schema["slip"] = "propeller_slip"
        result = parse_report_table([_row(slip="2.5")], schema)
        assert result.records[0].propeller_slip == pytest.approx(0.025)

    def test_missing_position_tolerated(self):
        result = parse_report_table([_row(position="")], SCHEMA)
        rec = result.records[0]
        assert rec.position is None
        assert rec.cell_status["position"] is CellStatus.MISSING
