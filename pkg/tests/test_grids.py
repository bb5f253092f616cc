import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shipfuel.errors import (AllMissing, FormatError, NonDivisibleStep, OutOfBounds,
                             ShapeMismatch)
from shipfuel.grids import (EnvGrid, GridAxis, daily_mean, fill_series, load_grid,
                            sample_at, save_grid)
from shipfuel.reports import GeoPosition

T0 = datetime(2021, 11, 16, 0, 0, tzinfo=timezone.utc)


def make_grid(lats=(0.0, 1.0, 2.0), lons=(10.0, 11.0), hours=24, count_t=3,
              codes=("so",), fill=-999.0):
    lat_axis = GridAxis(start=lats[0], step=lats[1] - lats[0], count=len(lats))
    lon_axis = GridAxis(start=lons[0], step=lons[1] - lons[0], count=len(lons))
    time_axis = GridAxis(start=T0, step=timedelta(hours=hours), count=count_t)
    rng = np.random.default_rng(1)
    params = {c: rng.normal(size=(count_t, len(lats), len(lons))) for c in codes}
    return EnvGrid(lat_axis=lat_axis, lon_axis=lon_axis, time_axis=time_axis,
                   params=params, fill_value=fill)


class TestAxis:
    def test_regular_cmems_longitudes_accepted(self):
        # float32-truncated 1/12-degree product coordinates
        values = [-43.0, -42.916656, -42.833328, -42.75, -42.666656]
        axis = GridAxis.from_values(values, tol=1e-4)
        assert axis.count == 5
        assert axis.step == pytest.approx(1 / 12, abs=1e-4)

    def test_irregular_rejected(self):
        with pytest.raises(FormatError):
            GridAxis.from_values([0.0, 1.0, 2.5], tol=1e-4)

    def test_nearest_tie_breaks_low(self):
        axis = GridAxis(start=0.0, step=1.0, count=3)
        assert axis.nearest(0.5) == 0
        assert axis.nearest(1.5) == 1

    def test_nearest_half_step_edge_allowed(self):
        axis = GridAxis(start=0.0, step=1.0, count=3)
        assert axis.nearest(-0.5) == 0
        assert axis.nearest(2.5) == 2
        with pytest.raises(OutOfBounds):
            axis.nearest(2.6)


class TestSampleAt:
    def test_exact_cell_center(self):
        grid = make_grid()
        s = sample_at(grid, GeoPosition(1.0, 11.0), T0 + timedelta(hours=24))
        assert s.matched_cell == (1, 1, 1)
        assert s.distance_deg == 0.0
        assert s.values["so"] == pytest.approx(grid.params["so"][1, 1, 1])

    def test_near_neighbor_fine_axis(self):
        lats = [-36.0 + i * 0.083 for i in range(5)]
        grid = make_grid(lats=lats)
        s = sample_at(grid, GeoPosition(-36.04, 10.0), T0)
        assert s.matched_cell[0] == 0     # |-36.04 + 36.0| = 0.04 < 0.0415

    def test_out_of_bounds_lon(self):
        grid = make_grid()
        with pytest.raises(OutOfBounds) as err:
            sample_at(grid, GeoPosition(1.0, 14.0), T0)   # 3 steps past the last lon
        assert err.value.axis == "lon"

    def test_missing_cell_reported_as_none(self):
        grid = make_grid()
        grid.params["so"][0, 0, 0] = np.nan
        s = sample_at(grid, GeoPosition(0.0, 10.0), T0)
        assert s.values["so"] is None

    def test_matches_exhaustive_scan(self, rng):
        grid = make_grid(lats=tuple(np.linspace(-5, 5, 9)),
                         lons=tuple(np.linspace(40, 44, 9)), count_t=10)
        times = grid.time_axis.values()
        lats = np.array(grid.lat_axis.values())
        lons = np.array(grid.lon_axis.values())
        for _ in range(200):
            lat = rng.uniform(-5.5, 5.5)
            lon = rng.uniform(39.8, 44.2)
            t = T0 + timedelta(hours=float(rng.uniform(-11.9, 24 * 9 + 11.9)))
            s = sample_at(grid, GeoPosition(lat, lon), t)
            # oracle: per-axis argmin with low-index ties over every cell
            best_la = min(range(9), key=lambda i: (abs(lats[i] - lat), i))
            best_lo = min(range(9), key=lambda i: (abs(lons[i] - lon), i))
            best_t = min(range(10),
                         key=lambda i: (abs((times[i] - t).total_seconds()), i))
            assert s.matched_cell == (best_la, best_lo, best_t)

    def test_depth_resolved_uses_shallowest(self):
        lat_axis = GridAxis(0.0, 1.0, 2)
        lon_axis = GridAxis(0.0, 1.0, 2)
        time_axis = GridAxis(T0, timedelta(hours=24), 1)
        arr = np.zeros((1, 3, 2, 2))
        arr[0, 0] = 7.0    # surface level
        arr[0, 1:] = -5.0
        grid = EnvGrid(lat_axis=lat_axis, lon_axis=lon_axis, time_axis=time_axis,
                       params={"thetao": arr}, depth_levels=[0.494025, 10.0, 50.0])
        s = sample_at(grid, GeoPosition(0.0, 0.0), T0)
        assert s.values["thetao"] == 7.0


class TestDailyMean:
    def test_constant_series(self):
        grid = make_grid(hours=1, count_t=24)
        grid.params["so"][:] = 5.0
        out = daily_mean(grid)
        assert out.time_axis.count == 1
        assert np.all(out.params["so"] == 5.0)
        assert out.time_axis.start.hour == 12

    def test_hourly_ramp_mean(self):
        grid = make_grid(hours=1, count_t=24)
        for t in range(24):
            grid.params["so"][t] = float(t)
        out = daily_mean(grid)
        assert np.all(out.params["so"] == pytest.approx(11.5))

    def test_all_missing_day_stays_missing(self):
        grid = make_grid(hours=1, count_t=24)
        grid.params["so"][:, 0, 0] = np.nan
        out = daily_mean(grid)
        assert math.isnan(out.params["so"][0, 0, 0])
        assert not np.isnan(out.params["so"][0, 1, 1])

    def test_partial_missing_uses_observed_only(self):
        grid = make_grid(hours=1, count_t=24)
        grid.params["so"][:] = 3.0
        grid.params["so"][:12, 0, 0] = np.nan
        out = daily_mean(grid)
        assert out.params["so"][0, 0, 0] == pytest.approx(3.0)

    def test_non_divisible_step(self):
        grid = make_grid(hours=7, count_t=10)
        with pytest.raises(NonDivisibleStep):
            daily_mean(grid)

    def test_affine_equivariance(self, rng):
        for _ in range(100):
            grid = make_grid(hours=3, count_t=16, codes=("x",))
            grid.params["x"] = rng.normal(size=grid.params["x"].shape)
            mask = rng.uniform(size=grid.params["x"].shape) < 0.2
            grid.params["x"][mask] = np.nan
            a, b = rng.normal(), rng.normal()
            scaled = make_grid(hours=3, count_t=16, codes=("x",))
            scaled.params["x"] = a * grid.params["x"] + b
            lhs = daily_mean(scaled).params["x"]
            rhs = a * daily_mean(grid).params["x"] + b
            assert np.allclose(lhs, rhs, equal_nan=True)

    def test_metadata_preserved(self):
        grid = make_grid(hours=1, count_t=24)
        grid.meta["so"] = ("sea water salinity", "1e-3")
        assert daily_mean(grid).meta["so"] == ("sea water salinity", "1e-3")


class TestFillSeries:
    def test_midpoint(self):
        assert fill_series([1.0, None, 3.0]).tolist() == [1.0, 2.0, 3.0]

    def test_backward_fill_leading(self):
        assert fill_series([None, None, 4.0]).tolist() == [4.0, 4.0, 4.0]

    def test_forward_hold_trailing(self):
        assert fill_series([2.0, None, None]).tolist() == [2.0, 2.0, 2.0]

    def test_all_missing(self):
        with pytest.raises(AllMissing):
            fill_series([None, None])

    @given(st.lists(st.one_of(st.none(), st.floats(-100, 100)), min_size=1, max_size=40)
           .filter(lambda vs: any(v is not None for v in vs)))
    def test_fill_properties(self, values):
        out = fill_series(values)
        assert not np.isnan(out).any()
        observed = [(i, v) for i, v in enumerate(values) if v is not None]
        for i, v in observed:
            assert out[i] == pytest.approx(v)
        # interior fills stay within their bracketing neighbors
        for k in range(len(observed) - 1):
            (i, vi), (j, vj) = observed[k], observed[k + 1]
            lo, hi = min(vi, vj), max(vi, vj)
            for m in range(i + 1, j):
                assert lo - 1e-9 <= out[m] <= hi + 1e-9


class TestGridIO:
    def test_csv_round_trip(self, tmp_path):
        grid = make_grid(codes=("so", "thetao"))
        grid.params["so"][1, 0, 1] = np.nan
        grid.meta["so"] = ("sea water salinity", "1e-3")
        path = tmp_path / "g.grid.csv"
        save_grid(grid, path)
        back = load_grid(path)
        assert back.param_codes == ["so", "thetao"]
        assert np.allclose(back.params["so"], grid.params["so"], equal_nan=True)
        assert back.meta["so"] == ("sea water salinity", "1e-3")
        assert back.time_axis.start == grid.time_axis.start

    def test_binary_round_trip(self, tmp_path):
        grid = make_grid(codes=("so", "thetao"))
        grid.params["thetao"][0, 2, 0] = np.nan
        path = tmp_path / "g.grid.bin"
        save_grid(grid, path, format="binary")
        back = load_grid(path, format="binary")
        assert np.allclose(back.params["thetao"], grid.params["thetao"],
                           equal_nan=True, atol=1e-6)

    def test_minimal_csv(self, tmp_path):
        path = tmp_path / "mini.grid.csv"
        path.write_text(
            "#axes lat=0:1:2 lon=5:1:2 time=2021-11-16T00:00:00:24:1\n"
            "#params so\n"
            "#fill -999\n"
            "0,0,0,1.5\n0,0,1,2.5\n0,1,0,3.5\n0,1,1,-999\n"
        )
        grid = load_grid(path)
        assert grid.params["so"].shape == (1, 2, 2)
        assert grid.params["so"][0, 0, 0] == 1.5
        assert math.isnan(grid.params["so"][0, 1, 1])

    def test_wrong_width_rejected(self, tmp_path):
        path = tmp_path / "bad.grid.csv"
        path.write_text(
            "#axes lat=0:1:1 lon=5:1:1 time=2021-11-16T00:00:00:24:1\n"
            "#params so,thetao\n#fill -999\n"
            "0,0,0,1.5\n"
        )
        with pytest.raises(FormatError):
            load_grid(path)

    def test_binary_wrong_length_is_shape_mismatch(self, tmp_path):
        grid = make_grid()
        path = tmp_path / "g.grid.bin"
        save_grid(grid, path, format="binary")
        with open(path, "ab") as fh:
            fh.write(b"\x00\x00\x80\x3f")
        with pytest.raises(ShapeMismatch):
            load_grid(path)

    def test_constructor_rejects_bad_shape(self):
        with pytest.raises(ShapeMismatch):
            EnvGrid(lat_axis=GridAxis(0.0, 1.0, 2), lon_axis=GridAxis(0.0, 1.0, 2),
                    time_axis=GridAxis(T0, timedelta(hours=24), 1),
                    params={"so": np.zeros((1, 2, 3))})

    def test_subset_then_sample(self):
        grid = make_grid(lats=(0.0, 1.0, 2.0, 3.0), lons=(10.0, 11.0, 12.0))
        sub = grid.subset(lat_slice=slice(1, 3), lon_slice=slice(0, 2))
        assert sub.lat_axis.count == 2
        s = sample_at(sub, GeoPosition(2.0, 11.0), T0)
        assert s.values["so"] == pytest.approx(grid.params["so"][0, 2, 1])
