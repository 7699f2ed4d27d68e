import logging
import re

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from gridcharge.model.power_system_data import (
    Availability,
    AvailabilityProfile,
    DataError,
    DemandProfile,
    SourceSpec,
    SystemCapacity,
    build_availability,
    constant_availability,
    hourly_demand_from_records,
    hydro_source,
    load_source_table,
    pv_availability_profile,
    read_demand_csv,
    read_wind_clusters,
    synthetic_wind_clusters,
    wind_availability_profile,
)
from gridcharge.testing import demand_records
from gridcharge.util import load_package_data


def _row(share, availability="constant", rate=0.0, cost=0.0):
    return dict(
        share=share, emission_rate=rate, unit_cost=cost, availability=availability
    )


class TestLoadSourceTable:
    def test_default(self):
        sources = load_source_table(load_package_data("sources", "vietnam_2023"))

        assert 7 == len(sources)
        coal = sources[0]
        assert ("coal", 0.332, 820, 2100000) == (
            coal.name,
            coal.mix_share,
            coal.emission_rate,
            coal.unit_cost,
        )
        assert "hydro" == hydro_source(sources).name

        # Shares are kept as given
        assert_allclose(0.999, sum(s.mix_share for s in sources))
        assert_allclose(
            15387.5, constant_availability(coal, SystemCapacity(), 1).caps[0]
        )

    def test_default_renormalize(self):
        sources = load_source_table(
            load_package_data("sources", "vietnam_2023"), renormalize=True
        )
        assert_allclose(1.0, sum(s.mix_share for s in sources), rtol=1e-12)

    def test_single_source(self):
        sources = load_source_table([dict(name="hydro", **_row(1.0, "hydro"))])
        assert 1 == len(sources)
        assert Availability.hydro is sources[0].availability_kind

    def test_near_exact(self, caplog):
        caplog.set_level(logging.INFO, logger="gridcharge")
        sources = load_source_table(
            {"a": _row(0.5 + 4e-7), "hydro": _row(0.5, "hydro")}
        )
        assert 1.0 == pytest.approx(sum(s.mix_share for s in sources), abs=1e-15)
        assert any("Renormalize" in m for m in caplog.messages)

    def test_share_sum(self):
        with pytest.raises(DataError, match=re.escape("sum to 0.98")):
            load_source_table({"a": _row(0.48), "hydro": _row(0.5, "hydro")})

    @pytest.mark.parametrize(
        "rows, match",
        [
            ({"a": _row(-0.1), "hydro": _row(1.1, "hydro")}, "share -0.1"),
            ({"a": _row(0.5, rate=-1), "hydro": _row(0.5, "hydro")}, "negative"),
            ({"a": _row(0.5, "nuclear"), "hydro": _row(0.5, "hydro")}, "unknown"),
            ({"a": _row(0.5), "b": _row(0.5)}, "exactly 1 hydro"),
            ({"a": _row(0.5), "hydro": dict(share=0.5)}, "lacks field"),
        ],
    )
    def test_invalid(self, rows, match):
        with pytest.raises(DataError, match=match):
            load_source_table(rows)


class TestHourlyDemand:
    def test_constant(self):
        ts = pd.date_range("2023-01-01", periods=96, freq="30min")
        profile = hourly_demand_from_records(zip(ts, [100.0] * 96))

        assert 24 == len(profile)
        assert_allclose(100.0, profile.values)

    def test_mean_within_hour(self):
        ts = pd.date_range("2023-01-01", periods=48, freq="30min")
        values = [100.0] * 48
        values[:2] = [80.0, 120.0]

        assert 100.0 == hourly_demand_from_records(zip(ts, values)).values[0]

    def test_oracle(self):
        records = demand_records(days=30, seed=1)
        result = hourly_demand_from_records(records)

        # Mean of the two half-hours of each hour, then mean over days
        values = records["power_mw"].to_numpy().reshape(30, 24, 2)
        assert_allclose(values.mean(axis=2).mean(axis=0), result.values, rtol=1e-12)

    def test_scaling(self):
        records = demand_records(days=2, seed=2)
        base = hourly_demand_from_records(records)
        scaled = hourly_demand_from_records(
            records.assign(power_mw=3.0 * records["power_mw"])
        )
        assert_allclose(3.0 * base.values, scaled.values, rtol=1e-12)

    def test_gap(self):
        records = demand_records(days=2).drop(index=50)
        with pytest.raises(DataError, match="Missing half-hour slot 2023-03-02 01:00"):
            hourly_demand_from_records(records)

    def test_partial_day(self):
        with pytest.raises(DataError, match="Missing half-hour slot"):
            hourly_demand_from_records(demand_records(days=2).iloc[:-1])

    def test_off_grid(self):
        records = demand_records(days=1)
        records.loc[3, "timestamp"] += pd.Timedelta(minutes=10)
        with pytest.raises(DataError, match="not on a half-hour"):
            hourly_demand_from_records(records)

    def test_duplicate(self):
        records = demand_records(days=1)
        with pytest.raises(DataError, match="Duplicate"):
            hourly_demand_from_records(pd.concat([records, records.iloc[:1]]))

    def test_negative(self):
        with pytest.raises(DataError, match="negative demand at step 2"):
            DemandProfile([1.0, 2.0, -1.0])


def test_read_demand_csv(tmp_path):
    records = demand_records(days=1)
    path = tmp_path / "demand.csv"
    records.to_csv(path, index=False)

    result = read_demand_csv(path)
    assert_allclose(records["power_mw"], result["power_mw"])
    assert_allclose(
        hourly_demand_from_records(records).values,
        hourly_demand_from_records(result).values,
    )


def test_read_demand_csv_invalid(tmp_path):
    path = tmp_path / "demand.csv"
    path.write_text(
        "timestamp,power_mw\n"
        "2023-01-01 00:00,100\n"
        "2023-01-01 00:30,100\n"
        "2023-01-01 01:00,x1\n"
    )
    with pytest.raises(DataError, match="line 4: cannot parse power_mw .x1."):
        read_demand_csv(path)

    path.write_text("time,power\n2023-01-01 00:00,100\n")
    with pytest.raises(DataError, match="missing column"):
        read_demand_csv(path)


class TestPV:
    def test_default(self):
        B = 0.1855 * 46348 * 24
        result = pv_availability_profile(B)

        t = np.arange(7, 18)
        w = np.exp(-((t - 12) ** 2) / 8)
        expected = np.zeros(24)
        expected[7:18] = w / w.sum() * B

        assert_allclose(expected, result.caps, rtol=1e-12)
        assert result.caps[12] == pytest.approx(0.2006 * B, rel=1e-3)
        # Energy budget
        assert_allclose(B, result.caps.sum(), rtol=1e-6)
        # Exactly zero outside the window
        assert not np.any(result.caps[:7]) and not np.any(result.caps[18:])

    def test_zero_budget(self):
        assert_allclose(0.0, pv_availability_profile(0.0).caps)

    def test_single_hour(self):
        result = pv_availability_profile(100.0, window=(12, 12))
        assert 100.0 == result.caps[12] == result.caps.sum()

    def test_sub_hourly(self):
        result = pv_availability_profile(240.0, step_hours=0.5)
        assert 48 == len(result)
        assert_allclose(240.0, result.caps.sum() * 0.5)

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            (dict(sigma=0), "sigma"),
            (dict(window=(20, 23), horizon_hours=12), "Empty PV window"),
            (dict(window=(7, 25)), "not within"),
        ],
    )
    def test_invalid(self, kwargs, match):
        with pytest.raises(DataError, match=match):
            pv_availability_profile(100.0, **kwargs)


class TestWind:
    def test_constant(self):
        B = 8760 * 50.0
        result = wind_availability_profile({"a": np.full(8760, 0.5)}, {"a": 100}, B)

        assert 24 == len(result)
        assert_allclose(B / 8760, result.caps)

    def test_zero_weight(self):
        rng = np.random.default_rng(0)
        a, b = rng.uniform(size=48), rng.uniform(size=48)
        result = wind_availability_profile({"a": a, "b": b}, {"a": 10, "b": 0}, 1e4)
        alone = wind_availability_profile({"a": a}, {"a": 10}, 1e4)

        assert_allclose(alone.caps, result.caps)

    def test_bundled_oracle(self):
        manifest = load_package_data("wind", "vietnam_2023")
        profiles, capacities = synthetic_wind_clusters(manifest, days=365, seed=1)
        B = 0.0825 * 46348 * 8760

        result = wind_availability_profile(profiles, capacities, B)

        assert 7 == len(profiles)
        weighted = sum(capacities[k] * profiles[k] for k in profiles)
        series = weighted / weighted.sum() * B
        assert_allclose(series.reshape(365, 24).mean(axis=0), result.caps, rtol=1e-9)
        # Annual-equivalent energy
        assert_allclose(B, result.caps.sum() * 365, rtol=1e-6)

    def test_synthetic_deterministic(self):
        manifest = load_package_data("wind", "vietnam_2023")
        a, _ = synthetic_wind_clusters(manifest, days=2, seed=3)
        b, _ = synthetic_wind_clusters(manifest, days=2, seed=3)
        for k in a:
            assert_allclose(a[k], b[k])
            assert 0 <= a[k].min() and a[k].max() <= 1

    @pytest.mark.parametrize(
        "profiles, capacities, match",
        [
            ({"a": np.ones(48), "b": np.ones(24)}, {"a": 1, "b": 1}, "lengths differ"),
            ({"a": np.ones(48)}, {"a": 0}, "at least one > 0"),
            ({"a": np.ones(30)}, {"a": 1}, "whole number of days"),
            ({"a": np.ones(24)}, {}, "No installed capacity"),
            ({}, {}, "No wind clusters"),
        ],
    )
    def test_invalid(self, profiles, capacities, match):
        with pytest.raises(DataError, match=match):
            wind_availability_profile(profiles, capacities, 1.0)


def test_read_wind_clusters(tmp_path):
    ts = pd.date_range("2023-01-01", periods=48, freq="h")
    pd.DataFrame({"cluster_id": ["north", "south"], "installed_mw": [10, 30]}).to_csv(
        tmp_path / "clusters.csv", index=False
    )
    for name, cf in (("north", 0.2), ("south", 0.6)):
        pd.DataFrame({"timestamp": ts, "capacity_factor": cf}).to_csv(
            tmp_path / f"{name}.csv", index=False
        )

    profiles, capacities = read_wind_clusters(tmp_path / "clusters.csv")

    assert dict(north=10.0, south=30.0) == capacities
    assert_allclose(0.6, profiles["south"])
    assert 48 == len(profiles["north"])


class TestConstantAvailability:
    @pytest.mark.parametrize("share, expected", [(0.332, 15387.5), (0.012, 556.2)])
    def test_values(self, share, expected):
        spec = SourceSpec("x", share, 0.0, 0.0, Availability.constant)
        result = constant_availability(spec, SystemCapacity(46348), 24)
        assert_allclose(expected, result.caps, rtol=1e-4)
        assert 24 == len(result)

    def test_zero(self):
        spec = SourceSpec("x", 0.0, 0.0, 0.0, Availability.constant)
        assert_allclose(0.0, constant_availability(spec, SystemCapacity(), 24).caps)

    def test_wrong_kind(self):
        spec = SourceSpec("pv", 0.2, 0.0, 0.0, Availability.profile)
        with pytest.raises(DataError, match="not 'constant'"):
            constant_availability(spec, SystemCapacity(), 24)


def test_build_availability():
    sources = load_source_table(load_package_data("sources", "vietnam_2023"))
    pv = pv_availability_profile(100.0)
    wind = AvailabilityProfile("wind", np.full(24, 5.0))

    result = build_availability(sources, SystemCapacity(), 24, dict(pv=pv, wind=wind))

    assert {"coal", "gas", "fuel", "pv", "wind", "import"} == set(result)
    assert pv is result["pv"]

    with pytest.raises(DataError, match="No availability profile for 'wind'"):
        build_availability(sources, SystemCapacity(), 24, dict(pv=pv))
    with pytest.raises(DataError, match="profile length 24 ≠ 12"):
        build_availability(sources, SystemCapacity(), 12, dict(pv=pv, wind=wind))
