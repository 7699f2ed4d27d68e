import json

import numpy as np
import pandas as pd
import pytest
import yaml
from numpy.testing import assert_allclose

from gridcharge.harness import (
    FIFS,
    POWER_ALLOCATION,
    STREAMS,
    SUMMARY_COLUMNS,
    ExperimentConfig,
    StageError,
    SummaryStats,
    compare_to_fifs,
    emit_outputs,
    manifest,
    policy_name,
    prepare_run,
    run_monte_carlo,
    run_seeds,
    run_single,
)
from gridcharge.model.charging import CapacityExceeded
from gridcharge.testing import demand_records, experiment_config, small_config

OPTIMIZED = [
    "solution (lambda=0.1)",
    "solution (lambda=1)",
    "solution (lambda=10)",
    POWER_ALLOCATION,
]


@pytest.fixture(scope="module")
def config():
    return small_config(harness=dict(resample_inflows=False))


@pytest.fixture(scope="module")
def report(config):
    return run_single(config, 0)


@pytest.fixture(scope="module")
def stats(config):
    return run_monte_carlo(config)


class TestExperimentConfig:
    def test_default(self):
        c = experiment_config()

        assert 24 == c.n_steps
        assert 144 == c.fleet.n_steps
        assert 300 == c.fleet.n_evs
        assert "VND" == c.source_currency
        assert "EUR" == c.currency.base
        # 1 785 000 VND per tonne
        assert 64.0 == pytest.approx(c.carbon_price)
        assert (0.1, 1.0, 10.0) == c.lambdas
        assert 10.0 == c.charging_lambda
        assert 100 == c.n_runs
        assert "sample" == c.price_mode
        assert 456 * 24 == len(c.price_history)

    def test_from_file(self, tmp_path):
        demand_records(days=2).to_csv(tmp_path / "demand.csv", index=False)
        doc = dict(
            system=dict(demand="demand.csv"),
            fleet=dict(n_evs=10),
            harness=dict(runs=2, lambdas=[1, 5]),
        )
        path = tmp_path / "experiment.yaml"
        path.write_text(yaml.safe_dump(doc))

        c = ExperimentConfig.from_file(path)

        assert 10 == c.fleet.n_evs
        assert (1.0, 5.0) == c.lambdas
        assert 24 == len(c.demand)
        assert 24000 < c.demand.values.mean() < 32000

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="demand data file"):
            ExperimentConfig.from_dict(
                dict(system=dict(demand="absent.csv")), base=tmp_path
            )

    @pytest.mark.parametrize(
        "sections, match",
        [
            (dict(harness=dict(runs=0)), "Need ≥ 1 run"),
            (dict(harness=dict(lambdas=[1, -1])), "Need ≥ 1 λ value"),
            (dict(harness=dict(lambdas=[])), "Need ≥ 1 λ value"),
            (dict(harness=dict(price_mode="median")), "Unknown price mode"),
            (dict(charging={"lambda": -1}), "λ must be ≥ 0"),
            (dict(currency=dict(base="GBP")), "No exchange rate"),
            (dict(prices=dict(source="x.csv")), "prices data file"),
        ],
    )
    def test_invalid(self, sections, match):
        with pytest.raises((ValueError, FileNotFoundError), match=match):
            experiment_config(**sections)

    def test_replace(self):
        c = small_config()
        c2 = c.replace(n_runs=7, lambdas=[2.0], price_mode="mean")

        assert 7 == c2.n_runs
        assert (2.0,) == c2.lambdas
        assert "mean" == c2.price_mode
        assert 7 == c2.data["harness"]["runs"]
        assert [2.0] == c2.data["harness"]["lambdas"]
        # Original unchanged
        assert 3 == c.n_runs and 3 == c.data["harness"]["runs"]

        with pytest.raises(ValueError, match="Cannot override 'fleet'"):
            c.replace(fleet=None)

    def test_hash(self):
        a, b = small_config(), small_config()

        assert a.hash() == b.hash()
        assert 64 == len(a.hash())
        assert a.hash() != a.replace(master_seed=1).hash()


def test_policy_name():
    assert POWER_ALLOCATION == policy_name(0)
    assert "solution (lambda=0.1)" == policy_name(0.1)
    assert "solution (lambda=10)" == policy_name(10.0)


def test_run_seeds(config):
    seeds = run_seeds(config, 3)

    assert set(STREAMS) == set(seeds)
    # Inflows are shared by every run without resampling
    assert seeds["inflows"] == run_seeds(config, 0)["inflows"]
    assert seeds["fleet"] != run_seeds(config, 0)["fleet"]
    assert config.master_seed == seeds["fleet"][0]
    assert 3 == seeds["fleet"][1]

    resampled = config.replace(resample_inflows=True)
    assert run_seeds(resampled, 3)["inflows"] != run_seeds(resampled, 0)["inflows"]


class TestPrepareRun:
    def test_grids(self, config):
        inputs = prepare_run(config, 0)

        assert 144 == len(inputs.energy_price) == len(inputs.fine_intensity)
        assert 24 == len(inputs.fleet)
        assert_allclose(24 * 22.0, inputs.station_capacity)
        # Hold: six fine steps per hour
        assert_allclose(inputs.intensity.values, inputs.fine_intensity[::6])
        assert np.all(inputs.energy_price >= 0)

    def test_price_mode_mean(self, config):
        inputs = prepare_run(config.replace(price_mode="mean"), 0)
        assert_allclose(config.price_model().mean, inputs.energy_price)

    def test_capacity(self, config):
        inputs = prepare_run(config.replace(station_capacity_kw=100.0), 0)
        assert_allclose(100.0, inputs.station_capacity)


class TestRunSingle:
    def test_policies(self, report):
        assert OPTIMIZED + [FIFS] == list(report.metrics)
        assert 0.0 == report.lambdas[POWER_ALLOCATION]
        assert 10.0 == report.lambdas["solution (lambda=10)"]
        assert "EUR" == report.currency
        assert 24 == len(report.intensity)

    def test_optimality(self, report):
        fifs = report.metrics[FIFS]
        for name in OPTIMIZED:
            lam = report.lambdas[name]
            m = report.metrics[name]
            assert m.objective_at(lam) <= fifs.objective_at(lam) * (1 + 1e-9)
            assert 0 == pytest.approx(m.shortfall, abs=1e-6)

        assert 0 == pytest.approx(fifs.shortfall, abs=1e-6)
        # Both deliver the requested energy
        assert fifs.energy_delivered == pytest.approx(
            report.metrics[POWER_ALLOCATION].energy_delivered, rel=1e-9
        )

    def test_emissions_order(self, report):
        m = report.metrics
        assert (
            m["solution (lambda=10)"].emission_mass
            <= m[POWER_ALLOCATION].emission_mass * (1 + 1e-9)
        )
        assert (
            m[POWER_ALLOCATION].energy_cost
            <= m["solution (lambda=10)"].energy_cost * (1 + 1e-9)
        )

    def test_deterministic(self, config, report):
        again = run_single(config, 0)
        assert report.as_dict() == again.as_dict()
        assert run_single(config, 1).as_dict() != report.as_dict()

    def test_details(self, report):
        assert {
            "allocation_fifs.csv",
            "allocation_power_allocation.csv",
            "allocation_solution_lambda_0.1.csv",
            "dispatch.csv",
            "emissions.csv",
            "fleet.csv",
            "hydro.csv",
            "load_price.csv",
        } <= set(report.details)
        assert report.without_details().details is None

        load_price = report.details["load_price.csv"]
        assert 144 == len(load_price)
        assert "load_kw_fifs" in load_price.columns

    def test_stage_error(self, config):
        # 1 kW cannot deliver the demand of 24 vehicles over one day
        config = config.replace(station_capacity_kw=1.0)
        fleet = prepare_run(config, 2).charging_instance(0.0).sessions
        assert 24 == len({s.id for s in fleet})
        assert sum(s.demand for s in fleet) > 24.0

        with pytest.raises(StageError, match="Run 2, stage 'charging'") as exc_info:
            run_single(config, 2)

        e = exc_info.value
        assert (2, "charging") == (e.run_index, e.stage)
        assert isinstance(e.cause, CapacityExceeded)
        assert e.__cause__ is e.cause
        assert e.cause.step is not None
        assert "CapacityExceeded: Demand due by step" in str(e)


def test_compare_to_fifs(report):
    df = compare_to_fifs(report)
    fifs = report.metrics[FIFS]

    assert OPTIMIZED == df.index.tolist()
    m = report.metrics[POWER_ALLOCATION]
    assert (fifs.energy_cost - m.energy_cost) / fifs.energy_cost == pytest.approx(
        df.loc[POWER_ALLOCATION, "cost_reduction"]
    )


class TestSummaryStats:
    def test_single(self, report):
        s = SummaryStats.from_reports([report])

        assert 1 == s.n_runs
        for name, m in report.metrics.items():
            row = s.table.loc[name]
            assert m.energy_cost == row["mean_cost"]
            assert m.emission_mass == row["mean_emissions_kg"]
            assert 0.0 == row["sd_cost"] == row["sd_emissions_kg"]
            assert m.energy_cost == row["min_cost"] == row["max_cost"]

        deltas = compare_to_fifs(report)
        assert_allclose(
            deltas["cost_reduction"], s.table.loc[OPTIMIZED, "delta_cost_vs_fifs"]
        )
        assert 0.0 == s.table.loc[FIFS, "delta_cost_vs_fifs"]

    def test_empty(self):
        with pytest.raises(ValueError, match="No run reports"):
            SummaryStats.from_reports([])

    def test_monte_carlo(self, config, stats):
        assert 3 == stats.n_runs
        assert [0, 1, 2] == [r.run_index for r in stats.reports]
        # Details kept for run 0 only
        assert stats.reports[0].details is not None
        assert stats.reports[1].details is None

        costs = [r.metrics[FIFS].energy_cost for r in stats.reports]
        assert np.mean(costs) == pytest.approx(stats.table.loc[FIFS, "mean_cost"])
        assert np.std(costs) == pytest.approx(stats.table.loc[FIFS, "sd_cost"])

    def test_order_independent(self, config, stats):
        reordered = SummaryStats.from_reports(stats.reports[::-1])
        pd.testing.assert_frame_equal(stats.table, reordered.table)


class TestEmitOutputs:
    def test_summary(self, tmp_path, config, stats):
        written = emit_outputs(stats, tmp_path, config=config)

        assert tmp_path / "summary.csv" in written
        lines = (tmp_path / "summary.csv").read_text().splitlines()
        assert ",".join(SUMMARY_COLUMNS) == lines[0]
        assert 1 + 5 == len(lines)

        csv = pd.read_csv(tmp_path / "summary.csv").set_index("policy")
        data = json.loads((tmp_path / "summary.json").read_text())
        for name, row in csv.iterrows():
            for column, value in row.items():
                assert data["policies"][name][column] == pytest.approx(value, rel=1e-12)

        info = json.loads((tmp_path / "manifest.json").read_text())
        assert config.hash() == info["config_sha256"]
        assert run_seeds(config, 2) == info["seeds"]["2"]
        assert "EUR" == info["currency"]["base"]
        assert info == json.loads(json.dumps(manifest(config, [0, 1, 2])))

        assert (tmp_path / "run_000" / "allocation_fifs.csv").exists()
        assert not (tmp_path / "run_001").exists()

    def test_formats(self, tmp_path, stats):
        bare = SummaryStats(stats.table, 3, "EUR")
        written = emit_outputs(bare, tmp_path, ["csv"])
        assert [tmp_path / "summary.csv"] == written

    def test_report(self, tmp_path, report):
        emit_outputs(report, tmp_path, formats=["csv", "json"])

        df = pd.read_csv(tmp_path / "metrics.csv")
        assert OPTIMIZED + [FIFS] == df["policy"].tolist()
        assert 0 == json.loads((tmp_path / "metrics.json").read_text())["run_index"]
        assert (tmp_path / "run_000" / "dispatch.csv").exists()

    def test_deterministic(self, tmp_path, config, stats):
        emit_outputs(stats, tmp_path / "a", config=config)
        emit_outputs(run_monte_carlo(config), tmp_path / "b", config=config)

        for name in ("summary.csv", "summary.json", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_unwritable(self, tmp_path, stats):
        target = tmp_path / "file"
        target.write_text("")

        with pytest.raises(OSError, match="Cannot create"):
            emit_outputs(stats, target)


@pytest.mark.slow
def test_dominance():
    """Every optimized policy beats FIFS on mean cost and emissions."""
    stats = run_monte_carlo(experiment_config(harness=dict(runs=20)))
    t = stats.table

    for name in OPTIMIZED:
        assert t.loc[name, "mean_cost"] < t.loc[FIFS, "mean_cost"]
        assert t.loc[name, "mean_emissions_kg"] < t.loc[FIFS, "mean_emissions_kg"]
        assert t.loc[name, "delta_cost_vs_fifs"] > 0

    mass = t["mean_emissions_kg"]
    assert mass["solution (lambda=10)"] <= mass["solution (lambda=1)"]
    assert mass["solution (lambda=1)"] <= mass["solution (lambda=0.1)"]
    assert mass["solution (lambda=0.1)"] <= mass[POWER_ALLOCATION]
