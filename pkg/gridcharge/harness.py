"""End-to-end experiments: dispatch, emission price, and smart charging.

One run:

1. solves the unit commitment problem (:mod:`.model.ucp`),
2. converts the dispatch to a carbon intensity and emission price
   (:mod:`.model.emissions`), held on the fine charging grid,
3. samples a fleet and an electricity price profile (:mod:`.model.scenarios`), and
4. schedules the fleet for every trade-off weight λ, the cost-only case λ = 0 and the
   first-in-first-served baseline (:mod:`.model.charging`).

:func:`run_monte_carlo` repeats this for K runs with seeds derived from one master seed,
and aggregates the results.
"""
import json
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import click
import numpy as np
import pandas as pd

from gridcharge.model.charging import (
    AllocationMatrix,
    ChargingInstance,
    EvSession,
    ScheduleMetrics,
    evaluate_schedule,
    fifs_schedule,
    solve_smart_charging,
)
from gridcharge.model.emissions import (
    EmissionPriceSeries,
    IntensitySeries,
    carbon_intensity,
    emission_frame,
    emission_price,
    resample_hold,
)
from gridcharge.model.power_system_data import (
    DemandProfile,
    SourceSpec,
    SystemCapacity,
    hourly_demand_from_records,
    load_source_table,
    read_demand_csv,
    read_wind_clusters,
    synthetic_wind_clusters,
)
from gridcharge.model.scenarios import (
    FleetParams,
    PriceModel,
    fit_price_model,
    read_price_csv,
    sample_fleet,
    sample_price_profile,
    synthetic_price_history,
)
from gridcharge.model.ucp import (
    DispatchSchedule,
    UcpInstance,
    build_instance,
    solve_ucp,
)
from gridcharge.util import (
    config_hash,
    load_yaml,
    package_data_path,
    random_stream,
    resolve_data,
    seed_sequence,
)
from gridcharge.util._logging import log_file
from gridcharge.util.click import common_params
from gridcharge.util.units import Currency

log = logging.getLogger(__name__)

#: Names of the random streams of one run.
STREAMS = ("inflows", "fleet", "prices")

#: Header of :file:`summary.csv`.
SUMMARY_COLUMNS = [
    "policy",
    "mean_cost",
    "sd_cost",
    "mean_emissions_kg",
    "sd_emissions_kg",
    "delta_cost_vs_fifs",
    "delta_emissions_vs_fifs",
]

POWER_ALLOCATION = "power-allocation"
FIFS = "fifs"


class StageError(RuntimeError):
    """A stage of one run failed."""

    def __init__(self, run_index: int, stage: str, cause: BaseException):
        self.run_index = run_index
        self.stage = stage
        self.cause = cause
        super().__init__(run_index, stage, cause)

    def __str__(self):
        return (
            f"Run {self.run_index}, stage {self.stage!r}: "
            f"{type(self.cause).__name__}: {self.cause}"
        )


@contextmanager
def stage(name: str, run_index: int):
    """Re-raise any exception from the block as :class:`StageError`."""
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(run_index, name, exc) from exc


def policy_name(lam: float) -> str:
    """Name of the optimized policy with trade-off weight `lam`."""
    return POWER_ALLOCATION if lam == 0 else f"solution (lambda={lam:g})"


# Configuration

#: Attributes of ExperimentConfig and their location in the configuration document.
_OVERRIDES = {
    "n_runs": ("harness", "runs"),
    "master_seed": ("harness", "seed"),
    "lambdas": ("harness", "lambdas"),
    "price_mode": ("harness", "price_mode"),
    "workers": ("harness", "workers"),
    "resample_inflows": ("harness", "resample_inflows"),
    "charging_lambda": ("charging", "lambda"),
    "station_capacity_kw": ("charging", "station_capacity_kw"),
}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated contents of one experiment configuration document.

    Create with :meth:`from_file` or :meth:`from_dict`. Monetary values are in
    :attr:`currency.base <.Currency.base>`, except source unit costs, which stay in
    :attr:`source_currency`.
    """

    sources: Tuple[SourceSpec, ...]
    source_currency: str
    capacity: SystemCapacity
    demand: DemandProfile
    #: Keyword arguments for :func:`.pv_availability_profile`.
    pv: Mapping[str, Any]
    wind_profiles: Mapping[str, np.ndarray]
    wind_capacities: Mapping[str, float]
    #: Hydro parameters; see :func:`.ucp.build_instance`.
    hydro: Mapping[str, Any]
    #: Per tonne CO₂, in the base currency.
    carbon_price: float
    currency: Currency
    fleet: FleetParams
    #: Hourly prices per kWh in the base currency; columns "timestamp" and "price".
    price_history: pd.DataFrame
    price_floor: Optional[float] = 0.0
    horizon_hours: float = 24.0
    step_hours: float = 1.0
    charging_lambda: float = 10.0
    #: :obj:`None` for N × socket power.
    station_capacity_kw: Optional[float] = None
    lambdas: Tuple[float, ...] = (0.1, 1.0, 10.0)
    n_runs: int = 100
    master_seed: int = 0
    resample_inflows: bool = True
    price_mode: str = "sample"
    workers: int = 1
    #: The configuration document, with any overrides applied.
    data: Mapping = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        if self.n_runs < 1:
            raise ValueError(f"Need ≥ 1 run; got {self.n_runs}")
        if len(self.lambdas) == 0 or any(v < 0 for v in self.lambdas):
            raise ValueError(f"Need ≥ 1 λ value, all ≥ 0; got {self.lambdas}")
        if self.charging_lambda < 0:
            raise ValueError(f"λ must be ≥ 0; got {self.charging_lambda}")
        if self.price_mode not in ("sample", "mean"):
            raise ValueError(f"Unknown price mode {self.price_mode!r}")
        if len(self.demand) != self.n_steps:
            raise ValueError(
                f"Demand has {len(self.demand)} values; horizon has "
                f"{self.n_steps} steps"
            )
        if self.fleet.horizon_hours != self.horizon_hours:
            raise ValueError("Fleet and system horizons differ")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_hours / self.step_hours))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(load_yaml(path), base=path.parent)

    @classmethod
    def from_dict(
        cls, data: Mapping, base: Optional[Path] = None
    ) -> "ExperimentConfig":
        """Parse a configuration document.

        Data references that are bare names (e.g. ``vietnam_2023``) are package data;
        other references are paths relative to `base`.
        """
        base = base or package_data_path("experiment")
        system = data.get("system", {})
        currency = Currency.from_config(data.get("currency", {}))

        # Generation mix
        info = resolve_data("sources", system.get("sources", "vietnam_2023"), base)
        if isinstance(info, Path):
            info = load_yaml(info)
        sources = load_source_table(info)
        source_currency = info.get("currency", "VND")

        # Demand
        step_hours = float(system.get("step_hours", 1.0))
        info = resolve_data("demand", system.get("demand", "vietnam_2023"), base)
        if isinstance(info, Path):
            demand = hourly_demand_from_records(read_demand_csv(info))
        else:
            demand = DemandProfile(info["values"], float(info.get("step_hours", 1.0)))
        if demand.step_hours != step_hours:
            raise ValueError(
                f"Demand step {demand.step_hours} h ≠ system step {step_hours} h"
            )

        # Wind clusters
        wind = dict(system.get("wind", {}))
        info = resolve_data("wind", wind.pop("clusters", "vietnam_2023"), base)
        if isinstance(info, Path):
            wind_profiles, wind_capacities = read_wind_clusters(info)
        else:
            wind_profiles, wind_capacities = synthetic_wind_clusters(info, **wind)

        # Electricity prices
        prices = data.get("prices", {})
        info = resolve_data("prices", prices.get("source", "synthetic"), base)
        if isinstance(info, Path):
            history = read_price_csv(info)
            price_currency = prices.get("currency", currency.base)
        else:
            history = synthetic_price_history(info)
            price_currency = info.get("currency", currency.base)
        history = history.assign(
            price=currency.convert(history["price"], price_currency)
        )

        carbon = data.get("carbon_price", {})
        horizon = float(system.get("horizon_hours", 24))
        harness = data.get("harness", {})
        charging = data.get("charging", {})
        pv = dict(system.get("pv", {}))
        if "window" in pv:
            pv["window"] = tuple(pv["window"])

        return cls(
            sources=tuple(sources),
            source_currency=source_currency,
            capacity=SystemCapacity(float(system.get("capacity_mw", 46348))),
            demand=demand,
            pv=pv,
            wind_profiles=wind_profiles,
            wind_capacities=wind_capacities,
            hydro=dict(data.get("hydro", {})),
            carbon_price=currency.convert(
                float(carbon.get("value", 1785000)), carbon.get("currency", "VND")
            ),
            currency=currency,
            fleet=replace(
                FleetParams.from_config(data.get("fleet", {})), horizon_hours=horizon
            ),
            price_history=history,
            price_floor=prices.get("floor", 0.0),
            horizon_hours=horizon,
            step_hours=step_hours,
            charging_lambda=float(charging.get("lambda", 10.0)),
            station_capacity_kw=charging.get("station_capacity_kw"),
            lambdas=tuple(harness.get("lambdas", (0.1, 1.0, 10.0))),
            n_runs=int(harness.get("runs", 100)),
            master_seed=int(harness.get("seed", 0)),
            resample_inflows=bool(harness.get("resample_inflows", True)),
            price_mode=harness.get("price_mode", "sample"),
            workers=int(harness.get("workers", 1)),
            data=data,
        )

    def replace(self, **kwargs) -> "ExperimentConfig":
        """Return a copy with attributes changed, and the document updated to match."""
        data = json.loads(json.dumps(self.data, default=str))
        for name, value in kwargs.items():
            section, key = _OVERRIDES.get(name, (None, None))
            if section is None:
                raise ValueError(f"Cannot override {name!r}")
            data.setdefault(section, {})[key] = (
                list(value) if isinstance(value, (list, tuple)) else value
            )
        return replace(self, data=data, **kwargs)

    def hash(self) -> str:
        """SHA-256 of the canonical configuration document."""
        return config_hash(self.data)

    def price_model(self) -> PriceModel:
        return fit_price_model(
            self.price_history, step_hours=self.fleet.step_hours, floor=self.price_floor
        )


# Single runs


@dataclass
class RunInputs:
    """Everything one run schedules against, before any policy is applied."""

    run_index: int
    ucp: UcpInstance
    schedule: DispatchSchedule
    intensity: IntensitySeries
    emission_price: EmissionPriceSeries
    #: Carbon intensity on the fine grid, g CO₂/kWh.
    fine_intensity: np.ndarray
    fine_emission_price: np.ndarray
    fleet: List[EvSession]
    energy_price: np.ndarray
    station_capacity: np.ndarray
    socket_power: float
    step_hours: float

    def charging_instance(self, lam: float) -> ChargingInstance:
        return ChargingInstance(
            sessions=tuple(self.fleet),
            socket_power=self.socket_power,
            station_capacity=self.station_capacity,
            energy_price=self.energy_price,
            emission_price=self.fine_emission_price,
            lam=lam,
            step_hours=self.step_hours,
        )


def solve_dispatch(
    config: ExperimentConfig, run_index: int
) -> Tuple[UcpInstance, DispatchSchedule]:
    """Build and solve the unit commitment problem for `run_index`.

    Without ``config.resample_inflows``, every run uses the inflows of run 0.
    """
    with stage("ucp", run_index):
        inflow_run = run_index if config.resample_inflows else 0
        rng = random_stream(config.master_seed, inflow_run, "inflows")
        instance = build_instance(config, rng)
        return instance, solve_ucp(instance)


def prepare_run(
    config: ExperimentConfig,
    run_index: int,
    price_model: Optional[PriceModel] = None,
    dispatch: Optional[Tuple[UcpInstance, DispatchSchedule]] = None,
) -> RunInputs:
    """Execute the stages of one run that precede scheduling.

    Parameters
    ----------
    price_model : .PriceModel, optional
        Re-used if given; otherwise fitted to ``config.price_history``.
    dispatch : tuple, optional
        Solved unit commitment problem to re-use; otherwise solved for `run_index`.
    """
    instance, schedule = dispatch or solve_dispatch(config, run_index)
    fleet_params = config.fleet
    dt = fleet_params.step_hours

    with stage("emissions", run_index):
        intensity = carbon_intensity(schedule, instance.sources, instance.hydro)
        price = emission_price(intensity, config.carbon_price)
        fine_intensity = resample_hold(intensity, dt, config.step_hours)
        fine_price = resample_hold(price, dt, config.step_hours)

    with stage("fleet", run_index):
        rng = random_stream(config.master_seed, run_index, "fleet")
        fleet = sample_fleet(fleet_params, rng)

    with stage("prices", run_index):
        model = price_model or config.price_model()
        if config.price_mode == "mean":
            energy_price = model.mean.copy()
        else:
            rng = random_stream(config.master_seed, run_index, "prices")
            energy_price = sample_price_profile(model, rng)

    capacity = config.station_capacity_kw
    if capacity is None:
        capacity = fleet_params.n_evs * fleet_params.socket_power

    return RunInputs(
        run_index=run_index,
        ucp=instance,
        schedule=schedule,
        intensity=intensity,
        emission_price=price,
        fine_intensity=fine_intensity,
        fine_emission_price=fine_price,
        fleet=fleet,
        energy_price=energy_price,
        station_capacity=np.full(fleet_params.n_steps, float(capacity)),
        socket_power=fleet_params.socket_power,
        step_hours=dt,
    )


@dataclass
class RunReport:
    run_index: int
    #: Entropy of each random stream.
    seeds: Dict[str, List[int]]
    #: Policy name → metrics; optimized policies in order of :attr:`lambdas`, then
    #: "fifs".
    metrics: Dict[str, ScheduleMetrics]
    #: Policy name → λ of the optimized policies.
    lambdas: Dict[str, float]
    dispatch_cost: float
    energy_shares: Dict[str, float]
    #: Hourly carbon intensity, g CO₂/kWh.
    intensity: np.ndarray
    currency: str
    #: Data for per-run files, by file name; :obj:`None` once dropped.
    details: Optional[Dict[str, pd.DataFrame]] = field(default=None, repr=False)

    def as_dict(self) -> Dict[str, Any]:
        return dict(
            run_index=self.run_index,
            seeds=self.seeds,
            metrics={k: m.as_dict() for k, m in self.metrics.items()},
            lambdas=self.lambdas,
            dispatch_cost=self.dispatch_cost,
            energy_shares=self.energy_shares,
            intensity=self.intensity.tolist(),
            currency=self.currency,
        )

    def without_details(self) -> "RunReport":
        return replace(self, details=None)


def run_seeds(config: ExperimentConfig, run_index: int) -> Dict[str, List[int]]:
    """Entropy of the random streams used by `run_index`."""
    inflow_run = run_index if config.resample_inflows else 0
    return {
        tag: [
            int(v)
            for v in seed_sequence(
                config.master_seed, inflow_run if tag == "inflows" else run_index, tag
            ).entropy
        ]
        for tag in STREAMS
    }


def _slug(name: str) -> str:
    return re.sub(r"[^0-9a-zA-Z.]+", "_", name).strip("_")


def run_single(
    config: ExperimentConfig,
    run_index: int,
    price_model: Optional[PriceModel] = None,
    dispatch: Optional[Tuple[UcpInstance, DispatchSchedule]] = None,
    details: bool = True,
) -> RunReport:
    """Execute run `run_index` of the experiment described by `config`.

    All policies schedule the identical fleet and price profile.

    Raises
    ------
    StageError
        identifying the run and stage that failed.
    """
    inputs = prepare_run(config, run_index, price_model, dispatch)

    lambdas = {}
    for lam in list(config.lambdas) + [0.0]:
        lambdas.setdefault(policy_name(lam), lam)

    metrics, allocations = {}, {}
    with stage("charging", run_index):
        for name, lam in lambdas.items():
            instance = inputs.charging_instance(lam)
            alloc = solve_smart_charging(instance)
            alloc.check(instance)
            allocations[name] = (alloc, instance)

        instance = inputs.charging_instance(config.charging_lambda)
        alloc = fifs_schedule(instance)
        alloc.check(instance, demand=False)
        allocations[FIFS] = (alloc, instance)

    with stage("evaluate", run_index):
        for name, (alloc, instance) in allocations.items():
            metrics[name] = evaluate_schedule(alloc, instance, inputs.fine_intensity)

    fifs = metrics[FIFS]
    log.info(
        f"Run {run_index}: "
        + "; ".join(
            f"{name} {m.energy_cost:.2f}/{m.emission_mass:.1f} kg"
            for name, m in metrics.items()
        )
    )
    if fifs.shortfall > 0:
        log.info(f"Run {run_index}: FIFS leaves {fifs.shortfall:.3f} kWh undelivered")

    report = RunReport(
        run_index=run_index,
        seeds=run_seeds(config, run_index),
        metrics=metrics,
        lambdas=lambdas,
        dispatch_cost=inputs.schedule.total_cost,
        energy_shares=inputs.schedule.energy_shares(),
        intensity=inputs.intensity.values,
        currency=config.currency.base,
    )

    if details:
        report.details = _details(inputs, allocations)

    return report


def _details(
    inputs: RunInputs, allocations: Mapping[str, Tuple[AllocationMatrix, Any]]
) -> Dict[str, pd.DataFrame]:
    fifs_instance = allocations[FIFS][1]
    load_price = pd.DataFrame(
        {
            "step": np.arange(len(inputs.energy_price)),
            "hour": np.arange(len(inputs.energy_price)) * inputs.step_hours,
            "energy_price": inputs.energy_price,
            "emission_price": inputs.fine_emission_price,
            "intensity_g_per_kwh": inputs.fine_intensity,
        }
    )
    result = {}
    for name, (alloc, _) in allocations.items():
        load_price[f"load_kw_{_slug(name)}"] = alloc.load()
        result[f"allocation_{_slug(name)}.csv"] = alloc.to_frame()
    result["load_price.csv"] = load_price
    result["dispatch.csv"] = inputs.schedule.to_frame()
    result["hydro.csv"] = inputs.schedule.hydro_frame()
    result["emissions.csv"] = emission_frame(inputs.intensity, inputs.emission_price)
    result["fleet.csv"] = pd.DataFrame(
        [(s.id, s.arrival, s.departure, s.demand) for s in fifs_instance.sessions],
        columns=["ev_id", "arrival_step", "departure_step", "demand_kwh"],
    )
    return result


# Monte Carlo


@dataclass
class SummaryStats:
    """Statistics of K runs, one row per policy.

    :attr:`table` has the columns ``mean_cost``, ``sd_cost``, ``min_cost``,
    ``max_cost``, the same four for ``emissions_kg``, plus ``delta_cost_vs_fifs`` and
    ``delta_emissions_vs_fifs``: the mean over runs of ``(FIFS − policy) / FIFS``.
    Standard deviations are population values, zero for K = 1.
    """

    table: pd.DataFrame
    n_runs: int
    currency: str
    reports: List[RunReport] = field(default_factory=list, repr=False)

    @classmethod
    def from_reports(cls, reports: Sequence[RunReport]) -> "SummaryStats":
        reports = sorted(reports, key=lambda r: r.run_index)
        if len(reports) == 0:
            raise ValueError("No run reports")

        policies = list(reports[0].metrics)
        rows = []
        for name in policies:
            cost = np.array([r.metrics[name].energy_cost for r in reports])
            mass = np.array([r.metrics[name].emission_mass for r in reports])
            fifs_cost = np.array([r.metrics[FIFS].energy_cost for r in reports])
            fifs_mass = np.array([r.metrics[FIFS].emission_mass for r in reports])
            rows.append(
                dict(
                    policy=name,
                    mean_cost=cost.mean(),
                    sd_cost=cost.std(ddof=0),
                    min_cost=cost.min(),
                    max_cost=cost.max(),
                    mean_emissions_kg=mass.mean(),
                    sd_emissions_kg=mass.std(ddof=0),
                    min_emissions_kg=mass.min(),
                    max_emissions_kg=mass.max(),
                    delta_cost_vs_fifs=_relative_reduction(fifs_cost, cost).mean(),
                    delta_emissions_vs_fifs=_relative_reduction(fifs_mass, mass).mean(),
                )
            )

        return cls(
            table=pd.DataFrame(rows).set_index("policy"),
            n_runs=len(reports),
            currency=reports[0].currency,
            reports=list(reports),
        )

    def as_dict(self) -> Dict[str, Any]:
        return dict(
            n_runs=self.n_runs,
            currency=self.currency,
            policies={
                name: {k: float(v) for k, v in row.items()}
                for name, row in self.table.iterrows()
            },
        )


def _relative_reduction(reference: np.ndarray, value: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(reference != 0, (reference - value) / reference, 0.0)


def compare_to_fifs(report: RunReport) -> pd.DataFrame:
    """Relative reduction of cost and emissions of each policy in one run, vs. FIFS."""
    fifs = report.metrics[FIFS]
    rows = [
        dict(
            policy=name,
            cost_reduction=float(
                _relative_reduction(np.array(fifs.energy_cost), np.array(m.energy_cost))
            ),
            emission_reduction=float(
                _relative_reduction(
                    np.array(fifs.emission_mass), np.array(m.emission_mass)
                )
            ),
        )
        for name, m in report.metrics.items()
        if name != FIFS
    ]
    return pd.DataFrame(rows).set_index("policy")


def _run_task(args) -> RunReport:
    config, run_index, price_model, dispatch = args
    return run_single(
        config, run_index, price_model, dispatch, details=(run_index == 0)
    )


def run_monte_carlo(
    config: ExperimentConfig, workers: Optional[int] = None
) -> SummaryStats:
    """Execute ``config.n_runs`` runs and aggregate them.

    The price model is fitted once. The unit commitment problem is solved for every run
    if ``config.resample_inflows``, otherwise once. Per-run files are kept for run 0
    only.

    Raises
    ------
    StageError
        for the first failed run.
    """
    workers = workers or config.workers
    with stage("prices", -1):
        price_model = config.price_model()
    dispatch = None if config.resample_inflows else solve_dispatch(config, 0)

    tasks = [(config, i, price_model, dispatch) for i in range(config.n_runs)]
    log.info(f"{config.n_runs} runs with {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            reports = list(executor.map(_run_task, tasks))
    else:
        reports = [_run_task(t) for t in tasks]

    return SummaryStats.from_reports(reports)


# Outputs


def _write_csv(df: pd.DataFrame, path: Path, **kwargs) -> None:
    try:
        df.to_csv(path, **kwargs)
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e}") from e


def _write_json(data: Any, path: Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e}") from e


def manifest(config: ExperimentConfig, run_indices: Sequence[int]) -> Dict[str, Any]:
    """Reproducibility information: configuration hash, seeds, version and rates."""
    from gridcharge import __version__

    return dict(
        config_sha256=config.hash(),
        master_seed=config.master_seed,
        n_runs=config.n_runs,
        lambdas=list(config.lambdas),
        price_mode=config.price_mode,
        resample_inflows=config.resample_inflows,
        seeds={str(i): run_seeds(config, i) for i in run_indices},
        version=__version__,
        currency=config.currency.as_dict(),
    )


def emit_outputs(
    result: Union[RunReport, SummaryStats],
    out_dir: Path,
    formats: Sequence[str] = ("csv", "json"),
    config: Optional[ExperimentConfig] = None,
) -> List[Path]:
    """Write `result` to files in `out_dir`; return their paths.

    For :class:`SummaryStats`, :file:`summary.csv` and/or :file:`summary.json` and the
    per-run files of any report that kept them (in :file:`run_{index}/`). For a
    :class:`RunReport`, :file:`metrics.csv`/:file:`metrics.json` and its per-run files.
    With `config`, also :file:`manifest.json`. Data files contain no timestamps.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Cannot create {out_dir}: {e}") from e
    written = []

    if isinstance(result, SummaryStats):
        reports = result.reports
        if "csv" in formats:
            path = out_dir / "summary.csv"
            _write_csv(result.table.reset_index()[SUMMARY_COLUMNS], path, index=False)
            written.append(path)
        if "json" in formats:
            path = out_dir / "summary.json"
            _write_json(result.as_dict(), path)
            written.append(path)
    else:
        reports = [result]
        table = pd.DataFrame(
            {name: m.as_dict() for name, m in result.metrics.items()}
        ).T.rename_axis("policy")
        if "csv" in formats:
            path = out_dir / "metrics.csv"
            _write_csv(table.reset_index(), path, index=False)
            written.append(path)
        if "json" in formats:
            path = out_dir / "metrics.json"
            _write_json(result.as_dict(), path)
            written.append(path)

    for report in reports:
        if not report.details:
            continue
        run_dir = out_dir / f"run_{report.run_index:03d}"
        run_dir.mkdir(exist_ok=True)
        for name, df in sorted(report.details.items()):
            _write_csv(df, run_dir / name, index=False)
            written.append(run_dir / name)

    if config is not None:
        path = out_dir / "manifest.json"
        _write_json(manifest(config, [r.run_index for r in reports]), path)
        written.append(path)

    log.info(f"Wrote {len(written)} file(s) to {out_dir}")
    return written


# Command-line interface


@click.command(name="montecarlo")
@common_params("lambdas out price_mode runs seed workers")
@click.pass_obj
def cli(context, lambdas, out, price_mode, runs, seed, workers):
    """Monte Carlo comparison of smart charging policies with FIFS.

    Writes summary.csv, summary.json, manifest.json, the files of run 0 and the log
    of the experiment, montecarlo.log, to --out.
    """
    config = context.get_config()
    overrides = dict(
        lambdas=lambdas, price_mode=price_mode, n_runs=runs, master_seed=seed
    )
    config = config.replace(**{k: v for k, v in overrides.items() if v is not None})

    with log_file(Path(out, "montecarlo.log")):
        log.info(f"Configuration {config.hash()} from {context.config_path}")
        stats = run_monte_carlo(config, workers=workers)
        emit_outputs(stats, Path(out), config=config)

        with pd.option_context("display.width", 120, "display.max_columns", 20):
            log.info(
                f"Summary of {stats.n_runs} run(s), {stats.currency}:\n{stats.table}"
            )
