"""Linear unit commitment with one hydro reservoir.

The problem chooses, for every hour t, the power x_tj of each non-hydro source j and
the volume of water v_t^hydro released through the turbines, to cover demand D_t at
least cost:

- Non-hydro power costs c_j per kWh; released water costs ω per m³.
- The reservoir volume follows ``v_t = v_{t−1} − v_t^hydro + f_t`` and stays within
  [v_min, v_max].
- Released water yields ``(ρ/Δ)·v_t^hydro`` MW.

Unit costs given per kWh are converted to per MWh when the problem is built. There is no
condition on the final reservoir volume.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Mapping, Optional, Tuple

import click
import numpy as np
import pandas as pd

from gridcharge.model.lp_core import LPBuilder, LPStatus, StandardFormLP, solve_lp
from gridcharge.model.power_system_data import (
    Availability,
    AvailabilityProfile,
    DemandProfile,
    SourceSpec,
    SystemCapacity,
    build_availability,
    hydro_source,
    pv_availability_profile,
    wind_availability_profile,
)
from gridcharge.util import as_float_array, random_stream
from gridcharge.util.click import common_params
from gridcharge.util.units import Q

if TYPE_CHECKING:  # pragma: no cover
    from gridcharge.harness import ExperimentConfig

log = logging.getLogger(__name__)


class InfeasibleDemand(ValueError):
    """Demand cannot be covered at some hour."""

    def __init__(self, message: str, hour: Optional[int] = None):
        self.hour = hour
        super().__init__(message)


def _rho(eta: float, water_density: float, gravity: float, head: float) -> float:
    """Energy per volume of water falling through `head`, MWh/m³."""
    energy = eta * Q(water_density, "kg/m**3") * Q(gravity, "m/s**2") * Q(head, "m")
    return energy.to("MWh/m**3").m


@dataclass(frozen=True)
class HydroSystem:
    """Reservoir and turbine parameters.

    Attributes
    ----------
    eta : float
        Turbine efficiency.
    water_density : float
        kg/m³.
    gravity : float
        m/s².
    head : float
        Effective head, m.
    unit_cost : float
        Value of hydro energy per kWh, in the currency of the source table; basis of
        :attr:`omega`.
    v0, v_min, v_max : float
        Initial, minimum and maximum reservoir volume, m³.
    emission_rate : float
        g CO₂ per kWh.
    power_cap : float, optional
        Maximum instantaneous hydro power, MW. :obj:`None` for no limit other than the
        available water.
    """

    eta: float
    water_density: float
    gravity: float
    head: float
    unit_cost: float
    v0: float
    v_min: float
    v_max: float
    emission_rate: float = 24.0
    power_cap: Optional[float] = None

    def __post_init__(self):
        for name in ("eta", "water_density", "gravity", "head"):
            if not getattr(self, name) > 0:
                raise ValueError(f"Hydro parameter {name} must be > 0")
        if self.unit_cost < 0 or self.emission_rate < 0:
            raise ValueError("Hydro unit cost and emission rate must be ≥ 0")
        if not 0 <= self.v_min <= self.v0 <= self.v_max:
            raise ValueError(
                f"Need 0 ≤ v_min ≤ v0 ≤ v_max; got {self.v_min}, {self.v0}, "
                f"{self.v_max}"
            )
        if self.power_cap is not None and self.power_cap < 0:
            raise ValueError(f"Negative hydro power cap {self.power_cap}")

    @property
    def rho(self) -> float:
        """Energy per volume of released water, MWh/m³."""
        return _rho(self.eta, self.water_density, self.gravity, self.head)

    @property
    def omega(self) -> float:
        """Cost per m³ of released water."""
        return (Q(self.unit_cost, "1/kWh") * Q(self.rho, "MWh/m**3")).to("m**-3").m


def default_hydro(
    capacity: SystemCapacity,
    T: int,
    hydro_share: float,
    hydro_cost: float = 1128.0,
    *,
    step_hours: float = 1.0,
    eta: float = 0.85,
    water_density: float = 1000.0,
    gravity: float = 9.81,
    head: float = 80.0,
    v_min_factor: float = 0.7,
    v_max_factor: float = 2.0,
    emission_rate: float = 24.0,
    power_cap: bool = True,
) -> HydroSystem:
    """Return a reservoir sized to the hydro share of the generation mix.

    The initial volume v0 is the water that yields ``hydro_share × p_max`` over the
    horizon; ``v_min = v_min_factor × v0`` and ``v_max = v_max_factor × v0``. With
    `power_cap`, instantaneous hydro power is limited to ``hydro_share × p_max``.
    """
    if not 0 < hydro_share <= 1:
        raise ValueError(f"Hydro share must be in (0, 1]; got {hydro_share}")
    if T <= 0 or step_hours <= 0:
        raise ValueError(f"Need T > 0 and step_hours > 0; got {T}, {step_hours}")
    if not 0 < v_min_factor <= 1 <= v_max_factor:
        raise ValueError(
            f"Need 0 < v_min_factor ≤ 1 ≤ v_max_factor; got {v_min_factor}, "
            f"{v_max_factor}"
        )

    rho = _rho(eta, water_density, gravity, head)
    v0 = hydro_share * capacity.p_max * T * step_hours / rho

    return HydroSystem(
        eta=eta,
        water_density=water_density,
        gravity=gravity,
        head=head,
        unit_cost=hydro_cost,
        v0=v0,
        v_min=v_min_factor * v0,
        v_max=v_max_factor * v0,
        emission_rate=emission_rate,
        power_cap=hydro_share * capacity.p_max if power_cap else None,
    )


def sample_inflows(
    hydro: HydroSystem, T: int, rng: np.random.Generator, fraction: float = 0.01
) -> np.ndarray:
    """Draw `T` independent inflows, uniform on [0, fraction × v0] m³."""
    return rng.uniform(0.0, fraction * hydro.v0, size=T)


@dataclass(frozen=True)
class UcpInstance:
    demand: DemandProfile
    #: Full source table, including the hydro source.
    sources: Tuple[SourceSpec, ...]
    #: Availability for every non-hydro source.
    availability: Mapping[str, AvailabilityProfile]
    hydro: HydroSystem
    #: Inflow f_t per step, m³.
    inflows: np.ndarray
    step_hours: float = 1.0
    #: Currency of the source unit costs.
    currency: str = "VND"

    def __post_init__(self):
        T = len(self.demand)
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(
            self, "inflows", as_float_array(self.inflows, "inflows", length=T)
        )
        if np.any(self.inflows < 0):
            raise ValueError("Negative inflow")
        if T == 0:
            raise ValueError("Empty horizon")
        for spec in self.thermal:
            try:
                n = len(self.availability[spec.name])
            except KeyError:
                raise ValueError(f"No availability for source {spec.name!r}") from None
            if n != T:
                raise ValueError(f"{spec.name}: availability length {n} ≠ {T}")

    @property
    def T(self) -> int:
        return len(self.demand)

    @property
    def thermal(self) -> List[SourceSpec]:
        """Non-hydro sources, in table order."""
        hydro = Availability.hydro
        return [s for s in self.sources if s.availability_kind is not hydro]

    @property
    def hydro_spec(self) -> SourceSpec:
        return hydro_source(self.sources)

    def caps(self) -> np.ndarray:
        """T × (non-hydro sources) matrix of availability, MW."""
        columns = [self.availability[s.name].caps for s in self.thermal]
        return np.column_stack(columns) if columns else np.zeros((self.T, 0))

    def max_hydro_power(self) -> np.ndarray:
        """Upper bound on hydro power at each step, MW."""
        h = self.hydro
        water = h.v0 - h.v_min + np.cumsum(self.inflows)
        result = h.rho / self.step_hours * water
        if h.power_cap is not None:
            result = np.minimum(result, h.power_cap)
        return result


@dataclass(frozen=True)
class DispatchSchedule:
    #: T × (non-hydro sources) power, MW.
    power: np.ndarray
    #: Names of the columns of :attr:`power`.
    sources: Tuple[str, ...]
    #: Released water per step, m³.
    hydro_water: np.ndarray
    #: Reservoir volume at the end of each step, m³.
    reservoir: np.ndarray
    total_cost: float
    rho: float
    step_hours: float = 1.0
    hydro_name: str = "hydro"

    @property
    def T(self) -> int:
        return len(self.hydro_water)

    def hydro_power(self) -> np.ndarray:
        """Hydro power per step, MW."""
        return self.rho / self.step_hours * self.hydro_water

    def generation(self, source: str) -> np.ndarray:
        """Power of `source` per step, MW."""
        if source == self.hydro_name:
            return self.hydro_power()
        return self.power[:, self.sources.index(source)]

    def energy_shares(self) -> Dict[str, float]:
        """Share of total generated energy by source, hydro included."""
        energy = dict(zip(self.sources, self.power.sum(axis=0) * self.step_hours))
        energy[self.hydro_name] = float(self.hydro_water.sum() * self.rho)
        total = sum(energy.values())
        return {k: (float(v) / total if total > 0 else 0.0) for k, v in energy.items()}

    def to_frame(self) -> pd.DataFrame:
        """Long data with columns ``hour,source,power_mw``, hydro included."""
        names = list(self.sources) + [self.hydro_name]
        values = np.column_stack([self.power, self.hydro_power()])
        hours = np.arange(self.T) * self.step_hours
        return pd.DataFrame(
            {
                "hour": np.repeat(hours, len(names)),
                "source": names * self.T,
                "power_mw": values.reshape(-1),
            }
        )

    def hydro_frame(self) -> pd.DataFrame:
        """Data with columns ``hour,hydro_water_m3,reservoir_m3``."""
        return pd.DataFrame(
            {
                "hour": np.arange(self.T) * self.step_hours,
                "hydro_water_m3": self.hydro_water,
                "reservoir_m3": self.reservoir,
            }
        )


def _labels(instance: UcpInstance):
    x = [[f"x[{t},{s.name}]" for s in instance.thermal] for t in range(instance.T)]
    vh = [f"v_hydro[{t}]" for t in range(instance.T)]
    v = [f"v[{t}]" for t in range(instance.T)]
    return x, vh, v


def build_ucp(instance: UcpInstance) -> StandardFormLP:
    """Build the linear program for `instance`.

    Variables are x[t,j] for every non-hydro source, v_hydro[t] and v[t]. Constraint
    rows, per step:

    - ``release_cap[t]``: v_hydro[t] ≤ v[t−1] + f_t − v_min
    - ``release_floor[t]``: v_hydro[t] ≥ v[t−1] + f_t − v_max
    - ``flow[t]``: v[t] = v[t−1] − v_hydro[t] + f_t
    - ``demand[t]``: Σ_j x[t,j] + (ρ/Δ)·v_hydro[t] ≥ D_t
    - ``hydro_cap[t]``: (ρ/Δ)·v_hydro[t] ≤ power cap, if the hydro system has one.

    Availability caps are the upper bounds of x[t,j].
    """
    h = instance.hydro
    dt = instance.step_hours
    f = instance.inflows
    caps = instance.caps()
    x_label, vh_label, v_label = _labels(instance)

    # Cost of 1 MW over one step
    cost = [
        (Q(s.unit_cost, "1/kWh") * Q(dt, "MW h")).to("dimensionless").m
        for s in instance.thermal
    ]

    lp = LPBuilder()
    x = [
        [
            lp.add_variable(x_label[t][j], cost=cost[j], hi=caps[t, j])
            for j in range(len(instance.thermal))
        ]
        for t in range(instance.T)
    ]
    vh = [
        lp.add_variable(vh_label[t], cost=h.omega, hi=h.v_max - h.v_min + f[t])
        for t in range(instance.T)
    ]
    v = [
        lp.add_variable(v_label[t], lo=h.v_min, hi=h.v_max) for t in range(instance.T)
    ]

    for t in range(instance.T):
        # Previous volume: a variable, or the constant v0
        prev, v_prev = ({v[t - 1]: -1.0}, 0.0) if t > 0 else ({}, h.v0)

        lp.add_row(
            {vh[t]: 1.0, **prev}, "<=", v_prev + f[t] - h.v_min, f"release_cap[{t}]"
        )
        lp.add_row(
            {vh[t]: 1.0, **prev}, ">=", v_prev + f[t] - h.v_max, f"release_floor[{t}]"
        )
        lp.add_row({v[t]: 1.0, vh[t]: 1.0, **prev}, "==", v_prev + f[t], f"flow[{t}]")
        lp.add_row(
            {**{j: 1.0 for j in x[t]}, vh[t]: h.rho / dt},
            ">=",
            instance.demand.values[t],
            f"demand[{t}]",
        )
        if h.power_cap is not None:
            lp.add_row({vh[t]: h.rho / dt}, "<=", h.power_cap, f"hydro_cap[{t}]")

    return lp.build()


def check_demand(instance: UcpInstance) -> None:
    """Raise :class:`InfeasibleDemand` at the first step demand exceeds availability."""
    available = instance.caps().sum(axis=1) + instance.max_hydro_power()
    short = np.flatnonzero(instance.demand.values > available * (1 + 1e-9))
    if len(short):
        t = int(short[0])
        raise InfeasibleDemand(
            f"Demand {instance.demand.values[t]:.1f} MW at hour {t} exceeds available "
            f"power {available[t]:.1f} MW",
            hour=t,
        )


def solve_ucp(instance: UcpInstance) -> DispatchSchedule:
    """Solve the unit commitment problem for `instance`.

    Raises
    ------
    InfeasibleDemand
        if demand exceeds available power at some hour, or the solver finds the problem
        infeasible.
    RuntimeError
        if the solver fails.
    """
    check_demand(instance)

    problem = build_ucp(instance)
    solution = solve_lp(problem)

    if solution.status is LPStatus.INFEASIBLE:
        raise InfeasibleDemand("Unit commitment problem is infeasible")
    elif not solution.optimal:
        raise RuntimeError(f"Unit commitment solve {solution.status.value}")

    T, J = instance.T, len(instance.thermal)
    z = solution.values
    schedule = DispatchSchedule(
        power=z[: T * J].reshape(T, J),
        sources=tuple(s.name for s in instance.thermal),
        hydro_water=z[T * J : T * J + T],
        reservoir=z[T * J + T :],
        total_cost=solution.objective_value,
        rho=instance.hydro.rho,
        step_hours=instance.step_hours,
        hydro_name=instance.hydro_spec.name,
    )

    log.info(
        f"Dispatch cost {schedule.total_cost:.6g} {instance.currency} after "
        f"{solution.iterations} pivots"
    )
    log.debug(
        "Energy shares: "
        + ", ".join(f"{k} {v:.3f}" for k, v in schedule.energy_shares().items())
    )

    return schedule


def build_instance(
    config: "ExperimentConfig", rng: Optional[np.random.Generator] = None
) -> UcpInstance:
    """Assemble the :class:`UcpInstance` described by `config`.

    Sources with profile availability are matched by name: "pv" uses the Gaussian
    daylight curve and "wind" the aggregated wind clusters. If `rng` is given, inflows
    are sampled with :func:`sample_inflows`; otherwise they are zero.
    """
    sources = config.sources
    p_max = config.capacity.p_max
    dt = config.step_hours
    T = config.n_steps
    shares = {s.name: s.mix_share for s in sources}

    profiles = {}
    if "pv" in shares:
        profiles["pv"] = pv_availability_profile(
            daily_energy_budget=shares["pv"] * p_max * config.horizon_hours,
            step_hours=dt,
            horizon_hours=config.horizon_hours,
            **config.pv,
        )
    if "wind" in shares:
        profiles["wind"] = wind_availability_profile(
            config.wind_profiles,
            config.wind_capacities,
            annual_energy_budget=shares["wind"] * p_max * 8760,
        )
        if dt != 1.0:
            # Hourly profile to model steps
            hours = (np.arange(T) * dt).astype(int)
            profiles["wind"] = AvailabilityProfile(
                "wind", profiles["wind"].caps[hours]
            )

    params = dict(config.hydro)
    hydro_cost = params.pop("unit_cost_for_water", None)
    fraction = params.pop("inflow_fraction", 0.01)
    spec = hydro_source(sources)
    hydro = default_hydro(
        config.capacity,
        T,
        spec.mix_share,
        spec.unit_cost if hydro_cost is None else hydro_cost,
        step_hours=dt,
        emission_rate=spec.emission_rate,
        **params,
    )

    inflows = np.zeros(T) if rng is None else sample_inflows(hydro, T, rng, fraction)

    return UcpInstance(
        demand=config.demand,
        sources=tuple(sources),
        availability=build_availability(sources, config.capacity, T, profiles),
        hydro=hydro,
        inflows=inflows,
        step_hours=dt,
        currency=config.source_currency,
    )


def write_dispatch(
    schedule: DispatchSchedule, out_dir: Path, extra: Optional[Dict] = None
) -> None:
    """Write :file:`dispatch.csv`, :file:`hydro.csv` and :file:`dispatch.json`."""
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule.to_frame().to_csv(out_dir / "dispatch.csv", index=False)
    schedule.hydro_frame().to_csv(out_dir / "hydro.csv", index=False)

    summary = dict(total_cost=schedule.total_cost, shares=schedule.energy_shares())
    summary.update(extra or {})
    with open(out_dir / "dispatch.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")


# Command-line interface


@click.command(name="ucp")
@common_params("out seed")
@click.pass_obj
def cli(context, out, seed):
    """Solve the unit commitment problem and write the dispatch schedule.

    Writes dispatch.csv, hydro.csv, dispatch.json and emissions.csv to --out.
    """
    from gridcharge.model.emissions import (
        carbon_intensity,
        emission_frame,
        emission_price,
    )

    config = context.get_config()
    if seed is None:
        seed = config.master_seed

    instance = build_instance(config, random_stream(seed, 0, "inflows"))
    schedule = solve_ucp(instance)

    intensity = carbon_intensity(schedule, instance.sources, instance.hydro)
    price = emission_price(intensity, config.carbon_price)

    out = Path(out)
    write_dispatch(
        schedule, out, dict(currency=instance.currency, seed=seed, run_index=0)
    )
    emission_frame(intensity, price).to_csv(out / "emissions.csv", index=False)

    log.info(f"Wrote dispatch and emissions to {out}")
