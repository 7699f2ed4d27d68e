"""Emissions-aware smart charging of an EV fleet.

On a fine time grid of step δ hours, the scheduler chooses the power Y_ti delivered to
each vehicle i at each step t to minimize

    Σ_t (π_t + λ·π^CO₂_t) · δ · Σ_i Y_ti

subject to:

- each vehicle receives at least its requested energy L_i within its window [a_i, d_i),
- ``0 ≤ Y_ti ≤ p⁻`` (socket power), and ``Y_ti = 0`` outside the window, and
- ``Σ_i Y_ti ≤ C_t`` (station capacity).

The cost-only schedule is the case λ = 0. :func:`fifs_schedule` gives the
first-in-first-served baseline.
"""
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import click
import numpy as np
import pandas as pd

from gridcharge.model.emissions import IntensitySeries
from gridcharge.model.lp_core import LPBuilder, LPStatus, StandardFormLP, solve_lp
from gridcharge.util import as_float_array
from gridcharge.util.click import common_params
from gridcharge.util.units import Q

log = logging.getLogger(__name__)

#: Relative tolerance for energy and capacity comparisons.
TOL = 1e-9


class InfeasibleSession(ValueError):
    """A vehicle cannot receive its demand within its window at socket power."""

    def __init__(self, message: str, session_id=None):
        self.session_id = session_id
        super().__init__(message)


class CapacityExceeded(ValueError):
    """Station capacity cannot serve the aggregate demand."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        super().__init__(message)


@dataclass(frozen=True)
class EvSession:
    """One vehicle visit: present for fine steps ``arrival ≤ t < departure``."""

    id: int
    arrival: int
    departure: int
    #: Requested energy, kWh.
    demand: float

    def __post_init__(self):
        if not 0 <= self.arrival <= self.departure:
            raise ValueError(
                f"EV {self.id}: need 0 ≤ arrival ≤ departure; got {self.arrival}, "
                f"{self.departure}"
            )
        if not self.demand >= 0:
            raise ValueError(f"EV {self.id}: negative demand {self.demand}")

    @property
    def steps(self) -> int:
        return self.departure - self.arrival


@dataclass(frozen=True)
class ChargingInstance:
    sessions: Tuple[EvSession, ...]
    #: Socket power p⁻, kW.
    socket_power: float
    #: Station capacity C_t per step, kW.
    station_capacity: np.ndarray
    #: Energy price π_t per step, currency/kWh.
    energy_price: np.ndarray
    #: Emission price π^CO₂_t per step, currency/kWh.
    emission_price: np.ndarray
    lam: float = 10.0
    #: Fine step δ, hours.
    step_hours: float = 1 / 6

    def __post_init__(self):
        object.__setattr__(self, "sessions", tuple(self.sessions))
        T = len(self.energy_price)
        for name in ("station_capacity", "energy_price", "emission_price"):
            object.__setattr__(
                self, name, as_float_array(getattr(self, name), name, length=T)
            )
        if not self.socket_power > 0:
            raise ValueError(f"Socket power must be > 0; got {self.socket_power}")
        if not self.step_hours > 0:
            raise ValueError(f"Step must be > 0; got {self.step_hours}")
        if self.lam < 0:
            raise ValueError(f"λ must be ≥ 0; got {self.lam}")
        if np.any(self.station_capacity < 0):
            raise ValueError("Negative station capacity")
        ids = [s.id for s in self.sessions]
        if len(set(ids)) != len(ids):
            raise ValueError("Duplicate session id")
        for s in self.sessions:
            if s.departure > T:
                raise ValueError(f"EV {s.id}: departure {s.departure} beyond {T} steps")

    @property
    def T(self) -> int:
        return len(self.energy_price)

    @property
    def N(self) -> int:
        return len(self.sessions)

    @property
    def effective_price(self) -> np.ndarray:
        """π_t + λ·π^CO₂_t."""
        return self.energy_price + self.lam * self.emission_price

    def with_lambda(self, lam: float) -> "ChargingInstance":
        return replace(self, lam=lam)

    def presence(self) -> np.ndarray:
        """T × N boolean matrix: vehicle i is present at step t."""
        t = np.arange(self.T)[:, None]
        a = np.array([s.arrival for s in self.sessions], dtype=int)
        d = np.array([s.departure for s in self.sessions], dtype=int)
        return (t >= a) & (t < d)


@dataclass(frozen=True)
class AllocationMatrix:
    #: T × N power, kW.
    power: np.ndarray
    session_ids: Tuple[int, ...]

    def load(self) -> np.ndarray:
        """Total station load per step, kW."""
        return self.power.sum(axis=1)

    def delivered(self, step_hours: float) -> np.ndarray:
        """Energy delivered to each vehicle, kWh."""
        return self.power.sum(axis=0) * step_hours

    def check(self, instance: ChargingInstance, demand: bool = True) -> None:
        """Raise :class:`ValueError` if the allocation violates `instance`.

        Checks the socket bound, window exclusivity and station capacity and, if
        `demand` is :obj:`True`, that every vehicle receives its demand.
        """
        Y = self.power
        if Y.shape != (instance.T, instance.N):
            expected = (instance.T, instance.N)
            raise ValueError(f"Allocation shape {Y.shape} ≠ {expected}")
        p = instance.socket_power
        if np.any(Y < -TOL * p) or np.any(Y > p * (1 + TOL)):
            raise ValueError("Allocation outside [0, socket power]")
        if np.any(Y[~instance.presence()] != 0):
            raise ValueError("Power allocated outside a charging window")
        load = self.load()
        over = np.flatnonzero(load > instance.station_capacity + TOL * max(1.0, p))
        if len(over):
            raise ValueError(f"Station capacity exceeded at step {over[0]}")
        if demand:
            got = self.delivered(instance.step_hours)
            for s, e in zip(instance.sessions, got):
                if e < s.demand - 1e-6 * max(1.0, s.demand):
                    raise ValueError(f"EV {s.id}: {e:.6g} of {s.demand:.6g} kWh")

    def to_frame(self) -> pd.DataFrame:
        """Long data with columns ``step,ev_id,power_kw``."""
        T, N = self.power.shape
        return pd.DataFrame(
            {
                "step": np.repeat(np.arange(T), N),
                "ev_id": np.tile(np.array(self.session_ids, dtype=int), T),
                "power_kw": self.power.reshape(-1),
            }
        )


@dataclass(frozen=True)
class ScheduleMetrics:
    """Cost and emissions of one allocation.

    Attributes
    ----------
    energy_cost : float
        Σ_t π_t·δ·load_t, currency.
    emission_mass : float
        kg CO₂.
    emission_cost : float
        Σ_t π^CO₂_t·δ·load_t, currency.
    total_objective : float
        ``energy_cost + λ·emission_cost`` at the λ of the instance.
    per_step_load : numpy.ndarray
        kW.
    energy_delivered : float
        kWh.
    shortfall : float
        Requested energy not delivered, kWh.
    """

    energy_cost: float
    emission_mass: float
    emission_cost: float
    total_objective: float
    per_step_load: np.ndarray
    energy_delivered: float = 0.0
    shortfall: float = 0.0

    def objective_at(self, lam: float) -> float:
        """The objective of the same allocation at trade-off weight `lam`."""
        return self.energy_cost + lam * self.emission_cost

    def as_dict(self) -> Dict[str, float]:
        return dict(
            energy_cost=self.energy_cost,
            emission_mass_kg=self.emission_mass,
            emission_cost=self.emission_cost,
            total_objective=self.total_objective,
            energy_delivered_kwh=self.energy_delivered,
            shortfall_kwh=self.shortfall,
        )


def check_sessions(instance: ChargingInstance) -> None:
    """Raise :class:`InfeasibleSession` for the first vehicle whose window is too
    short."""
    p, dt = instance.socket_power, instance.step_hours
    for s in instance.sessions:
        limit = p * dt * s.steps
        if s.demand > limit * (1 + TOL) + TOL:
            raise InfeasibleSession(
                f"EV {s.id} requests {s.demand:.6g} kWh; at most {limit:.6g} kWh in "
                f"steps [{s.arrival}, {s.departure})",
                session_id=s.id,
            )


def check_capacity(instance: ChargingInstance) -> None:
    """Raise :class:`CapacityExceeded` at the first step where the energy due by then
    exceeds what the station can have delivered."""
    dt = instance.step_hours
    deliverable = np.minimum(
        instance.station_capacity,
        instance.presence().sum(axis=1) * instance.socket_power,
    )
    due = np.zeros(instance.T)
    for s in instance.sessions:
        if s.departure > 0:
            due[s.departure - 1] += s.demand
    excess = np.cumsum(due) - np.cumsum(deliverable) * dt
    over = np.flatnonzero(excess > TOL * max(1.0, due.sum()))
    if len(over):
        t = int(over[0])
        raise CapacityExceeded(
            f"Demand due by step {t} exceeds station capacity by {excess[t]:.6g} kWh",
            step=t,
        )


def capacity_slack(instance: ChargingInstance) -> bool:
    """:obj:`True` if the station can serve every present vehicle at full power."""
    need = instance.presence().sum(axis=1) * instance.socket_power
    return bool(np.all(need <= instance.station_capacity * (1 + TOL)))


def _greedy_fill(
    price: np.ndarray, demand: float, socket_power: float, step_hours: float
) -> np.ndarray:
    """Cheapest-slots-first fill of one vehicle's window.

    All slots with negative `price` are filled at full power; the remaining demand goes
    to the cheapest other slots, earliest first on equal prices.
    """
    power = np.where(price < 0, socket_power, 0.0)
    remaining = demand - power.sum() * step_hours

    for t in np.argsort(price, kind="stable"):
        if remaining <= 0:
            break
        if price[t] < 0:
            continue
        power[t] = min(socket_power, remaining / step_hours)
        remaining -= power[t] * step_hours

    return power


def _variables(instance: ChargingInstance) -> List[Tuple[int, int]]:
    return [
        (t, i)
        for i, s in enumerate(instance.sessions)
        for t in range(s.arrival, s.departure)
    ]


def build_charging_lp(instance: ChargingInstance) -> StandardFormLP:
    """Build the full linear program for `instance`.

    Variables ``y[t,i]`` exist only within each vehicle's window. Rows are
    ``demand[i]`` (Σ_t δ·y ≥ L_i) and ``capacity[t]`` (Σ_i y ≤ C_t).
    """
    lp = LPBuilder()
    dt, price = instance.step_hours, instance.effective_price
    by_step: Dict[int, Dict[int, float]] = {}
    by_session: Dict[int, Dict[int, float]] = {}

    for t, i in _variables(instance):
        j = lp.add_variable(
            f"y[{t},{instance.sessions[i].id}]",
            cost=price[t] * dt,
            hi=instance.socket_power,
        )
        by_step.setdefault(t, {})[j] = 1.0
        by_session.setdefault(i, {})[j] = dt

    for i, s in enumerate(instance.sessions):
        lp.add_row(by_session.get(i, {}), ">=", s.demand, f"demand[{s.id}]")
    for t in sorted(by_step):
        lp.add_row(by_step[t], "<=", instance.station_capacity[t], f"capacity[{t}]")

    return lp.build()


def solve_smart_charging(instance: ChargingInstance) -> AllocationMatrix:
    """Return the allocation minimizing the cost of `instance`.

    When the station can serve every present vehicle at socket power, vehicles are
    independent and each is filled greedily. Otherwise the full linear program is
    solved with the dense simplex of :func:`.solve_lp`.

    That program has one variable per vehicle and step of its window, V ≤ N·T in all,
    plus one row per vehicle and per occupied step. Each bounded variable adds a row,
    so the dense tableau holds about (V + N + T) × (2V + N + T) floats: at most about
    200 MB for a day of 24 vehicles at 10-minute steps. Memory grows with the square
    of the fleet, so fleets of hundreds of vehicles are not practical on this path.

    Raises
    ------
    InfeasibleSession
        naming the first vehicle whose window is too short for its demand.
    CapacityExceeded
        naming the first step by which the station cannot have delivered the demand
        due.
    """
    check_sessions(instance)
    ids = tuple(s.id for s in instance.sessions)
    Y = np.zeros((instance.T, instance.N))

    if capacity_slack(instance):
        price = instance.effective_price
        for i, s in enumerate(instance.sessions):
            window = slice(s.arrival, s.departure)
            Y[window, i] = _greedy_fill(
                price[window], s.demand, instance.socket_power, instance.step_hours
            )
        log.debug(f"Greedy fill for {instance.N} vehicles")
        return AllocationMatrix(Y, ids)

    check_capacity(instance)

    problem = build_charging_lp(instance)
    log.info(
        f"Station capacity may bind; solve LP with {problem.n_variables} variables"
    )
    solution = solve_lp(problem)
    if solution.status is LPStatus.INFEASIBLE:
        raise CapacityExceeded("Station capacity cannot serve all vehicles")
    elif not solution.optimal:
        raise RuntimeError(f"Charging LP {solution.status.value}")

    for (t, i), value in zip(_variables(instance), solution.values):
        Y[t, i] = value

    return AllocationMatrix(Y, ids)


def fifs_schedule(instance: ChargingInstance) -> AllocationMatrix:
    """First-in-first-served baseline.

    At each step, present vehicles with unmet demand are served in order of arrival
    (then id), each at ``min(p⁻, remaining capacity, remaining demand / δ)``.
    Unmet demand is not an error; see :attr:`ScheduleMetrics.shortfall`.
    """
    dt, p = instance.step_hours, instance.socket_power
    order = sorted(
        range(instance.N),
        key=lambda i: (instance.sessions[i].arrival, instance.sessions[i].id),
    )
    remaining = np.array([s.demand for s in instance.sessions])
    Y = np.zeros((instance.T, instance.N))

    for t in range(instance.T):
        capacity = instance.station_capacity[t]
        for i in order:
            s = instance.sessions[i]
            if not s.arrival <= t < s.departure or remaining[i] <= 0:
                continue
            Y[t, i] = max(0.0, min(p, capacity, remaining[i] / dt))
            capacity -= Y[t, i]
            remaining[i] -= Y[t, i] * dt

    return AllocationMatrix(Y, tuple(s.id for s in instance.sessions))


def evaluate_schedule(
    alloc: AllocationMatrix,
    instance: ChargingInstance,
    intensity: Union[IntensitySeries, Sequence[float], np.ndarray],
) -> ScheduleMetrics:
    """Compute the cost and emissions of `alloc`.

    `intensity` is the fine-grid carbon intensity, g CO₂/kWh.
    """
    values = as_float_array(getattr(intensity, "values", intensity), "intensity")
    if alloc.power.shape != (instance.T, instance.N) or len(values) != instance.T:
        raise ValueError(
            f"Allocation {alloc.power.shape}, intensity {len(values)} do not match "
            f"{instance.T} steps × {instance.N} vehicles"
        )

    load = alloc.load()
    energy = load * instance.step_hours
    energy_cost = float(instance.energy_price @ energy)
    emission_cost = float(instance.emission_price @ energy)
    delivered = alloc.delivered(instance.step_hours)
    requested = np.array([s.demand for s in instance.sessions])

    return ScheduleMetrics(
        energy_cost=energy_cost,
        emission_mass=Q(float(values @ energy), "g").to("kg").m,
        emission_cost=emission_cost,
        total_objective=energy_cost + instance.lam * emission_cost,
        per_step_load=load,
        energy_delivered=float(delivered.sum()),
        shortfall=float(np.maximum(requested - delivered, 0).sum()),
    )


def pareto_sweep(
    instance: ChargingInstance,
    lambdas: Iterable[float],
    intensity: Union[IntensitySeries, np.ndarray],
) -> pd.DataFrame:
    """Solve `instance` at each λ in `lambdas` and tabulate costs and emissions."""
    rows = []
    for lam in lambdas:
        inst = instance.with_lambda(lam)
        m = evaluate_schedule(solve_smart_charging(inst), inst, intensity)
        rows.append(
            dict(
                lam=lam,
                energy_cost=m.energy_cost,
                emission_cost=m.emission_cost,
                emission_mass_kg=m.emission_mass,
                total_objective=m.total_objective,
            )
        )
    return pd.DataFrame(rows)


def load_price_frame(
    alloc: AllocationMatrix,
    instance: ChargingInstance,
    intensity: Union[IntensitySeries, np.ndarray],
) -> pd.DataFrame:
    """Station load and price signals per fine step."""
    return pd.DataFrame(
        {
            "step": np.arange(instance.T),
            "hour": np.arange(instance.T) * instance.step_hours,
            "load_kw": alloc.load(),
            "energy_price": instance.energy_price,
            "emission_price": instance.emission_price,
            "effective_price": instance.effective_price,
            "intensity_g_per_kwh": getattr(intensity, "values", intensity),
        }
    )


# Command-line interface


@click.command(name="charge")
@common_params("lambda_ out price_mode seed")
@click.pass_obj
def cli(context, lambda_, out, price_mode, seed):
    """Schedule one sampled fleet, and compare with first-in-first-served.

    Writes allocation.csv, load_price.csv, metrics.json and pareto.csv to --out. The
    Pareto table covers λ = 0, the configured λ values and --lambda.
    """
    from gridcharge.harness import prepare_run

    config = context.get_config()
    config = config.replace(
        **{
            k: v
            for k, v in (("master_seed", seed), ("price_mode", price_mode))
            if v is not None
        }
    )
    lam = config.charging_lambda if lambda_ is None else lambda_

    inputs = prepare_run(config, 0)
    instance = inputs.charging_instance(lam)

    alloc = solve_smart_charging(instance)
    alloc.check(instance)
    fifs = fifs_schedule(instance)

    metrics = {
        f"lambda={lam:g}": evaluate_schedule(alloc, instance, inputs.fine_intensity),
        "fifs": evaluate_schedule(fifs, instance, inputs.fine_intensity),
    }
    for name, m in metrics.items():
        log.info(
            f"{name}: cost {m.energy_cost:.2f} {config.currency.base}, "
            f"emissions {m.emission_mass:.2f} kg"
        )

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    alloc.to_frame().to_csv(out / "allocation.csv", index=False)
    load_price_frame(alloc, instance, inputs.fine_intensity).to_csv(
        out / "load_price.csv", index=False
    )
    with open(out / "metrics.json", "w", encoding="utf-8") as f:
        json.dump(
            {name: m.as_dict() for name, m in metrics.items()},
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")

    lambdas = sorted({0.0, lam, *config.lambdas})
    pareto = pareto_sweep(instance, lambdas, inputs.fine_intensity)
    pareto.to_csv(out / "pareto.csv", index=False)
    log.info(f"Cost and emissions by λ:\n{pareto.to_string(index=False)}")

    log.info(f"Wrote schedule for {instance.N} vehicles to {out}")
