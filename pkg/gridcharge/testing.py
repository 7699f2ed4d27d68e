"""Pytest plugin with fixtures and generators of test data for :mod:`gridcharge`."""
import logging
from copy import deepcopy
from math import ceil
from pathlib import Path
from typing import Any, Mapping, Optional

import click.testing
import numpy as np
import pandas as pd
import pytest

from gridcharge import cli
from gridcharge.harness import ExperimentConfig
from gridcharge.model.charging import ChargingInstance, EvSession
from gridcharge.model.power_system_data import (
    Availability,
    AvailabilityProfile,
    DemandProfile,
    SourceSpec,
)
from gridcharge.model.ucp import HydroSystem, UcpInstance
from gridcharge.util import load_package_data, package_data_path
from gridcharge.util._logging import preserve_log_level
from gridcharge.util.context import Context
from gridcharge.util.units import magnitude

log = logging.getLogger(__name__)

# pytest hooks


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo runs at acceptance scale")


# Fixtures


@pytest.fixture(scope="session")
def session_context(request):
    """A Context with outputs in a temporary directory, for the whole session."""
    ctx = Context.only()

    # Temporary, empty local directory for local data
    ctx.local_data = Path(request.config._tmp_path_factory.mktemp("data"))
    ctx.config_path = package_data_path("experiment", "default.yaml")

    yield ctx


@pytest.fixture(scope="function")
def test_context(request, session_context):
    """A copy of :func:`session_context` scoped to one test function."""
    ctx = deepcopy(session_context)

    yield ctx

    ctx.delete()


class CliRunner(click.testing.CliRunner):
    """Subclass of :class:`click.testing.CliRunner` with extra features."""

    # NB decorator ensures any changes that the CLI makes to the logger level are
    #    restored
    @preserve_log_level()
    def invoke(self, *args, **kwargs):
        """Invoke the :program:`gridcharge` CLI."""
        result = super().invoke(cli.main, *args, **kwargs)

        # Store the result to be used by assert_exit_0()
        self.last_result = result

        return result

    def assert_exit_0(self, *args, **kwargs):
        """Assert a result has exit_code 0, or re-raise the exception from the CLI.

        If any `args` or `kwargs` are given, :meth:`.invoke` is first called. Otherwise,
        the result from the last call of :meth:`.invoke` is used.

        Raises
        ------
        AssertionError
            if the CLI exited with a non-zero code without an exception; the message is
            the CLI output.

        Returns
        -------
        click.testing.Result
        """
        __tracebackhide__ = True

        if len(args) + len(kwargs):
            self.invoke(*args, **kwargs)

        result = self.last_result
        if result.exit_code != 0:
            if result.exception is None or isinstance(result.exception, SystemExit):
                raise AssertionError(result.output)
            raise result.exception

        return result


@pytest.fixture(scope="session")
def gridcharge_cli(request, session_context):
    """A :class:`.CliRunner` object that invokes the :program:`gridcharge` CLI."""
    # Require the `session_context` fixture in order to set Context.local_data
    yield CliRunner()


# Generators of test data


def _merge(base: dict, update: Mapping) -> dict:
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def experiment_config(**sections: Mapping[str, Any]) -> ExperimentConfig:
    """Return the default experiment, with `sections` merged into its document.

    Example
    -------
    >>> experiment_config(fleet=dict(n_evs=20), harness=dict(runs=3))
    """
    data = _merge(deepcopy(load_package_data("experiment", "default")), sections)
    return ExperimentConfig.from_dict(data, base=package_data_path("experiment"))


def small_config(**sections: Mapping[str, Any]) -> ExperimentConfig:
    """A fast variant of the default experiment: 24 EVs and 3 runs."""
    doc = dict(fleet=dict(n_evs=24), harness=dict(runs=3))
    return experiment_config(**_merge(doc, sections))


def demand_records(
    days: int = 3,
    seed: int = 0,
    base: float = 28000.0,
    amplitude: float = 4000.0,
    noise: float = 500.0,
    start: str = "2023-03-01",
) -> pd.DataFrame:
    """Synthetic 30-minute demand records with columns ``timestamp,power_mw``."""
    rng = np.random.default_rng(seed)
    ts = pd.date_range(start, periods=days * 48, freq="30min")
    hour = ts.hour + ts.minute / 60
    power = (
        base
        + amplitude * np.sin(2 * np.pi * (hour - 9) / 24)
        + rng.normal(0.0, noise, size=len(ts))
    )
    return pd.DataFrame({"timestamp": ts, "power_mw": power})


def random_ucp_instance(
    rng: np.random.Generator,
    T: int = 6,
    n_thermal: int = 3,
    load_factor: float = 0.8,
    power_cap: bool = True,
) -> UcpInstance:
    """A small random unit commitment instance with feasible demand.

    Thermal sources have constant availability. Demand is random, and
    at most `load_factor` times the power available at each step, counting water the
    reservoir can always release.
    """
    cap = rng.uniform(50.0, 200.0, size=n_thermal)
    sources = [
        SourceSpec(
            name=f"s{j}",
            mix_share=0.1,
            emission_rate=float(rng.uniform(10.0, 900.0)),
            unit_cost=float(rng.uniform(0.5, 3.0)),
            availability_kind=Availability.constant,
        )
        for j in range(n_thermal)
    ] + [SourceSpec("hydro", 0.2, 24.0, 1.0, Availability.hydro)]

    # ρ for these parameters, MWh/m³
    rho = magnitude(0.9 * 1000 * 9.81 * 100, "J/m**3", "MWh/m**3")
    hydro_mw = float(rng.uniform(20.0, 100.0))
    v0 = hydro_mw * T / rho
    hydro = HydroSystem(
        eta=0.9,
        water_density=1000.0,
        gravity=9.81,
        head=100.0,
        unit_cost=float(rng.uniform(0.2, 2.0)),
        v0=v0,
        v_min=0.6 * v0,
        v_max=1.5 * v0,
        power_cap=hydro_mw if power_cap else None,
    )
    inflows = rng.uniform(0.0, 0.05 * v0, size=T)

    # Water for 0.4 × hydro_mw each step is always available
    available = cap.sum() + 0.4 * hydro_mw
    demand = load_factor * available * rng.uniform(0.5, 1.0, size=T)

    return UcpInstance(
        demand=DemandProfile(demand),
        sources=tuple(sources),
        availability={
            s.name: AvailabilityProfile(s.name, np.full(T, c))
            for s, c in zip(sources, cap)
        },
        hydro=hydro,
        inflows=inflows,
    )


def random_charging_instance(
    rng: np.random.Generator,
    N: int = 4,
    T: int = 12,
    binding: bool = False,
    lam: Optional[float] = None,
    socket_power: float = 22.0,
    step_hours: float = 1 / 6,
) -> ChargingInstance:
    """A small random charging instance with feasible demands.

    Demands are drawn below the energy of a random allocation that respects every
    window and the station capacity. With `binding`, the capacity is about half of the
    power needed to serve every vehicle present at once, so the cost-minimizing
    schedule is not separable by vehicle.
    """
    p, dt = socket_power, step_hours
    arrival = rng.integers(0, T - 1, size=N)
    departure = np.minimum(arrival + rng.integers(1, T + 1, size=N), T)
    t = np.arange(T)[:, None]
    present = (t >= arrival) & (t < departure)

    capacity = p * max(1, ceil(present.sum(axis=1).max() / 2)) if binding else N * p

    Y = np.where(present, rng.uniform(0.0, p, size=(T, N)), 0.0)
    load = Y.sum(axis=1)
    Y *= np.minimum(1.0, capacity / np.maximum(load, 1e-12))[:, None]
    demand = Y.sum(axis=0) * dt * rng.uniform(0.3, 1.0, size=N)

    return ChargingInstance(
        sessions=tuple(
            EvSession(i, int(a), int(d), float(L))
            for i, (a, d, L) in enumerate(zip(arrival, departure, demand))
        ),
        socket_power=p,
        station_capacity=np.full(T, float(capacity)),
        energy_price=rng.uniform(0.05, 0.3, size=T),
        emission_price=rng.uniform(0.0, 0.05, size=T),
        lam=float(rng.choice([0.0, 0.1, 1.0, 10.0])) if lam is None else lam,
        step_hours=dt,
    )
