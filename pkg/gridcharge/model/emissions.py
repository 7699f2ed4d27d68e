"""Carbon intensity of a dispatch, and the resulting emission price."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from gridcharge.model.power_system_data import SourceSpec
from gridcharge.model.ucp import DispatchSchedule, HydroSystem
from gridcharge.util import as_float_array
from gridcharge.util.units import Q

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntensitySeries:
    """Grid-average carbon intensity per step.

    Attributes
    ----------
    values : numpy.ndarray
        g CO₂ per kWh generated; 0 at steps without generation.
    step_hours : float
    emissions_kg : numpy.ndarray, optional
        Total emissions per step, kg CO₂.
    energy_kwh : numpy.ndarray, optional
        Total generated energy per step, kWh.
    """

    values: np.ndarray
    step_hours: float = 1.0
    emissions_kg: Optional[np.ndarray] = None
    energy_kwh: Optional[np.ndarray] = None

    def __post_init__(self):
        values = as_float_array(self.values, "intensity")
        if np.any(values < 0):
            raise ValueError("Negative carbon intensity")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class EmissionPriceSeries:
    #: Currency per kWh.
    values: np.ndarray
    #: Currency per tonne CO₂.
    carbon_price: float

    def __len__(self):
        return len(self.values)


def carbon_intensity(
    schedule: DispatchSchedule, sources: Sequence[SourceSpec], hydro: HydroSystem
) -> IntensitySeries:
    """Compute the carbon intensity of `schedule`.

    At each step, emissions of every source (rate × energy) are summed and divided by
    the total energy generated, hydro included.

    Raises
    ------
    ValueError
        if any dispatch entry is negative, or a source in `schedule` is missing from
        `sources`.
    """
    if np.any(schedule.power < 0) or np.any(schedule.hydro_water < 0):
        raise ValueError("Negative entry in dispatch schedule")

    rate = {s.name: s.emission_rate for s in sources}
    try:
        rates = np.array([rate[name] for name in schedule.sources])
    except KeyError as e:
        raise ValueError(f"No emission rate for source {e.args[0]!r}") from None

    thermal = (Q(schedule.power, "MW") * Q(schedule.step_hours, "h")).to("kWh").m
    water = (Q(schedule.hydro_water, "m**3") * Q(schedule.rho, "MWh/m**3")).to("kWh").m

    emissions = Q(thermal @ rates + hydro.emission_rate * water, "g")
    energy = thermal.sum(axis=1) + water

    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(energy > 0, emissions.m / energy, 0.0)

    return IntensitySeries(
        values,
        step_hours=schedule.step_hours,
        emissions_kg=emissions.to("kg").m,
        energy_kwh=energy,
    )


def emission_price(
    intensity: IntensitySeries, carbon_price: float
) -> EmissionPriceSeries:
    """Price per kWh of the emissions in `intensity` at `carbon_price` per tonne."""
    if carbon_price < 0:
        raise ValueError(f"Negative carbon price {carbon_price}")
    price = Q(carbon_price, "1/t") * Q(intensity.values, "g/kWh")
    return EmissionPriceSeries(price.to("1/kWh").m, carbon_price)


def resample_hold(
    series: Union[Sequence[float], np.ndarray, IntensitySeries, EmissionPriceSeries],
    fine_step_hours: float,
    step_hours: float = 1.0,
) -> np.ndarray:
    """Repeat each value of `series` over the fine steps within its step.

    Raises
    ------
    ValueError
        if `fine_step_hours` does not divide `step_hours` evenly.
    """
    values = getattr(series, "values", series)
    ratio = step_hours / fine_step_hours if fine_step_hours > 0 else 0.0
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise ValueError(
            f"Step {fine_step_hours} h does not divide {step_hours} h evenly"
        )
    return np.repeat(as_float_array(values, "series"), k)


def emission_frame(
    intensity: IntensitySeries, price: EmissionPriceSeries
) -> pd.DataFrame:
    """Data with columns
    ``hour,intensity_g_per_kwh,total_emissions_kg,emission_price_per_kwh``."""
    T = len(intensity)
    emissions = intensity.emissions_kg
    return pd.DataFrame(
        {
            "hour": np.arange(T) * intensity.step_hours,
            "intensity_g_per_kwh": intensity.values,
            "total_emissions_kg": (
                np.full(T, np.nan) if emissions is None else emissions
            ),
            "emission_price_per_kwh": price.values,
        }
    )
