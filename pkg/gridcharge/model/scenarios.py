"""Stochastic inputs: EV fleets and electricity price profiles.

Fleets
------
Half the vehicles (the extra one, for odd counts, in the morning) follow a morning
pattern, the rest an afternoon pattern. For a cohort with peak hour h and Beta shape β,
the arrival hour is ``horizon × Beta(α, β)`` with

    α = (1 + m(β − 2)) / (1 − m),    m = h / 24,

so that the mode of the Beta distribution is exactly m. The dwell time is
``Normal(μ, σ²)``, truncated below at one fine step, and the requested energy is
``Beta(2, 2) × p⁻ × window``.

Prices
------
Each historical day is interpolated linearly onto the fine grid, wrapping the last
hour back to the day's first. The mean vector and the sample covariance across days
define a Gaussian model, from which profiles are drawn.
"""
import logging
from dataclasses import dataclass, field
from datetime import date
from math import ceil
from pathlib import Path
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gridcharge.model.charging import EvSession
from gridcharge.model.power_system_data import read_timeseries_csv
from gridcharge.util import as_float_array

log = logging.getLogger(__name__)

FLEET_COLUMNS = ["ev_id", "arrival_step", "departure_step", "demand_kwh"]


class PriceModelError(ValueError):
    """Invalid price history or model."""


@dataclass(frozen=True)
class FleetParams:
    n_evs: int = 300
    #: Morning and afternoon peak hours of arrival.
    peak_hours: Tuple[float, float] = (7.0, 17.0)
    beta_b: float = 12.0
    #: Dwell time (mean, standard deviation), hours, for the morning and afternoon
    #: cohorts.
    dwell_models: Tuple[Tuple[float, float], Tuple[float, float]] = (
        (7.0, 4.0),
        (3.0, 1.0),
    )
    #: Socket power p⁻, kW.
    socket_power: float = 22.0
    horizon_hours: float = 24.0
    #: Fine step δ, hours.
    step_hours: float = 1 / 6

    def __post_init__(self):
        if self.n_evs < 1:
            raise ValueError(f"Need ≥ 1 EV; got {self.n_evs}")
        if not all(0 < h < 24 for h in self.peak_hours):
            raise ValueError(f"Peak hours {self.peak_hours} not in (0, 24)")
        if not self.beta_b > 2:
            raise ValueError(f"Beta shape β must be > 2; got {self.beta_b}")
        if not all(sd > 0 for _, sd in self.dwell_models):
            raise ValueError("Dwell standard deviations must be > 0")
        if not (self.socket_power > 0 and self.step_hours > 0):
            raise ValueError("Socket power and step must be > 0")

    @classmethod
    def from_config(cls, info: Mapping) -> "FleetParams":
        """Create from the ``fleet:`` section of an experiment configuration."""
        dwell = info.get("dwell", {})
        default = cls()
        return cls(
            n_evs=int(info.get("n_evs", default.n_evs)),
            peak_hours=tuple(info.get("peak_hours", default.peak_hours)),
            beta_b=float(info.get("beta", default.beta_b)),
            dwell_models=(
                tuple(dwell.get("morning", default.dwell_models[0])),
                tuple(dwell.get("afternoon", default.dwell_models[1])),
            ),
            socket_power=float(info.get("socket_power_kw", default.socket_power)),
            horizon_hours=float(info.get("horizon_hours", default.horizon_hours)),
            step_hours=float(info.get("step_minutes", 10)) / 60,
        )

    @property
    def n_steps(self) -> int:
        """Number of fine steps T_fine."""
        return int(round(self.horizon_hours / self.step_hours))

    def alpha(self, peak_hour: float) -> float:
        """Beta shape α giving a mode at `peak_hour`."""
        m = peak_hour / 24
        return (1 + m * (self.beta_b - 2)) / (1 - m)


def sample_fleet(params: FleetParams, rng: np.random.Generator) -> List[EvSession]:
    """Draw a fleet of ``params.n_evs`` vehicles.

    Vehicles 0 … ceil(n/2) − 1 form the morning cohort.
    """
    T, dt = params.n_steps, params.step_hours
    n_morning = ceil(params.n_evs / 2)

    sessions: List[EvSession] = []
    for peak, (mu, sigma), n in zip(
        params.peak_hours,
        params.dwell_models,
        (n_morning, params.n_evs - n_morning),
    ):
        x = rng.beta(params.alpha(peak), params.beta_b, size=n)
        arrival = np.minimum(np.floor(params.horizon_hours * x / dt), T - 1).astype(int)

        tau = np.maximum(rng.normal(mu, sigma, size=n), dt)
        departure = np.minimum(arrival + np.ceil(tau / dt - 1e-9), T).astype(int)

        window = departure - arrival
        demand = rng.beta(2.0, 2.0, size=n) * params.socket_power * window
        demand *= dt

        start = len(sessions)
        sessions.extend(
            EvSession(start + k, int(a), int(d), float(L))
            for k, (a, d, L) in enumerate(zip(arrival, departure, demand))
        )

    return sessions


def write_fleet_csv(sessions: Iterable[EvSession], path: Path) -> None:
    pd.DataFrame(
        [(s.id, s.arrival, s.departure, s.demand) for s in sessions],
        columns=FLEET_COLUMNS,
    ).to_csv(path, index=False)


def read_fleet_csv(path: Path) -> List[EvSession]:
    df = pd.read_csv(path)
    missing = set(FLEET_COLUMNS) - set(df.columns)
    if missing:
        raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
    return [
        EvSession(
            int(r.ev_id), int(r.arrival_step), int(r.departure_step), r.demand_kwh
        )
        for r in df.itertuples()
    ]


@dataclass(frozen=True)
class PriceModel:
    """Gaussian model of daily price profiles on the fine grid."""

    mean: np.ndarray
    covariance: np.ndarray
    #: Lower clamp for sampled prices; :obj:`None` to allow any value.
    floor: Optional[float] = 0.0
    step_hours: float = 1 / 6
    #: Number of days the model was fitted on.
    n_days: int = field(default=0, compare=False)

    def __post_init__(self):
        mean = as_float_array(self.mean, "mean")
        cov = np.asarray(self.covariance, dtype=float)
        n = len(mean)
        if cov.shape != (n, n):
            raise PriceModelError(f"Covariance shape {cov.shape} ≠ {(n, n)}")
        scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-8 * scale):
            raise PriceModelError("Covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min(initial=0.0) < -1e-8 * scale:
            raise PriceModelError("Covariance is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    def __len__(self):
        return len(self.mean)


def read_price_csv(path: Path) -> pd.DataFrame:
    """Read hourly prices with columns ``timestamp,price``."""
    return read_timeseries_csv(path, "price")


def synthetic_price_history(
    params: Mapping, days: Optional[int] = None, seed: Optional[int] = None
) -> pd.DataFrame:
    """Generate an hourly price history from the parameters in `params`.

    `params` is the contents of a file like :file:`data/prices/synthetic.yaml`.
    `days` and `seed` override the values there.
    """
    days = int(params["days"] if days is None else days)
    rng = np.random.default_rng(params.get("seed") if seed is None else seed)
    shape = as_float_array(params["shape"], "price shape", length=24)

    level = rng.normal(0.0, params.get("day_sd", 0.0), size=(days, 1))
    noise = rng.normal(0.0, params.get("hour_sd", 0.0), size=(days, 24))
    prices = shape * (1 + level) + noise

    start = pd.Timestamp(params.get("start", date(2023, 1, 1)))
    return pd.DataFrame(
        {
            "timestamp": pd.date_range(start, periods=days * 24, freq="h"),
            "price": prices.reshape(-1),
        }
    )


def daily_matrix(historical: pd.DataFrame, value_col: str = "price") -> np.ndarray:
    """Arrange hourly records as a (days × 24) matrix, in date order.

    Raises
    ------
    PriceModelError
        naming the first day that does not have exactly one value for each hour.
    """
    ts = pd.to_datetime(historical["timestamp"])
    df = pd.DataFrame(
        {"day": ts.dt.date, "hour": ts.dt.hour, "value": historical[value_col]}
    )
    rows = []
    for day, group in df.groupby("day", sort=True):
        if len(group) != 24 or set(group["hour"]) != set(range(24)):
            raise PriceModelError(
                f"Day {day} has {len(group)} hourly price(s); need one for each hour"
            )
        rows.append(group.sort_values("hour")["value"].to_numpy(dtype=float))
    return np.array(rows).reshape(-1, 24)


def interpolate_day(day: Sequence[float], step_hours: float) -> np.ndarray:
    """Linear interpolation of 24 hourly values onto a grid of `step_hours`.

    Values after the last hour interpolate towards the first.
    """
    values = as_float_array(day, "day", length=24)
    t = np.arange(int(round(24 / step_hours))) * step_hours
    return np.interp(t, np.arange(25), np.append(values, values[0]))


def fit_price_model(
    historical: pd.DataFrame,
    step_hours: float = 1 / 6,
    floor: Optional[float] = 0.0,
    ridge: float = 1e-10,
) -> PriceModel:
    """Fit a :class:`PriceModel` to hourly `historical` prices.

    Parameters
    ----------
    historical : pandas.DataFrame
        Columns "timestamp" and "price"; complete days at hourly resolution.
    ridge : float, optional
        Added to the diagonal of the covariance.

    Raises
    ------
    PriceModelError
        for an incomplete day or fewer than 2 days.
    """
    days = daily_matrix(historical)
    if len(days) < 2:
        raise PriceModelError(f"Need ≥ 2 days of prices; got {len(days)}")

    X = np.array([interpolate_day(d, step_hours) for d in days])
    cov = np.cov(X, rowvar=False, ddof=1)
    cov = (cov + cov.T) / 2 + ridge * np.eye(X.shape[1])

    log.info(f"Fit price model on {len(days)} days, {X.shape[1]} steps per day")

    return PriceModel(
        mean=X.mean(axis=0),
        covariance=cov,
        floor=floor,
        step_hours=step_hours,
        n_days=len(days),
    )


def sample_price_profile(model: PriceModel, rng: np.random.Generator) -> np.ndarray:
    """Draw one price profile ``mean + L·z``, clamped below at ``model.floor``.

    L is the symmetric square root of the covariance and z standard normal.
    """
    try:
        w, V = np.linalg.eigh(model.covariance)
    except np.linalg.LinAlgError as e:
        raise PriceModelError(f"Cannot factorize price covariance: {e}") from None

    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    values = model.mean + root @ rng.standard_normal(len(model))

    if model.floor is not None:
        values = np.maximum(values, model.floor)
    return values
