"""Exogenous inputs to the unit commitment problem.

This module reads or constructs:

- the generation mix (one :class:`SourceSpec` per source),
- the hourly :class:`DemandProfile`, and
- one :class:`AvailabilityProfile` per non-hydro source: constant for thermal units and
  imports, a Gaussian daylight curve for PV and a capacity-weighted cluster aggregate
  for wind.

All functions are deterministic given their inputs.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from gridcharge.util import as_float_array

log = logging.getLogger(__name__)

#: Hours in a (non-leap) year; the reference for annual-equivalent energy.
HOURS_PER_YEAR = 8760

#: Default maximum instantaneous deliverable power, MW.
P_MAX = 46348.0

#: Shares summing to within this of 1 are silently renormalized.
SHARE_EXACT_TOL = 1e-6

#: Shares summing to within this of 1 are accepted.
SHARE_TOL = 1e-3

FIELDS = ("share", "emission_rate", "unit_cost", "availability")


class DataError(ValueError):
    """Invalid or incomplete input data."""


class Availability(str, Enum):
    """How the maximum power of a source over time is determined."""

    constant = "constant"
    profile = "profile"
    hydro = "hydro"


@dataclass(frozen=True)
class SourceSpec:
    """One generation source.

    Attributes
    ----------
    name : str
    mix_share : float
        Fraction of :attr:`SystemCapacity.p_max` available from this source.
    emission_rate : float
        g CO₂ per kWh generated.
    unit_cost : float
        Generation cost per kWh, in the currency of the source table.
    availability_kind : Availability
    """

    name: str
    mix_share: float
    emission_rate: float
    unit_cost: float
    availability_kind: Availability

    def __post_init__(self):
        if not 0 <= self.mix_share <= 1:
            raise DataError(f"{self.name}: share {self.mix_share} not in [0, 1]")
        for attr in ("emission_rate", "unit_cost"):
            if getattr(self, attr) < 0:
                raise DataError(f"{self.name}: negative {attr} {getattr(self, attr)}")


@dataclass(frozen=True)
class SystemCapacity:
    #: Total instantaneous deliverable power, MW.
    p_max: float = P_MAX

    def __post_init__(self):
        if not self.p_max > 0:
            raise DataError(f"p_max must be > 0; got {self.p_max}")


@dataclass(frozen=True)
class DemandProfile:
    """Power demand D_t per step, MW."""

    values: np.ndarray
    step_hours: float = 1.0

    def __post_init__(self):
        values = as_float_array(self.values, "demand")
        if np.any(values < 0):
            raise DataError(f"negative demand at step {int(np.argmax(values < 0))}")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def scaled(self, factor: float) -> "DemandProfile":
        return DemandProfile(self.values * factor, self.step_hours)


@dataclass(frozen=True)
class AvailabilityProfile:
    """Maximum deliverable power x^max_t of `source` per step, MW."""

    source: str
    caps: np.ndarray

    def __post_init__(self):
        caps = as_float_array(self.caps, f"{self.source} availability")
        if np.any(caps < 0):
            raise DataError(f"{self.source}: negative availability")
        object.__setattr__(self, "caps", caps)

    def __len__(self):
        return len(self.caps)


# Source table


def load_source_table(
    config: Union[Mapping, Sequence[Mapping]], renormalize: bool = False
) -> List[SourceSpec]:
    """Validate and return the generation mix described by `config`.

    Parameters
    ----------
    config
        Either a mapping with a "sources" key, or directly a mapping from source name to
        a row, or a sequence of rows with a "name" key. Each row has the keys
        ``share``, ``emission_rate``, ``unit_cost`` and ``availability``.
    renormalize : bool, optional
        If :obj:`True`, scale shares to sum to exactly 1 whenever their sum is within
        :data:`SHARE_TOL`. Otherwise only sums within :data:`SHARE_EXACT_TOL` are
        renormalized, and other accepted sums are kept verbatim with a warning.

    Raises
    ------
    DataError
        for missing or negative fields, an unknown availability kind, a number of hydro
        sources other than 1, or shares that do not sum to 1 within :data:`SHARE_TOL`.
    """
    if isinstance(config, Mapping):
        rows = config.get("sources", config)
        rows = [dict(name=name, **row) for name, row in rows.items()]
    else:
        rows = list(config)

    result = []
    for row in rows:
        name = str(row.get("name", "?"))
        missing = [f for f in FIELDS if f not in row]
        if missing:
            raise DataError(f"Source {name!r} lacks field(s) {missing}")
        try:
            kind = Availability(row["availability"])
        except ValueError:
            raise DataError(
                f"Source {name!r}: unknown availability {row['availability']!r}"
            ) from None
        result.append(
            SourceSpec(
                name=name,
                mix_share=float(row["share"]),
                emission_rate=float(row["emission_rate"]),
                unit_cost=float(row["unit_cost"]),
                availability_kind=kind,
            )
        )

    if len(result) == 0:
        raise DataError("Empty source table")

    n_hydro = sum(s.availability_kind is Availability.hydro for s in result)
    if n_hydro != 1:
        raise DataError(f"Need exactly 1 hydro source; got {n_hydro}")

    total = sum(s.mix_share for s in result)
    deficit = 1.0 - total
    # Margin for rounding in sums of decimal shares
    if abs(deficit) > SHARE_TOL + 1e-12:
        raise DataError(f"Mix shares sum to {total:.6g}; deficit {deficit:.6g}")
    elif abs(deficit) > SHARE_EXACT_TOL and not renormalize:
        log.warning(f"Mix shares sum to {total:.6g}; keep values as given")
    elif deficit != 0:
        log.info(f"Renormalize mix shares from sum {total:.6g}")
        result = [replace(s, mix_share=s.mix_share / total) for s in result]

    return result


def hydro_source(sources: Iterable[SourceSpec]) -> SourceSpec:
    """Return the single hydro source in `sources`."""
    return next(s for s in sources if s.availability_kind is Availability.hydro)


# Demand


def read_demand_csv(path: Path) -> pd.DataFrame:
    """Read demand records with columns ``timestamp,power_mw``.

    Raises
    ------
    DataError
        with the 1-based line number of the first unparseable row.
    """
    return read_timeseries_csv(path, "power_mw")


def read_timeseries_csv(path: Path, value_col: str) -> pd.DataFrame:
    """Read a CSV file with columns ``timestamp`` and `value_col`."""
    raw = pd.read_csv(path, dtype=str, skipinitialspace=True)

    missing = {"timestamp", value_col} - set(raw.columns)
    if missing:
        raise DataError(f"{path}: missing column(s) {sorted(missing)}")

    ts = pd.to_datetime(raw["timestamp"], errors="coerce")
    values = pd.to_numeric(raw[value_col], errors="coerce")

    for name, parsed in (("timestamp", ts), (value_col, values)):
        bad = parsed.isna()
        if bad.any():
            # Line 1 is the header
            i = int(np.argmax(bad.to_numpy()))
            raise DataError(
                f"{path}, line {i + 2}: cannot parse {name} {raw[name].iloc[i]!r}"
            )

    return pd.DataFrame({"timestamp": ts, value_col: values.astype(float)})


def hourly_demand_from_records(
    records: Union[pd.DataFrame, Iterable[Tuple]], value_col: str = "power_mw"
) -> DemandProfile:
    """Aggregate 30-minute power records to a 24-value hour-of-day profile.

    Readings are first averaged within each hour, then across days for each
    hour-of-day.

    Parameters
    ----------
    records
        :class:`~pandas.DataFrame` with columns "timestamp" and `value_col`, or an
        iterable of (timestamp, value) pairs. Must cover whole days at 30-minute
        resolution.

    Raises
    ------
    DataError
        if a timestamp is not on a half-hour, a slot is duplicated, or a half-hour slot
        between the first and last day is missing.
    """
    if not isinstance(records, pd.DataFrame):
        records = pd.DataFrame(list(records), columns=["timestamp", value_col])

    df = records.assign(timestamp=pd.to_datetime(records["timestamp"])).sort_values(
        "timestamp"
    )
    if len(df) == 0:
        raise DataError("No demand records")

    ts = df["timestamp"]
    off_grid = (ts.dt.minute % 30 != 0) | (ts.dt.second != 0)
    if off_grid.any():
        raise DataError(f"Timestamp {ts[off_grid].iloc[0]} not on a half-hour")

    dupes = ts.duplicated()
    if dupes.any():
        raise DataError(f"Duplicate record for {ts[dupes].iloc[0]}")

    expected = pd.date_range(
        ts.iloc[0].normalize(),
        ts.iloc[-1].normalize() + pd.Timedelta(hours=23, minutes=30),
        freq="30min",
    )
    gaps = expected.difference(pd.DatetimeIndex(ts))
    if len(gaps):
        raise DataError(f"Missing half-hour slot {gaps[0]} ({len(gaps)} in total)")

    hourly = df.groupby(ts.dt.floor("h"))[value_col].mean()
    profile = hourly.groupby(hourly.index.hour).mean()

    log.info(f"Hourly demand profile from {len(hourly) // 24} day(s)")

    return DemandProfile(profile.reindex(range(24)).to_numpy(), step_hours=1.0)


# Availability


def constant_availability(
    spec: SourceSpec, capacity: SystemCapacity, T: int
) -> AvailabilityProfile:
    """Availability ``mix_share × p_max`` at every one of `T` steps."""
    if spec.availability_kind is not Availability.constant:
        raise DataError(
            f"{spec.name} has availability {spec.availability_kind.value!r}, not "
            "'constant'"
        )
    return AvailabilityProfile(spec.name, np.full(T, spec.mix_share * capacity.p_max))


def pv_availability_profile(
    daily_energy_budget: float,
    peak_hour: float = 12.0,
    sigma: float = 2.0,
    window: Tuple[float, float] = (7, 17),
    step_hours: float = 1.0,
    horizon_hours: float = 24.0,
    source: str = "pv",
) -> AvailabilityProfile:
    """Gaussian daylight production curve.

    The density ``exp(-(t - peak_hour)² / (2 sigma²))`` is evaluated at each step
    ``t = 0, step_hours, …`` inside the productive `window` (bounds included), zero
    elsewhere, normalized to sum to 1 and scaled so that the energy over the horizon
    equals `daily_energy_budget` (MWh).
    """
    start, end = window
    if sigma <= 0:
        raise DataError(f"sigma must be > 0; got {sigma}")
    if daily_energy_budget < 0:
        raise DataError(f"negative PV energy budget {daily_energy_budget}")
    if not (0 <= start < 24 and 0 <= end < 24):
        raise DataError(f"PV window {window} not within [0, 24)")

    t = np.arange(int(round(horizon_hours / step_hours))) * step_hours
    in_window = (t >= start) & (t <= end)
    if not in_window.any():
        raise DataError(f"Empty PV window {window}")

    weights = np.where(in_window, np.exp(-((t - peak_hour) ** 2) / (2 * sigma**2)), 0.0)
    weights /= weights.sum()

    return AvailabilityProfile(source, weights * daily_energy_budget / step_hours)


def read_wind_clusters(
    manifest: Path,
) -> Tuple[Dict[str, np.ndarray], Dict[str, float]]:
    """Read per-cluster capacity factors and installed capacities.

    `manifest` is a CSV file with columns ``cluster_id,installed_mw``. For each cluster,
    a file :file:`{cluster_id}.csv` in the same directory has columns
    ``timestamp,capacity_factor``.
    """
    manifest = Path(manifest)
    info = pd.read_csv(manifest, dtype={"cluster_id": str})
    missing = {"cluster_id", "installed_mw"} - set(info.columns)
    if missing:
        raise DataError(f"{manifest}: missing column(s) {sorted(missing)}")

    profiles, capacities = {}, {}
    for row in info.itertuples():
        df = read_timeseries_csv(
            manifest.with_name(f"{row.cluster_id}.csv"), "capacity_factor"
        ).sort_values("timestamp")
        profiles[row.cluster_id] = df["capacity_factor"].to_numpy()
        capacities[row.cluster_id] = float(row.installed_mw)

    log.info(f"Read {len(profiles)} wind cluster(s) from {manifest}")

    return profiles, capacities


def synthetic_wind_clusters(
    manifest: Mapping, days: int = 365, seed: Optional[int] = 2023
) -> Tuple[Dict[str, np.ndarray], Dict[str, float]]:
    """Generate hourly capacity-factor series for the clusters in `manifest`.

    `manifest` is the contents of a file like :file:`data/wind/vietnam_2023.yaml`. Each
    series has a diurnal and a seasonal cosine around its mean plus seeded Gaussian
    noise, clipped to [0, 1].
    """
    rng = np.random.default_rng(seed)
    hours = np.arange(days * 24)
    h, d = hours % 24, hours // 24

    profiles, capacities = {}, {}
    for name, p in manifest["clusters"].items():
        cf = (
            p["mean"]
            + p["diurnal"] * np.cos(2 * np.pi * (h - p["peak_hour"]) / 24)
            + p["seasonal"] * np.cos(2 * np.pi * (d - p["peak_day"]) / 365)
            + rng.normal(0.0, p.get("noise", 0.0), size=len(hours))
        )
        profiles[name] = np.clip(cf, 0.0, 1.0)
        capacities[name] = float(p["installed_mw"])

    return profiles, capacities


def wind_availability_profile(
    cluster_profiles: Mapping[str, Sequence[float]],
    cluster_capacities: Mapping[str, float],
    annual_energy_budget: float,
    step_hours: float = 1.0,
    source: str = "wind",
) -> AvailabilityProfile:
    """Aggregate wind clusters to an hour-of-day availability profile.

    1. The capacity-weighted sum of cluster capacity factors gives a national series.
    2. The series is normalized and scaled so that its annual-equivalent energy equals
       `annual_energy_budget` (MWh); for a series spanning exactly one year, the
       energies are equal.
    3. Values are averaged by step of day.

    Parameters
    ----------
    cluster_profiles
        Capacity factor series, one value per `step_hours`, all of the same length,
        covering whole days.
    cluster_capacities
        Installed MW per cluster; the aggregation weights.
    """
    if len(cluster_profiles) == 0:
        raise DataError("No wind clusters")

    names = list(cluster_profiles)
    series = [as_float_array(cluster_profiles[n], f"cluster {n!r}") for n in names]
    lengths = {len(s) for s in series}
    if len(lengths) > 1:
        raise DataError(f"Wind cluster profile lengths differ: {sorted(lengths)}")

    try:
        weights = np.array([float(cluster_capacities[n]) for n in names])
    except KeyError as e:
        raise DataError(f"No installed capacity for cluster {e.args[0]!r}") from None
    if np.any(weights < 0) or not np.any(weights > 0):
        raise DataError("Cluster capacities must be ≥ 0 with at least one > 0")

    per_day = int(round(24 / step_hours))
    length = lengths.pop()
    if length == 0 or length % per_day:
        raise DataError(f"Wind profile length {length} is not a whole number of days")

    national = weights @ np.vstack(series)
    total = national.sum()
    if total <= 0:
        raise DataError("Aggregated wind profile is zero everywhere")

    # MW such that (energy over the series) × (year / series duration) = budget
    span_hours = length * step_hours
    power = national / total * annual_energy_budget * span_hours / HOURS_PER_YEAR
    power /= step_hours

    return AvailabilityProfile(source, power.reshape(-1, per_day).mean(axis=0))


def build_availability(
    sources: Sequence[SourceSpec],
    capacity: SystemCapacity,
    T: int,
    profiles: Mapping[str, AvailabilityProfile],
) -> Dict[str, AvailabilityProfile]:
    """Return availability profiles for every non-hydro source.

    Sources with constant availability are computed with
    :func:`constant_availability`; sources with profile availability are taken from
    `profiles`.
    """
    result = {}
    for spec in sources:
        if spec.availability_kind is Availability.constant:
            result[spec.name] = constant_availability(spec, capacity, T)
        elif spec.availability_kind is Availability.profile:
            try:
                profile = profiles[spec.name]
            except KeyError:
                raise DataError(f"No availability profile for {spec.name!r}") from None
            if len(profile) != T:
                raise DataError(f"{spec.name}: profile length {len(profile)} ≠ {T}")
            result[spec.name] = profile
    return result
