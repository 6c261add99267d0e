"""Hourly load, PV and wind series for each farm.

Profiles either come from one-column CSV files or from the synthetic
generators below. All generators draw from numpy's PCG64 bit generator
seeded through ``numpy.random.SeedSequence``, which produces the same
stream on every platform for a given integer seed.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

HOURS_PER_YEAR = 8760
HOURS_PER_DAY = 24

# milking sessions as half-open hour windows [start, end) of local time
MORNING_MILKING = (5, 7)
EVENING_MILKING = (16, 18)


class ProfileError(ValueError):
    """Base class for invalid profile data."""


class WrongLength(ProfileError):
    pass


class NegativeValue(ProfileError):
    pass


class Malformed(ProfileError):
    pass


class NonPositiveTotal(ProfileError):
    pass


class NonPositiveCapacity(ProfileError):
    pass


def make_rng(*seed_words: int) -> np.random.Generator:
    """PCG64 generator keyed by one or more non-negative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(seed_words))))


@dataclass(frozen=True, eq=False)
class HourlyProfile:
    """Year-long hourly energy series in kWh per hour."""

    values: np.ndarray
    horizon_hours: int = HOURS_PER_YEAR

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1:
            raise Malformed(f"profile must be one-dimensional, got shape {arr.shape}")
        if arr.shape[0] != self.horizon_hours:
            raise WrongLength(f"expected {self.horizon_hours} values, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise Malformed("profile contains non-finite values")
        if np.any(arr < 0):
            idx = int(np.argmax(arr < 0))
            raise NegativeValue(f"negative value {arr[idx]!r} at hour {idx}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.horizon_hours

    def __eq__(self, other):
        if not isinstance(other, HourlyProfile):
            return NotImplemented
        return self.horizon_hours == other.horizon_hours and self.values.tobytes() == other.values.tobytes()

    __hash__ = None

    def total(self) -> float:
        return math.fsum(self.values)


@dataclass(frozen=True, eq=False)
class FarmDataset:
    farm_id: int
    load: HourlyProfile
    pv: HourlyProfile
    wind: HourlyProfile
    pv_capacity: float = 15.0
    wind_capacity: float = 10.0

    def __post_init__(self):
        horizons = {self.load.horizon_hours, self.pv.horizon_hours, self.wind.horizon_hours}
        if len(horizons) != 1:
            raise WrongLength(f"farm {self.farm_id}: profiles disagree on horizon {sorted(horizons)}")
        if self.pv_capacity < 0 or self.wind_capacity < 0:
            raise NonPositiveCapacity(f"farm {self.farm_id}: capacities must be non-negative")

    @property
    def horizon_hours(self) -> int:
        return self.load.horizon_hours

    @property
    def generation(self) -> np.ndarray:
        return self.pv.values + self.wind.values


def parse_profile_csv(text: str | TextIO, expected_horizon: int = HOURS_PER_YEAR) -> HourlyProfile:
    """Parse a one-column CSV (optional ``kwh`` header) into a profile."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    values = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and line.lower() == "kwh":
            continue
        if "," in line:
            raise Malformed(f"line {lineno}: expected a single column, got {line!r}")
        try:
            value = float(line)
        except ValueError:
            raise Malformed(f"line {lineno}: not a number: {line!r}") from None
        if not math.isfinite(value):
            raise Malformed(f"line {lineno}: non-finite value {line!r}")
        if value < 0:
            raise NegativeValue(f"line {lineno}: negative value {value!r}")
        values.append(value)
    if len(values) != expected_horizon:
        raise WrongLength(f"expected {expected_horizon} rows, got {len(values)}")
    return HourlyProfile(np.array(values), expected_horizon)


def format_profile_csv(profile: HourlyProfile, header: bool = True) -> str:
    """Inverse of :func:`parse_profile_csv`; floats are written with ``repr`` so re-parsing is exact."""
    lines = ["kwh"] if header else []
    lines.extend(repr(float(v)) for v in profile.values)
    return "\n".join(lines) + "\n"


def _check_horizon(horizon_hours: int) -> int:
    if horizon_hours <= 0 or horizon_hours % HOURS_PER_DAY:
        raise WrongLength(f"horizon must be a positive whole number of days, got {horizon_hours} h")
    return horizon_hours // HOURS_PER_DAY


def _seasonal_phase(n_days: int) -> np.ndarray:
    # 0 at the winter solstice (day ~ -10), 1 at midsummer
    day = np.arange(n_days)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * (day + 10) / 365.0))


# relative hourly load of a dairy farm: milking, wash-down after it, daytime yard work, night base
_DAIRY_SHAPE = np.array([
    0.45, 0.45, 0.45, 0.45, 0.55,   # 00-04
    2.30, 2.40,                     # 05-06 morning milking
    1.20,                           # 07 wash-down
    1.00, 0.85, 0.80, 0.80, 0.85, 0.80, 0.80, 0.90,  # 08-15
    2.20, 2.30,                     # 16-17 evening milking
    1.10,                           # 18 wash-down
    0.85, 0.75, 0.65, 0.55, 0.50,   # 19-23
])


def synth_dairy_load(annual_kwh: float, seed: int, horizon_hours: int = HOURS_PER_YEAR) -> HourlyProfile:
    """Synthetic farm load with twice-daily milking peaks.

    Spring-calving herds milk most heavily in late spring, so the daily
    energy follows a seasonal cycle peaking around mid-May with a winter
    trough. Multiplicative lognormal noise (sigma 0.12) is applied per hour
    and the series is rescaled so it sums to ``annual_kwh``, pro rata when
    the horizon is not a full year.
    """
    if not annual_kwh > 0:
        raise NonPositiveTotal(f"annual_kwh must be positive, got {annual_kwh!r}")
    n_days = _check_horizon(horizon_hours)
    rng = make_rng(seed)
    day = np.arange(n_days)
    seasonal = 1.0 + 0.35 * np.cos(2.0 * np.pi * (day - 135) / 365.0)
    noise = rng.lognormal(mean=0.0, sigma=0.12, size=(n_days, HOURS_PER_DAY))
    raw = (seasonal[:, None] * _DAIRY_SHAPE[None, :] * noise).ravel()
    target = annual_kwh * horizon_hours / HOURS_PER_YEAR
    values = raw * (target / math.fsum(raw))
    return HourlyProfile(values, horizon_hours)


def _pv_shape(seed: int, horizon_hours: int) -> np.ndarray:
    n_days = _check_horizon(horizon_hours)
    rng = make_rng(seed)
    phase = _seasonal_phase(n_days)
    half_day = 4.0 + 4.0 * phase          # 8 h of daylight in winter, 16 h in summer
    amplitude = 0.35 + 0.50 * phase       # clear-sky peak as a fraction of capacity
    clearness = 0.15 + 0.85 * rng.beta(2.0, 1.6, size=n_days)
    flicker = 1.0 - 0.2 * rng.random((n_days, HOURS_PER_DAY))

    midpoints = np.arange(HOURS_PER_DAY) + 0.5
    solar_noon = 13.0
    x = (midpoints[None, :] - (solar_noon - half_day[:, None])) / (2.0 * half_day[:, None])
    bell = np.where((x > 0.0) & (x < 1.0), np.sin(np.pi * x), 0.0)
    shape = bell * (amplitude * clearness)[:, None] * flicker
    shape[:, 0] = 0.0
    shape[:, HOURS_PER_DAY - 1] = 0.0
    return shape.ravel()


def synth_pv_profile(capacity: float, seed: int, horizon_hours: int = HOURS_PER_YEAR) -> HourlyProfile:
    """Synthetic PV output: zero at night, a daytime bell whose width and height follow the season.

    Output is ``capacity`` times a unit-free shape that never exceeds 0.85,
    so scaling the capacity scales every hour by the same factor.
    """
    if not capacity > 0:
        raise NonPositiveCapacity(f"PV capacity must be positive, got {capacity!r}")
    return HourlyProfile(capacity * _pv_shape(seed, horizon_hours), horizon_hours)


def _power_curve(speed: np.ndarray, cut_in=3.0, rated=12.0, cut_out=25.0) -> np.ndarray:
    frac = (speed**3 - cut_in**3) / (rated**3 - cut_in**3)
    out = np.clip(frac, 0.0, 1.0)
    out[(speed < cut_in) | (speed >= cut_out)] = 0.0
    return out


def synth_wind_profile(capacity: float, seed: int, horizon_hours: int = HOURS_PER_YEAR) -> HourlyProfile:
    """Synthetic small-turbine output from an AR(1) hub-height wind speed.

    Hourly speed has persistence 0.95, a mean of 7 m/s (±1.5 m/s between
    winter and summer) and a 3 m/s standard deviation; a cubic power curve
    with 3/12/25 m/s cut-in/rated/cut-out maps speed to output.
    """
    if not capacity > 0:
        raise NonPositiveCapacity(f"wind capacity must be positive, got {capacity!r}")
    _check_horizon(horizon_hours)
    rng = make_rng(seed)
    phi = 0.95
    shocks = rng.standard_normal(horizon_hours) * math.sqrt(1.0 - phi * phi)
    z = np.empty(horizon_hours)
    z[0] = rng.standard_normal()
    for t in range(1, horizon_hours):
        z[t] = phi * z[t - 1] + shocks[t]
    hours = np.arange(horizon_hours)
    mean = 7.0 + 1.5 * np.cos(2.0 * np.pi * (hours / HOURS_PER_DAY + 10) / 365.0)
    speed = np.maximum(mean + 3.0 * z, 0.0)
    return HourlyProfile(capacity * _power_curve(speed), horizon_hours)
