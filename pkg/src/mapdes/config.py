"""Community configuration files and the built-in ten-farm preset.

A config is an INI file::

    [community]
    seed = 42
    horizon_hours = 8760
    feed_in = 0.09

    [tariff]
    night_rate = 0.12
    day_rate = 0.21
    peak_rate = 0.30
    night_window = 23-8
    peak_window = 17-19

    [battery]            ; defaults shared by every farm
    capacity = 13.5

    [farm.0]
    agent = q            ; q or rule
    annual_load_kwh = 35000   ; or load_csv = path/to/load.csv
    pv_kw = 15                ; pv_csv = ... replaces the generator
    wind_kw = 10              ; wind_csv = ...
    battery = yes

Relative CSV paths are resolved against the config file's directory.
Synthetic profiles are seeded from the community seed and the farm id.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import fields
from typing import Optional

import numpy as np

from .battery import BatterySpec
from .pricing import FeedInPrice, TimeOfUseTariff
from .profiles import (
    HOURS_PER_YEAR, FarmDataset, ProfileError, parse_profile_csv, synth_dairy_load, synth_pv_profile,
    synth_wind_profile,
)
from .simulator import AgentKind, FarmSetup, Scenario, SimulationConfig

DEFAULT_SEED = 42

LOAD_STREAM, PV_STREAM, WIND_STREAM = 0, 1, 2

# farm_id, annual load (kWh, herds of 60-100 cows), PV capacity (kW);
# every farm also has a 10 kW turbine and a battery
PRESET_FARMS = (
    (0, 28000.0, 15.0),
    (1, 22000.0, 10.0),
    (2, 34000.0, 20.0),
    (3, 25000.0, 12.0),
    (4, 30000.0, 18.0),
    (5, 21000.0, 11.0),
    (6, 32000.0, 19.0),
    (7, 26000.0, 14.0),
    (8, 23000.0, 13.0),
    (9, 29000.0, 17.0),
)
PRESET_WIND_KW = 10.0


class ConfigError(ValueError):
    pass


def derive_seed(seed: int, farm_id: int, stream: int) -> int:
    """Independent 63-bit generator seed for one farm's profile stream."""
    state = np.random.SeedSequence([seed, farm_id, stream]).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def synthetic_farm(farm_id: int, annual_load_kwh: float, pv_kw: float, wind_kw: float, seed: int,
                   horizon_hours: int = HOURS_PER_YEAR) -> FarmDataset:
    return FarmDataset(
        farm_id=farm_id,
        load=synth_dairy_load(annual_load_kwh, derive_seed(seed, farm_id, LOAD_STREAM), horizon_hours),
        pv=synth_pv_profile(pv_kw, derive_seed(seed, farm_id, PV_STREAM), horizon_hours),
        wind=synth_wind_profile(wind_kw, derive_seed(seed, farm_id, WIND_STREAM), horizon_hours),
        pv_capacity=pv_kw,
        wind_capacity=wind_kw,
    )


def preset_community(seed: int = DEFAULT_SEED, horizon_hours: int = HOURS_PER_YEAR,
                     scenario: Scenario = Scenario.RE_P2P, qtable_path: Optional[str] = None) -> SimulationConfig:
    """Ten synthetic dairy farms; farm 0 is the Q-learning agent, the rest follow the rules."""
    farms = tuple(
        FarmSetup(
            synthetic_farm(fid, load, pv, PRESET_WIND_KW, seed, horizon_hours),
            BatterySpec(),
            AgentKind.Q if fid == 0 else AgentKind.RULE,
        )
        for fid, load, pv in PRESET_FARMS
    )
    return SimulationConfig(farms, TimeOfUseTariff(), FeedInPrice(), scenario, seed, horizon_hours, qtable_path)


def _window(raw: str) -> tuple[int, int]:
    try:
        start, end = (int(x) for x in raw.replace(" ", "").split("-"))
    except ValueError:
        raise ConfigError(f"hour window must look like 17-19, got {raw!r}") from None
    return start, end


def _battery_from(section, base: Optional[BatterySpec] = None) -> BatterySpec:
    base = base or BatterySpec()
    kwargs = {}
    for f in fields(BatterySpec):
        if f.name in section:
            kwargs[f.name] = section.getfloat(f.name)
    return BatterySpec(**{**vars(base), **kwargs})


def _profile(section, key_csv, base_dir, horizon, synth):
    if key_csv in section:
        path = os.path.join(base_dir, section[key_csv])
        try:
            with open(path, encoding="utf-8") as fh:
                return parse_profile_csv(fh, horizon)
        except OSError as exc:
            raise ConfigError(f"cannot read profile {path}: {exc}") from exc
    return synth()


def load_config(path, seed: Optional[int] = None, scenario: Scenario = Scenario.RE_P2P,
                qtable_path: Optional[str] = None) -> SimulationConfig:
    """Parse a community config; ``seed`` overrides the file's ``[community] seed``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base_dir = os.path.dirname(os.path.abspath(path))

    try:
        community = parser["community"] if parser.has_section("community") else {}
        resolved_seed = seed if seed is not None else int(community.get("seed", DEFAULT_SEED))
        horizon = int(community.get("horizon_hours", HOURS_PER_YEAR))
        feed_in = FeedInPrice(float(community.get("feed_in", FeedInPrice.lambda_sell)))

        tariff = TimeOfUseTariff()
        if parser.has_section("tariff"):
            t = parser["tariff"]
            tariff = TimeOfUseTariff(
                night_rate=t.getfloat("night_rate", tariff.night_rate),
                day_rate=t.getfloat("day_rate", tariff.day_rate),
                peak_rate=t.getfloat("peak_rate", tariff.peak_rate),
                night_window=_window(t["night_window"]) if "night_window" in t else tariff.night_window,
                peak_window=_window(t["peak_window"]) if "peak_window" in t else tariff.peak_window,
            )
        default_battery = _battery_from(parser["battery"]) if parser.has_section("battery") else BatterySpec()

        farms = []
        for name in parser.sections():
            if not name.startswith("farm."):
                continue
            sec = parser[name]
            fid = int(name.split(".", 1)[1])
            pv_kw = sec.getfloat("pv_kw", 15.0)
            wind_kw = sec.getfloat("wind_kw", PRESET_WIND_KW)
            annual = sec.getfloat("annual_load_kwh", 35000.0)
            dataset = FarmDataset(
                farm_id=fid,
                load=_profile(sec, "load_csv", base_dir, horizon, lambda: synth_dairy_load(
                    annual, derive_seed(resolved_seed, fid, LOAD_STREAM), horizon)),
                pv=_profile(sec, "pv_csv", base_dir, horizon, lambda: synth_pv_profile(
                    pv_kw, derive_seed(resolved_seed, fid, PV_STREAM), horizon)),
                wind=_profile(sec, "wind_csv", base_dir, horizon, lambda: synth_wind_profile(
                    wind_kw, derive_seed(resolved_seed, fid, WIND_STREAM), horizon)),
                pv_capacity=pv_kw,
                wind_capacity=wind_kw,
            )
            battery = _battery_from(sec, default_battery) if sec.getboolean("battery", True) else None
            agent = AgentKind(sec.get("agent", "rule").strip().lower())
            farms.append(FarmSetup(dataset, battery, agent))
        if not farms:
            raise ConfigError(f"{path}: no [farm.N] sections")
        farms.sort(key=lambda f: f.farm_id)
        return SimulationConfig(tuple(farms), tariff, feed_in, scenario, resolved_seed, horizon, qtable_path)
    except ConfigError:
        raise
    except (ValueError, KeyError, ProfileError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def training_farm(cfg: SimulationConfig) -> FarmSetup:
    """The farm a Q-table is trained for: the first Q agent, or the only farm."""
    for farm in cfg.farms:
        if farm.agent is AgentKind.Q:
            return farm
    if len(cfg.farms) == 1:
        return cfg.farms[0]
    raise ConfigError("config has several farms but none with agent = q")


def preset_config_text(seed: int = DEFAULT_SEED) -> str:
    """INI text equivalent to :func:`preset_community`."""
    lines = [
        "[community]", f"seed = {seed}", f"horizon_hours = {HOURS_PER_YEAR}", "feed_in = 0.09", "",
        "[tariff]", "night_rate = 0.12", "day_rate = 0.21", "peak_rate = 0.30",
        "night_window = 23-8", "peak_window = 17-19", "",
        "[battery]",
    ]
    lines += [f"{k} = {v}" for k, v in vars(BatterySpec()).items()]
    for fid, load, pv in PRESET_FARMS:
        lines += ["", f"[farm.{fid}]", f"agent = {'q' if fid == 0 else 'rule'}",
                  f"annual_load_kwh = {load:g}", f"pv_kw = {pv:g}", f"wind_kw = {PRESET_WIND_KW:g}",
                  "battery = yes"]
    return "\n".join(lines) + "\n"
