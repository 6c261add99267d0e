"""Hour-by-hour simulation of a farm community under one market scenario."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .agents import AgentObservation, apply_action, rule_decide
from .auction import Order, Side, clear
from .battery import BatterySpec
from .pricing import FeedInPrice, TimeOfUseTariff
from .profiles import FarmDataset
from .qlearning import QTableError, load_qtable

BALANCE_TOL = 1e-9


class Scenario(enum.Enum):
    NO_RE_NO_P2P = "no-re-no-p2p"
    RE_NO_P2P = "re-no-p2p"
    RE_P2P = "re-p2p"

    @property
    def renewables(self) -> bool:
        return self is not Scenario.NO_RE_NO_P2P

    @property
    def p2p(self) -> bool:
        return self is Scenario.RE_P2P


class AgentKind(enum.Enum):
    RULE = "rule"
    Q = "q"


class SimulationError(Exception):
    pass


class MissingQTable(SimulationError):
    pass


class HorizonMismatch(SimulationError):
    pass


@dataclass(frozen=True)
class FarmSetup:
    dataset: FarmDataset
    battery: Optional[BatterySpec] = field(default_factory=BatterySpec)
    agent: AgentKind = AgentKind.RULE

    @property
    def farm_id(self) -> int:
        return self.dataset.farm_id


@dataclass(frozen=True)
class SimulationConfig:
    farms: tuple[FarmSetup, ...]
    tariff: TimeOfUseTariff = TimeOfUseTariff()
    feed_in: FeedInPrice = FeedInPrice()
    scenario: Scenario = Scenario.RE_P2P
    seed: int = 42
    horizon_hours: int = 8760
    qtable_path: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "farms", tuple(self.farms))
        if not self.farms:
            raise ValueError("a community needs at least one farm")
        ids = [f.farm_id for f in self.farms]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate farm ids in {ids}")
        self.feed_in.check_against(self.tariff)

    @property
    def needs_qtable(self) -> bool:
        return any(f.agent is AgentKind.Q for f in self.farms)

    def with_scenario(self, scenario: Scenario) -> SimulationConfig:
        return SimulationConfig(self.farms, self.tariff, self.feed_in, scenario, self.seed,
                                self.horizon_hours, self.qtable_path)

    def echo(self) -> dict:
        """Plain-data description of the run, stored next to its outputs."""
        return {
            "scenario": self.scenario.value,
            "seed": self.seed,
            "horizon_hours": self.horizon_hours,
            "tariff": {
                "night_rate": self.tariff.night_rate,
                "day_rate": self.tariff.day_rate,
                "peak_rate": self.tariff.peak_rate,
                "night_window": list(self.tariff.night_window),
                "peak_window": list(self.tariff.peak_window),
            },
            "feed_in": self.feed_in.lambda_sell,
            "farms": [
                {
                    "farm_id": f.farm_id,
                    "agent": f.agent.value,
                    "pv_capacity": f.dataset.pv_capacity,
                    "wind_capacity": f.dataset.wind_capacity,
                    "battery": None if f.battery is None else vars(f.battery).copy(),
                }
                for f in self.farms
            ],
        }


@dataclass(frozen=True)
class HourRecord:
    """One hour of the community ledger; per-farm fields are tuples in farm order."""

    hour: int
    farm_ids: tuple[int, ...]
    load: tuple[float, ...]
    generation: tuple[float, ...]
    e_buy: tuple[float, ...]
    e_sell: tuple[float, ...]
    e_charge: tuple[float, ...]
    e_discharge: tuple[float, ...]
    forced_purchase: tuple[float, ...]
    curtailed: tuple[float, ...]
    cash: tuple[float, ...]
    soc: tuple[float, ...]
    isp: float = 0.0
    ibp: float = 0.0
    sdr: float = 0.0
    grid_import: float = 0.0
    grid_export: float = 0.0


LEDGER_FIELDS = ("load", "generation", "e_buy", "e_sell", "e_charge", "e_discharge",
                 "forced_purchase", "curtailed", "cash", "soc")


@dataclass(eq=False)
class ScenarioResult:
    """Columnar run ledger: per-farm arrays are ``(hours, farms)``, community arrays ``(hours,)``."""

    scenario: Scenario
    farm_ids: tuple[int, ...]
    load: np.ndarray
    generation: np.ndarray
    e_buy: np.ndarray
    e_sell: np.ndarray
    e_charge: np.ndarray
    e_discharge: np.ndarray
    forced_purchase: np.ndarray
    curtailed: np.ndarray
    cash: np.ndarray
    soc: np.ndarray
    isp: np.ndarray
    ibp: np.ndarray
    sdr: np.ndarray
    grid_import: np.ndarray
    grid_export: np.ndarray
    actions: Optional[np.ndarray] = None
    feasible: Optional[np.ndarray] = None
    config: dict = field(default_factory=dict)

    @property
    def hours(self) -> int:
        return self.load.shape[0]

    @property
    def purchased(self) -> np.ndarray:
        return self.e_buy + self.forced_purchase

    def record(self, hour: int) -> HourRecord:
        per_farm = {name: tuple(float(v) for v in getattr(self, name)[hour]) for name in LEDGER_FIELDS}
        return HourRecord(hour=hour, farm_ids=self.farm_ids, isp=float(self.isp[hour]),
                          ibp=float(self.ibp[hour]), sdr=float(self.sdr[hour]),
                          grid_import=float(self.grid_import[hour]),
                          grid_export=float(self.grid_export[hour]), **per_farm)

    def records(self):
        for t in range(self.hours):
            yield self.record(t)

    def farm_totals(self) -> dict[str, np.ndarray]:
        return {name: np.array([math.fsum(col) for col in getattr(self, name).T])
                for name in LEDGER_FIELDS if name != "soc"}

    def community_totals(self) -> dict[str, float]:
        totals = {name: math.fsum(col) for name, col in self.farm_totals().items()}
        totals["grid_import"] = math.fsum(self.grid_import)
        totals["grid_export"] = math.fsum(self.grid_export)
        return totals


def check_energy_balance(rec: HourRecord, tol: float = BALANCE_TOL) -> bool:
    """True when every farm's bus balances to within ``tol`` kWh."""
    for i in range(len(rec.farm_ids)):
        sources = rec.generation[i] + rec.e_buy[i] + rec.e_discharge[i] + rec.forced_purchase[i]
        sinks = rec.load[i] + rec.e_sell[i] + rec.e_charge[i] + rec.curtailed[i]
        if not abs(sources - sinks) <= tol:
            return False
    return True


def energy_balance_violations(result: ScenarioResult, tol: float = BALANCE_TOL) -> int:
    """Number of farm-hours whose bus does not balance."""
    sources = result.generation + result.e_buy + result.e_discharge + result.forced_purchase
    sinks = result.load + result.e_sell + result.e_charge + result.curtailed
    return int(np.count_nonzero(~(np.abs(sources - sinks) <= tol)))


def _resolve_qtable(cfg: SimulationConfig, qtable):
    if not cfg.needs_qtable:
        return None
    if qtable is not None:
        return qtable
    if cfg.qtable_path is None and not cfg.scenario.renewables:
        # without renewables or storage every policy ends up buying the whole load
        return None
    if cfg.qtable_path is None:
        raise MissingQTable("configuration has a Q-learning agent but no Q-table was given")
    try:
        return load_qtable(cfg.qtable_path)
    except QTableError as exc:
        raise MissingQTable(f"cannot use Q-table {cfg.qtable_path}: {exc}") from exc


def run_scenario(cfg: SimulationConfig, qtable=None) -> ScenarioResult:
    """Simulate every hour of the horizon for the whole community.

    Each hour, every farm observes its load, generation, battery level and
    the hour, picks an action and declares the resulting purchase and sale
    quantities. With P2P trading the quantities go to the auction and are
    settled at the ISP/IBP of the hour; otherwise each farm buys at the
    retail rate and sells at the feed-in price. Without renewables farms see
    zero generation and their batteries are switched off; a Q-learning farm
    may then run without a table, in which case it follows the rules.
    """
    table = _resolve_qtable(cfg, qtable)
    hours = cfg.horizon_hours
    for farm in cfg.farms:
        if farm.dataset.horizon_hours != hours:
            raise HorizonMismatch(
                f"farm {farm.farm_id} has {farm.dataset.horizon_hours} h of data, config expects {hours} h"
            )

    scenario = cfg.scenario
    farms = sorted(cfg.farms, key=lambda f: f.farm_id)
    n = len(farms)
    lambda_sell = cfg.feed_in.lambda_sell
    rates = cfg.tariff.hourly_rates()

    specs = [f.battery if scenario.renewables else None for f in farms]
    states = [s.initial_state() if s is not None else None for s in specs]
    loads = [f.dataset.load.values.tolist() for f in farms]
    gens = [f.dataset.generation.tolist() if scenario.renewables else [0.0] * hours for f in farms]

    cols = {name: np.zeros((hours, n)) for name in LEDGER_FIELDS}
    actions = np.zeros((hours, n), dtype=np.int8)
    feasible = np.zeros((hours, n), dtype=bool)
    isp = np.zeros(hours)
    ibp = np.zeros(hours)
    sdr = np.zeros(hours)
    grid_import = np.zeros(hours)
    grid_export = np.zeros(hours)

    for t in range(hours):
        hod = t % 24
        flows = []
        for i, farm in enumerate(farms):
            spec, state = specs[i], states[i]
            frac = min(state.fraction(spec), 1.0) if spec is not None else 0.0
            obs = AgentObservation(loads[i][t], gens[i][t], frac, hod)
            if farm.agent is AgentKind.Q and table is not None:
                action = table.greedy_action(obs)
            else:
                action = rule_decide(obs, state, spec)
            flow, states[i], ok = apply_action(obs, action, state, spec)
            flows.append(flow)
            actions[t, i] = int(action)
            feasible[t, i] = ok

        if scenario.p2p:
            orders = []
            for farm, flow in zip(farms, flows):
                if flow.e_sell > 0:
                    orders.append(Order(farm.farm_id, Side.OFFER, flow.e_sell))
                elif flow.purchased > 0:
                    orders.append(Order(farm.farm_id, Side.BID, flow.purchased))
            cleared = clear(orders, rates[hod], lambda_sell)
            isp[t], ibp[t], sdr[t] = cleared.quote.isp, cleared.quote.ibp, cleared.quote.sdr
            grid_import[t] = cleared.grid_import
            grid_export[t] = cleared.grid_export
            cash = [cleared.cash.get(f.farm_id, 0.0) for f in farms]
        else:
            isp[t], ibp[t] = lambda_sell, rates[hod]
            sdr[t] = math.nan
            grid_import[t] = math.fsum(f.purchased for f in flows)
            grid_export[t] = math.fsum(f.e_sell for f in flows)
            cash = [f.e_sell * lambda_sell - f.purchased * rates[hod] for f in flows]

        for i, flow in enumerate(flows):
            cols["load"][t, i] = loads[i][t]
            cols["generation"][t, i] = gens[i][t]
            cols["e_buy"][t, i] = flow.e_buy
            cols["e_sell"][t, i] = flow.e_sell
            cols["e_charge"][t, i] = flow.e_charge_bus
            cols["e_discharge"][t, i] = flow.e_discharge_bus
            cols["forced_purchase"][t, i] = flow.forced_purchase
            cols["curtailed"][t, i] = flow.e_curtailed
            cols["cash"][t, i] = cash[i]
            cols["soc"][t, i] = states[i].soc if states[i] is not None else 0.0

    return ScenarioResult(
        scenario=scenario, farm_ids=tuple(f.farm_id for f in farms), isp=isp, ibp=ibp, sdr=sdr,
        grid_import=grid_import, grid_export=grid_export, actions=actions, feasible=feasible,
        config=cfg.echo(), **cols,
    )
