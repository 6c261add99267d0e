"""Farm decision policies and the flow semantics of the nine trading actions.

Every hour an agent looks at its load, renewable generation, battery level
and the hour of day, and picks one of nine actions. :func:`apply_action`
turns that choice into concrete energy flows on the farm's AC bus. Actions
that make no sense in the current situation (selling during a deficit,
discharging an empty battery, ...) are reported as infeasible and fall back
to plain self-consumption: surplus is curtailed and any deficit is bought
from the grid as a forced purchase.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .battery import BatterySpec, BatteryState, apply_charge, apply_discharge, max_accept, max_deliver
from .pricing import TimeOfUseTariff, is_peak

N_ACTIONS = 9
N_HOURS = 24
N_SOC_BINS = 10
N_LEVEL_BINS = 8


class Action(enum.IntEnum):
    BUY = 0
    SELL = 1
    SELF_CONSUME_ONLY = 2
    CHARGE_AND_SELL = 3
    CHARGE_AND_BUY = 4
    DISCHARGE_AND_SELL = 5
    DISCHARGE_AND_BUY = 6
    SELF_UTILIZE_AND_CHARGE = 7
    SELF_UTILIZE_AND_DISCHARGE = 8


@dataclass(frozen=True)
class AgentObservation:
    load: float
    generation: float
    soc_frac: float
    hour_of_day: int

    def __post_init__(self):
        if self.load < 0 or self.generation < 0:
            raise ValueError("load and generation must be non-negative")
        if not 0 <= self.soc_frac <= 1:
            raise ValueError(f"soc_frac must lie in [0, 1], got {self.soc_frac!r}")
        if not 0 <= self.hour_of_day < N_HOURS:
            raise ValueError(f"hour_of_day must be in 0..23, got {self.hour_of_day}")


@dataclass(frozen=True)
class FlowDecision:
    """Bus-side energy flows for one farm-hour, all in kWh."""

    e_buy: float = 0.0
    e_sell: float = 0.0
    e_charge_bus: float = 0.0
    e_discharge_bus: float = 0.0
    e_curtailed: float = 0.0
    forced_purchase: float = 0.0

    @property
    def purchased(self) -> float:
        return self.e_buy + self.forced_purchase

    def imbalance(self, load: float, generation: float) -> float:
        """Sources minus sinks; zero when the farm's bus balances."""
        sources = generation + self.e_buy + self.e_discharge_bus + self.forced_purchase
        sinks = load + self.e_sell + self.e_charge_bus + self.e_curtailed
        return sources - sinks


def _headroom(battery: Optional[BatteryState], spec: Optional[BatterySpec]) -> tuple[float, float]:
    if spec is None or battery is None:
        return 0.0, 0.0
    return max_accept(battery, spec), max_deliver(battery, spec)


def rule_decide(obs: AgentObservation, battery: Optional[BatteryState], spec: Optional[BatterySpec]) -> Action:
    """Fixed IF-THEN policy: store surplus before selling it, use storage before buying."""
    accept, deliver = _headroom(battery, spec)
    if obs.generation > obs.load:
        return Action.CHARGE_AND_SELL if accept > 0 else Action.SELL
    if obs.generation < obs.load:
        return Action.DISCHARGE_AND_BUY if deliver > 0 else Action.BUY
    return Action.SELF_CONSUME_ONLY


def _flows(surplus: float, deficit: float, action: Action, accept: float, deliver: float):
    """Return ``(buy, sell, charge, discharge, curtailed, forced)`` or None when infeasible."""
    if action is Action.BUY:
        if surplus > 0:
            return None
        return deficit, 0.0, 0.0, 0.0, 0.0, 0.0
    if action is Action.SELL:
        if deficit > 0:
            return None
        return 0.0, surplus, 0.0, 0.0, 0.0, 0.0
    if action is Action.SELF_CONSUME_ONLY:
        return 0.0, 0.0, 0.0, 0.0, surplus, deficit
    if action is Action.CHARGE_AND_SELL:
        if surplus <= 0:
            return None
        charge = min(surplus, accept)
        return 0.0, surplus - charge, charge, 0.0, 0.0, 0.0
    if action is Action.CHARGE_AND_BUY:
        if accept <= 0:
            return None
        need = deficit + accept - surplus
        if need >= 0:
            return need, 0.0, accept, 0.0, 0.0, 0.0
        return 0.0, 0.0, accept, 0.0, -need, 0.0
    if action is Action.DISCHARGE_AND_SELL:
        if deliver <= 0:
            return None
        spare = surplus + deliver - deficit
        if spare >= 0:
            return 0.0, spare, 0.0, deliver, 0.0, 0.0
        return 0.0, 0.0, 0.0, deliver, 0.0, -spare
    if action is Action.DISCHARGE_AND_BUY:
        if deficit <= 0 or deliver <= 0:
            return None
        used = min(deliver, deficit)
        return deficit - used, 0.0, 0.0, used, 0.0, 0.0
    if action is Action.SELF_UTILIZE_AND_CHARGE:
        if surplus <= 0:
            return None
        charge = min(surplus, accept)
        return 0.0, 0.0, charge, 0.0, surplus - charge, 0.0
    if action is Action.SELF_UTILIZE_AND_DISCHARGE:
        if deficit <= 0 or deliver <= 0:
            return None
        used = min(deliver, deficit)
        return 0.0, 0.0, 0.0, used, 0.0, deficit - used
    raise ValueError(f"unknown action {action!r}")


def apply_action(obs: AgentObservation, action: int, battery: Optional[BatteryState],
                 spec: Optional[BatterySpec]):
    """Energy flows induced by ``action``; returns ``(FlowDecision, new_battery, feasible)``.

    ``spec=None`` models a farm without storage: nothing can be charged or
    discharged, so the battery actions become infeasible or degenerate.
    """
    action = Action(action)
    net = obs.generation - obs.load
    surplus = net if net > 0 else 0.0
    deficit = -net if net < 0 else 0.0
    accept, deliver = _headroom(battery, spec)

    flows = _flows(surplus, deficit, action, accept, deliver)
    feasible = flows is not None
    if not feasible:
        flows = (0.0, 0.0, 0.0, 0.0, surplus, deficit)
    buy, sell, charge, discharge, curtailed, forced = flows

    new_battery = battery
    if charge > 0:
        new_battery, _ = apply_charge(battery, spec, charge)
    elif discharge > 0:
        new_battery, _ = apply_discharge(battery, spec, discharge)
    decision = FlowDecision(e_buy=buy, e_sell=sell, e_charge_bus=charge, e_discharge_bus=discharge,
                            e_curtailed=curtailed, forced_purchase=forced)
    return decision, new_battery, feasible


def reward(flow: FlowDecision, feasible: bool, hour: int, sell_price: float, buy_price: float,
           tariff: TimeOfUseTariff, hp) -> float:
    """Trading reward for one step.

    ``hp`` is anything carrying ``invalid_penalty`` and ``peak_weight``
    (normally the training :class:`~mapdes.qlearning.Hyperparameters`).
    """
    if not feasible:
        return -hp.invalid_penalty
    bought = flow.e_buy + flow.forced_purchase
    r = flow.e_sell * sell_price - bought * buy_price
    if is_peak(tariff, hour):
        r -= hp.peak_weight * bought
    return r


def _strictly_increasing(edges) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.float64)
    if edges.shape != (N_LEVEL_BINS - 1,):
        raise ValueError(f"expected {N_LEVEL_BINS - 1} bin edges, got shape {edges.shape}")
    if not np.all(np.diff(edges) > 0):
        raise ValueError("bin edges must be strictly increasing")
    return edges


@dataclass(frozen=True, eq=False)
class Discretizer:
    """Maps an observation to one of 24 * 10 * 8 * 8 = 15,360 table rows.

    A level falls in bin ``k`` when exactly ``k`` edges lie strictly below
    it, so a value equal to an edge stays in the lower bin and anything above
    the last edge lands in the top bin.
    """

    load_bin_edges: np.ndarray
    gen_bin_edges: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "load_bin_edges", _strictly_increasing(self.load_bin_edges))
        object.__setattr__(self, "gen_bin_edges", _strictly_increasing(self.gen_bin_edges))

    def __eq__(self, other):
        if not isinstance(other, Discretizer):
            return NotImplemented
        return (self.load_bin_edges.tobytes() == other.load_bin_edges.tobytes()
                and self.gen_bin_edges.tobytes() == other.gen_bin_edges.tobytes())

    __hash__ = None

    @property
    def n_states(self) -> int:
        return N_HOURS * N_SOC_BINS * N_LEVEL_BINS * N_LEVEL_BINS

    @classmethod
    def from_profiles(cls, load, generation) -> Discretizer:
        """Octile edges of the given series, nudged apart where quantiles coincide."""
        return cls(_quantile_edges(load), _quantile_edges(generation))

    def load_bins(self, values) -> np.ndarray:
        return np.searchsorted(self.load_bin_edges, values, side="left")

    def gen_bins(self, values) -> np.ndarray:
        return np.searchsorted(self.gen_bin_edges, values, side="left")


def _quantile_edges(values) -> np.ndarray:
    q = np.quantile(np.asarray(values, dtype=np.float64), np.arange(1, N_LEVEL_BINS) / N_LEVEL_BINS)
    # many zero-generation hours make the low octiles collapse onto 0
    step = max(float(q[-1]) * 1e-6, 1e-9)
    edges = np.empty_like(q)
    edges[0] = q[0]
    for i in range(1, q.size):
        edges[i] = max(q[i], edges[i - 1] + step)
    return edges


def soc_bin(soc_frac: float) -> int:
    return min(int(soc_frac * N_SOC_BINS), N_SOC_BINS - 1)


def state_index(hour: int, soc_b: int, load_b: int, gen_b: int) -> int:
    return ((hour * N_SOC_BINS + soc_b) * N_LEVEL_BINS + load_b) * N_LEVEL_BINS + gen_b


def discretize(obs: AgentObservation, d: Discretizer) -> int:
    load_b = int(np.searchsorted(d.load_bin_edges, obs.load, side="left"))
    gen_b = int(np.searchsorted(d.gen_bin_edges, obs.generation, side="left"))
    return state_index(obs.hour_of_day, soc_bin(obs.soc_frac), load_b, gen_b)
