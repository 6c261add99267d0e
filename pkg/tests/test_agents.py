import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapdes.agents import (
    N_ACTIONS, Action, AgentObservation, Discretizer, FlowDecision, apply_action, discretize, reward,
    rule_decide,
)
from mapdes.battery import BatterySpec, BatteryState
from mapdes.qlearning import Hyperparameters

HP = Hyperparameters()


def obs(load, gen, soc=0.5, hour=12):
    return AgentObservation(load, gen, soc, hour)


def test_rule_examples(spec):
    mid = spec.initial_state()
    assert rule_decide(obs(4, 4), mid, spec) is Action.SELF_CONSUME_ONLY
    assert rule_decide(obs(3, 8, 1.0), BatteryState(spec.soc_max), spec) is Action.SELL
    assert rule_decide(obs(3, 8), mid, spec) is Action.CHARGE_AND_SELL
    assert rule_decide(obs(6, 2), mid, spec) is Action.DISCHARGE_AND_BUY
    assert rule_decide(obs(6, 2, 0.1), BatteryState(spec.soc_min), spec) is Action.BUY
    assert rule_decide(obs(6, 2), None, None) is Action.BUY


def test_action_order():
    assert [a.name for a in Action] == [
        "BUY", "SELL", "SELF_CONSUME_ONLY", "CHARGE_AND_SELL", "CHARGE_AND_BUY", "DISCHARGE_AND_SELL",
        "DISCHARGE_AND_BUY", "SELF_UTILIZE_AND_CHARGE", "SELF_UTILIZE_AND_DISCHARGE",
    ]


def test_apply_balanced_self_consume(spec):
    flow, new, ok = apply_action(obs(3, 3), Action.SELF_CONSUME_ONLY, spec.initial_state(), spec)
    assert ok and flow == FlowDecision() and new == spec.initial_state()


def test_apply_charge_and_sell(spec):
    flow, new, ok = apply_action(obs(4, 10), Action.CHARGE_AND_SELL, spec.initial_state(), spec)
    assert ok
    assert flow.e_charge_bus == 5.0 and flow.e_sell == 1.0
    assert new.soc == pytest.approx(6.75 + 5 * 0.95)


def test_apply_discharge_and_sell_empty(spec):
    flow, new, ok = apply_action(obs(5, 0), Action.DISCHARGE_AND_SELL, BatteryState(spec.soc_min), spec)
    assert not ok
    assert flow.forced_purchase == 5.0 and flow.e_sell == 0.0
    assert new.soc == spec.soc_min


def test_infeasible_cases(spec):
    mid = spec.initial_state()
    assert not apply_action(obs(2, 5), Action.BUY, mid, spec)[2]
    assert not apply_action(obs(5, 2), Action.SELL, mid, spec)[2]
    assert not apply_action(obs(5, 2), Action.CHARGE_AND_SELL, mid, spec)[2]
    assert not apply_action(obs(2, 5), Action.DISCHARGE_AND_BUY, mid, spec)[2]
    assert not apply_action(obs(2, 2), Action.CHARGE_AND_BUY, mid, None)[2]


def test_charge_and_buy(spec):
    flow, _, ok = apply_action(obs(6, 2), Action.CHARGE_AND_BUY, spec.initial_state(), spec)
    assert ok and flow.e_charge_bus == 5.0 and flow.e_buy == 9.0


def test_self_utilize_discharge_shortfall(spec):
    near_empty = BatteryState(spec.soc_min + 0.95)
    flow, new, ok = apply_action(obs(6, 2), Action.SELF_UTILIZE_AND_DISCHARGE, near_empty, spec)
    assert ok and flow.e_buy == 0.0
    assert flow.e_discharge_bus == pytest.approx(0.9025)
    assert flow.forced_purchase == pytest.approx(4 - 0.9025)
    assert new.soc == pytest.approx(spec.soc_min)


levels = st.floats(0.0, 30.0)


@given(levels, levels, st.floats(0.0, 1.0), st.integers(0, 8), st.booleans())
def test_energy_balance(load, gen, frac, action, has_battery):
    spec = BatterySpec() if has_battery else None
    state = BatteryState(spec.soc_min + frac * (spec.soc_max - spec.soc_min)) if spec else None
    o = AgentObservation(load, gen, frac, 0)
    flow, new, _ = apply_action(o, action, state, spec)
    assert abs(flow.imbalance(load, gen)) <= 1e-9
    values = (flow.e_buy, flow.e_sell, flow.e_charge_bus, flow.e_discharge_bus, flow.e_curtailed,
              flow.forced_purchase)
    assert min(values) >= 0
    assert flow.e_buy == 0 or flow.e_sell == 0
    assert flow.e_charge_bus == 0 or flow.e_discharge_bus == 0
    if spec:
        assert spec.soc_min <= new.soc <= spec.soc_max


def test_reward_examples(tariff):
    assert reward(FlowDecision(e_buy=3), False, 10, 0.09, 0.21, tariff, HP) == -5.0
    assert reward(FlowDecision(e_sell=2), True, 10, 0.13846, 0.21, tariff, HP) == pytest.approx(0.27692)
    assert reward(FlowDecision(e_buy=3), True, 17, 0.09, 0.30, tariff, HP) == pytest.approx(-1.20)
    assert reward(FlowDecision(forced_purchase=3), True, 17, 0.09, 0.30, tariff, HP) == pytest.approx(-1.20)


EDGES = np.arange(1.0, 8.0)
D = Discretizer(EDGES, EDGES)


def test_discretize_extremes():
    assert D.n_states == 15360
    assert discretize(AgentObservation(0, 0, 0.0, 0), D) == 0
    assert discretize(AgentObservation(100, 100, 1.0, 23), D) == 15359


def test_discretize_edge_goes_to_lower_bin():
    assert discretize(AgentObservation(1.0, 0, 0.0, 0), D) == 0
    assert discretize(AgentObservation(1.5, 0, 0.0, 0), D) == 8


@given(levels, levels, st.floats(0.0, 1.0), st.integers(0, 23))
def test_discretize_in_range(load, gen, frac, hour):
    assert 0 <= discretize(AgentObservation(load, gen, frac, hour), D) < 15360


def test_discretizer_edges_validated():
    with pytest.raises(ValueError):
        Discretizer(np.ones(7), EDGES)
    with pytest.raises(ValueError):
        Discretizer(np.arange(6.0), EDGES)


def test_quantile_edges_with_many_zeros():
    gen = np.zeros(1000)
    gen[-100:] = np.linspace(1, 5, 100)
    d = Discretizer.from_profiles(np.linspace(0, 10, 1000), gen)
    assert np.all(np.diff(d.gen_bin_edges) > 0)
    assert N_ACTIONS == 9
