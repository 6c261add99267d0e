import os
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapdes.agents import N_ACTIONS, AgentObservation, Discretizer
from mapdes.profiles import FarmDataset, HourlyProfile, make_rng
from mapdes.qlearning import (
    QTABLE_HEADER, DimensionMismatch, EmptyProfile, FormatVersionMismatch, Hyperparameters, IoFailure,
    QTable, format_learning_curve, format_qtable, load_qtable, moving_average, q_learning, q_update,
    save_qtable, select_action, train,
)
from toy_mdp import N_TOY_ACTIONS, ToyDay, value_iteration

HP = Hyperparameters()


def test_default_hyperparameters():
    assert (HP.alpha, HP.gamma, HP.epsilon_start, HP.epsilon_decay) == (0.1, 0.99, 1.0, 0.99)
    assert HP.episodes == 300_000
    assert (HP.epsilon_min, HP.invalid_penalty, HP.peak_weight) == (0.01, 5.0, 0.1)


@pytest.mark.parametrize("kwargs", [dict(alpha=0), dict(alpha=1.5), dict(gamma=1.0), dict(epsilon_decay=0),
                                    dict(episodes=-1)])
def test_hyperparameter_validation(kwargs):
    with pytest.raises(ValueError):
        Hyperparameters(**kwargs)


def test_select_action_greedy():
    rng = make_rng(0)
    assert select_action(np.zeros(9), 0.0, rng) == 0
    row = np.zeros(9)
    row[5] = 1.0
    assert select_action(row, 0.0, rng) == 5
    row[2] = 1.0
    assert select_action(row, 0.0, rng) == 2


def test_select_action_uniform():
    rng = make_rng(11)
    draws = np.array([select_action(np.arange(9.0), 1.0, rng) for _ in range(10_000)])
    freq = np.bincount(draws, minlength=9) / draws.size
    assert np.all(np.abs(freq - 1 / 9) <= 0.02)


@given(st.lists(st.floats(-100, 100), min_size=9, max_size=9), st.floats(-1e3, 1e3))
def test_argmax_invariant_under_shift(row, c):
    row = np.array(row)
    shifted = row + c
    # a shift can merge near-ties through rounding; compare only when the top two are separated
    top = np.sort(row)[-2:]
    if top[1] - top[0] > 1e-9 * max(1.0, abs(c)):
        assert select_action(row, 0.0, None) == select_action(shifted, 0.0, None)


def test_q_update_examples():
    q = np.zeros((2, 9))
    assert q_update(q, 0, 3, 1.0, 1, HP) == pytest.approx(0.1, abs=1e-15)
    q = np.zeros((2, 9))
    q[0, 3] = 1.0
    q[1, :] = 1.0
    assert q_update(q, 0, 3, 0.0, 1, HP) == pytest.approx(0.999, abs=1e-15)
    q = np.full((2, 9), 0.7)
    q_update(q, 0, 0, 50.0, 1, SimpleNamespace(alpha=0.0, gamma=0.99))
    assert q[0, 0] == 0.7


def test_q_update_terminal_does_not_bootstrap():
    q = np.ones((2, 9))
    q_update(q, 0, 0, 2.0, None, HP)
    assert q[0, 0] == pytest.approx(0.9 + 0.2)


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 8), st.floats(-1, 1), st.integers(0, 3)),
                max_size=200))
def test_q_bounded(updates):
    hp = Hyperparameters(gamma=0.9)
    q = np.zeros((4, 9))
    bound = 1.0 / (1 - hp.gamma)
    for s, a, r, s2 in updates:
        q_update(q, s, a, r, s2, hp)
    assert np.all(np.abs(q) <= bound + 1e-12)


def test_toy_day_matches_value_iteration():
    # 8 states: 4 hours x {empty, full}; pure exploration so every pair keeps being updated
    mdp = ToyDay(buy=[0.12, 0.21, 0.30, 0.12], sell=[0.09, 0.25, 0.40, 0.10])
    hp = Hyperparameters(alpha=0.1, gamma=0.99, epsilon_start=1.0, epsilon_decay=1.0, epsilon_min=1.0,
                         episodes=5000)
    q, _ = q_learning(mdp, hp, make_rng(3), n_actions=N_TOY_ACTIONS)
    oracle = value_iteration(mdp, hp.gamma)
    assert np.max(np.abs(q - oracle)) <= 1e-6
    assert np.array_equal(q.argmax(axis=1), oracle.argmax(axis=1))


def test_toy_day_default_schedule_policy():
    # 4 states: 2 hours x {empty, full}, trained with the default schedule
    mdp = ToyDay(buy=[0.12, 0.30], sell=[0.09, 0.40])
    hp = Hyperparameters(episodes=3000)
    q, curve = q_learning(mdp, hp, make_rng(8), n_actions=N_TOY_ACTIONS)
    oracle = value_iteration(mdp, hp.gamma)
    assert np.array_equal(q.argmax(axis=1), oracle.argmax(axis=1))
    assert len(curve) == 3000


def small_farm(days=3):
    h = 24 * days
    rng = np.random.default_rng(1)
    load = HourlyProfile(rng.uniform(0.5, 3.0, h), h)
    pv = HourlyProfile(np.tile(np.r_[np.zeros(7), np.linspace(0, 4, 5), np.linspace(4, 0, 5), np.zeros(7)], days), h)
    wind = HourlyProfile(rng.uniform(0, 2, h), h)
    return FarmDataset(0, load, pv, wind)


def test_train_deterministic(spec, tariff, fit):
    farm = small_farm()
    hp = Hyperparameters(episodes=300)
    qa, ca = train(farm, spec, tariff, fit, hp, 5)
    qb, cb = train(farm, spec, tariff, fit, hp, 5)
    assert qa.values.tobytes() == qb.values.tobytes()
    assert ca.tobytes() == cb.tobytes()
    qc, _ = train(farm, spec, tariff, fit, hp, 6)
    assert qc.values.tobytes() != qa.values.tobytes()


def test_train_zero_episodes(spec, tariff, fit):
    q, curve = train(small_farm(), spec, tariff, fit, Hyperparameters(episodes=0), 1)
    assert q.values.shape == (15360, N_ACTIONS)
    assert not q.values.any()
    assert len(curve) == 0
    assert format_learning_curve(curve) == "episode,total_reward,moving_avg_200\n"


def test_train_needs_a_day(spec, tariff, fit):
    h = 12
    p = HourlyProfile(np.ones(h), h)
    with pytest.raises(EmptyProfile):
        train(FarmDataset(0, p, p, p), spec, tariff, fit, Hyperparameters(episodes=1), 1)


def test_moving_average():
    curve = np.arange(1000.0)
    ma = moving_average(curve)
    assert ma[0] == 0.0
    assert ma[1] == 0.5
    assert ma[999] == pytest.approx(np.mean(curve[800:]))
    lines = format_learning_curve(curve[:3]).splitlines()
    assert lines[0] == "episode,total_reward,moving_avg_200"
    assert lines[2] == "1,1.0,0.5"


@pytest.fixture(scope="module")
def trained(request):
    from mapdes.battery import BatterySpec
    from mapdes.pricing import FeedInPrice, TimeOfUseTariff
    q, _ = train(small_farm(), BatterySpec(), TimeOfUseTariff(), FeedInPrice(), Hyperparameters(episodes=500), 2)
    return q


def test_save_load_exact(trained, tmp_path):
    path = tmp_path / "q.tbl"
    save_qtable(trained, path)
    again = load_qtable(path)
    assert again.values.tobytes() == trained.values.tobytes()
    assert again.discretizer == trained.discretizer
    assert again.hp == trained.hp
    assert np.array_equal(again.greedy_policy(), trained.greedy_policy())
    assert format_qtable(again) == path.read_text()
    assert path.read_text().startswith(QTABLE_HEADER + "\n")


def test_greedy_action_uses_discretizer(trained):
    o = AgentObservation(1.0, 2.0, 0.5, 13)
    from mapdes.agents import discretize
    assert trained.greedy_action(o) == int(np.argmax(trained.values[discretize(o, trained.discretizer)]))


@pytest.mark.parametrize("cut", [0, 5, 200, -30, -4])
def test_truncated_file_rejected(trained, tmp_path, cut):
    text = format_qtable(trained)
    path = tmp_path / "q.tbl"
    path.write_text(text[:cut] if cut else "")
    with pytest.raises((FormatVersionMismatch, IoFailure)):
        load_qtable(path)


def test_wrong_version(trained, tmp_path):
    path = tmp_path / "q.tbl"
    path.write_text(format_qtable(trained).replace("v1", "v2", 1))
    with pytest.raises(FormatVersionMismatch):
        load_qtable(path)


def test_wrong_shape(trained, tmp_path):
    path = tmp_path / "q.tbl"
    path.write_text(format_qtable(trained).replace("shape,24,10,8,8,9", "shape,24,10,8,8,7", 1))
    with pytest.raises(DimensionMismatch):
        load_qtable(path)


def test_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        load_qtable(tmp_path / "nope.tbl")


def test_save_is_atomic(trained, tmp_path):
    path = tmp_path / "q.tbl"
    save_qtable(trained, path)
    assert os.listdir(tmp_path) == ["q.tbl"]


def test_qtable_dimension_check():
    d = Discretizer(np.arange(1.0, 8.0), np.arange(1.0, 8.0))
    with pytest.raises(DimensionMismatch):
        QTable(np.zeros((10, 9)), d, HP)
