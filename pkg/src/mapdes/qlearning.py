"""Tabular Q-learning for a single farm agent.

The agent is trained on its own farm against the grid tariff and feed-in
price, one simulated day per episode, and the resulting table is later
plugged into the community simulation where it acts greedily.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from typing import Optional, Protocol

import numpy as np

from .agents import (
    N_ACTIONS, N_HOURS, N_LEVEL_BINS, N_SOC_BINS, AgentObservation, Discretizer, apply_action,
    discretize, reward, soc_bin, state_index,
)
from .battery import BatterySpec
from .pricing import FeedInPrice, TimeOfUseTariff, rate_at
from .profiles import FarmDataset, make_rng

QTABLE_HEADER = "MAPDES-QTABLE v1"
CURVE_WINDOW = 200


class EmptyProfile(ValueError):
    pass


class QTableError(Exception):
    """Base class for Q-table persistence failures."""


class IoFailure(QTableError):
    pass


class FormatVersionMismatch(QTableError):
    pass


class DimensionMismatch(QTableError):
    pass


@dataclass(frozen=True)
class Hyperparameters:
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.99
    epsilon_min: float = 0.01
    episodes: int = 300_000
    invalid_penalty: float = 5.0
    peak_weight: float = 0.1

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0 < self.epsilon_decay <= 1:
            raise ValueError("epsilon_decay must lie in (0, 1]")
        if not (0 <= self.epsilon_min <= 1 and 0 <= self.epsilon_start <= 1):
            raise ValueError("epsilon values must be probabilities")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")


@dataclass(eq=False)
class QTable:
    values: np.ndarray
    discretizer: Discretizer
    hp: Hyperparameters

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.discretizer.n_states, N_ACTIONS):
            raise DimensionMismatch(
                f"table shape {self.values.shape} does not match ({self.discretizer.n_states}, {N_ACTIONS})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Q-table contains non-finite entries")

    def greedy_policy(self) -> np.ndarray:
        return np.argmax(self.values, axis=1)

    def greedy_action(self, obs: AgentObservation) -> int:
        return int(np.argmax(self.values[discretize(obs, self.discretizer)]))


def select_action(q_row, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; exploitation breaks ties toward the lowest index."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(len(q_row)))
    return int(np.argmax(q_row))


def q_update(q: np.ndarray, s: int, a: int, r: float, s_next: Optional[int], hp: Hyperparameters) -> float:
    """One Q-learning step on ``q`` in place; ``s_next=None`` marks a terminal transition."""
    bootstrap = 0.0 if s_next is None else float(np.max(q[s_next]))
    new = (1.0 - hp.alpha) * q[s, a] + hp.alpha * (r + hp.gamma * bootstrap)
    q[s, a] = new
    return new


class Environment(Protocol):
    n_states: int

    def reset(self, episode: int) -> int: ...

    def step(self, action: int) -> tuple[float, Optional[int]]:
        """Apply ``action``; returns the reward and the next state, or None once the episode ends."""
        ...


def q_learning(env: Environment, hp: Hyperparameters, rng: np.random.Generator,
               n_actions: int = N_ACTIONS):
    """Run ``hp.episodes`` episodes; returns the table and per-episode total rewards."""
    q = np.zeros((env.n_states, n_actions))
    curve = np.zeros(hp.episodes)
    epsilon = hp.epsilon_start
    for episode in range(hp.episodes):
        s = env.reset(episode)
        total = 0.0
        while s is not None:
            a = select_action(q[s], epsilon, rng)
            r, s_next = env.step(a)
            q_update(q, s, a, r, s_next, hp)
            total += r
            s = s_next
        curve[episode] = total
        epsilon = max(epsilon * hp.epsilon_decay, hp.epsilon_min)
    return q, curve


class FarmEnvironment:
    """One farm trading alone with the grid, one day per episode.

    Episode ``k`` replays day ``k mod n_days`` of the farm's year, starting
    with the battery at its initial state of charge. Purchases are charged
    at the time-of-use rate and sales earn the feed-in price.
    """

    def __init__(self, farm: FarmDataset, spec: Optional[BatterySpec], tariff: TimeOfUseTariff,
                 fit: FeedInPrice, hp: Hyperparameters, discretizer: Discretizer):
        if farm.horizon_hours < N_HOURS:
            raise EmptyProfile(f"farm {farm.farm_id}: profiles cover less than one day")
        self.spec = spec
        self.tariff = tariff
        self.hp = hp
        self.lambda_sell = fit.lambda_sell
        self.n_states = discretizer.n_states
        self.n_days = farm.horizon_hours // N_HOURS
        self._load = farm.load.values.tolist()
        self._gen = farm.generation.tolist()
        self._load_bin = discretizer.load_bins(farm.load.values).tolist()
        self._gen_bin = discretizer.gen_bins(farm.generation).tolist()
        self._rates = tariff.hourly_rates()
        self._t0 = 0
        self._hour = 0
        self.battery = None

    def _state(self) -> int:
        t = self._t0 + self._hour
        frac = self.battery.fraction(self.spec) if self.spec is not None else 0.0
        return state_index(self._hour, soc_bin(frac), self._load_bin[t], self._gen_bin[t])

    def reset(self, episode: int) -> int:
        self._t0 = (episode % self.n_days) * N_HOURS
        self._hour = 0
        self.battery = self.spec.initial_state() if self.spec is not None else None
        return self._state()

    def step(self, action: int):
        t = self._t0 + self._hour
        frac = self.battery.fraction(self.spec) if self.spec is not None else 0.0
        obs = AgentObservation(self._load[t], self._gen[t], min(frac, 1.0), self._hour)
        flow, self.battery, feasible = apply_action(obs, action, self.battery, self.spec)
        r = reward(flow, feasible, self._hour, self.lambda_sell, self._rates[self._hour], self.tariff, self.hp)
        self._hour += 1
        if self._hour == N_HOURS:
            return r, None
        return r, self._state()


def train(farm: FarmDataset, spec: Optional[BatterySpec], tariff: TimeOfUseTariff, fit: FeedInPrice,
          hp: Hyperparameters, seed: int):
    """Train a table for ``farm``; returns ``(QTable, per-episode total rewards)``."""
    if farm.horizon_hours < N_HOURS:
        raise EmptyProfile(f"farm {farm.farm_id}: profiles cover less than one day")
    fit.check_against(tariff)
    discretizer = Discretizer.from_profiles(farm.load.values, farm.generation)
    env = FarmEnvironment(farm, spec, tariff, fit, hp, discretizer)
    values, curve = q_learning(env, hp, make_rng(seed))
    return QTable(values, discretizer, hp), curve


def moving_average(curve, window: int = CURVE_WINDOW) -> np.ndarray:
    """Trailing mean over the last ``window`` entries (fewer at the start)."""
    curve = np.asarray(curve, dtype=np.float64)
    csum = np.concatenate(([0.0], np.cumsum(curve)))
    idx = np.arange(1, curve.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def format_learning_curve(curve) -> str:
    avg = moving_average(curve)
    lines = ["episode,total_reward,moving_avg_200"]
    lines.extend(f"{i},{float(r)!r},{float(m)!r}" for i, (r, m) in enumerate(zip(curve, avg)))
    return "\n".join(lines) + "\n"


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_qtable(q: QTable) -> str:
    d = q.discretizer
    lines = [
        QTABLE_HEADER,
        "load_edges," + ",".join(repr(float(x)) for x in d.load_bin_edges),
        "gen_edges," + ",".join(repr(float(x)) for x in d.gen_bin_edges),
        f"shape,{N_HOURS},{N_SOC_BINS},{N_LEVEL_BINS},{N_LEVEL_BINS},{N_ACTIONS}",
        "hyperparameters," + ",".join(f"{k}={v!r}" for k, v in asdict(q.hp).items()),
        f"states,{d.n_states}",
    ]
    for s, row in enumerate(q.values):
        lines.append(f"{s}," + ",".join(repr(float(v)) for v in row))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_qtable(q: QTable, path) -> None:
    try:
        _atomic_write(path, format_qtable(q))
    except OSError as exc:
        raise IoFailure(f"cannot write Q-table to {path}: {exc}") from exc


def _parse_hp(cells) -> Hyperparameters:
    kinds = {f.name: f.type for f in fields(Hyperparameters)}
    kwargs = {}
    for cell in cells:
        key, _, raw = cell.partition("=")
        if key not in kinds:
            raise FormatVersionMismatch(f"unknown hyperparameter {key!r}")
        kwargs[key] = int(raw) if kinds[key] in (int, "int") else float(raw)
    return Hyperparameters(**kwargs)


def load_qtable(path) -> QTable:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read Q-table {path}: {exc}") from exc
    if not lines or lines[0] != QTABLE_HEADER:
        raise FormatVersionMismatch(f"{path}: missing or unsupported header (expected {QTABLE_HEADER!r})")
    if len(lines) < 6:
        raise IoFailure(f"{path}: truncated header")
    try:
        keys = [line.split(",", 1)[0] for line in lines[1:6]]
        if keys != ["load_edges", "gen_edges", "shape", "hyperparameters", "states"]:
            raise FormatVersionMismatch(f"{path}: unexpected header fields {keys}")
        load_edges = [float(x) for x in lines[1].split(",")[1:]]
        gen_edges = [float(x) for x in lines[2].split(",")[1:]]
        shape = tuple(int(x) for x in lines[3].split(",")[1:])
        hp = _parse_hp(lines[4].split(",")[1:])
        n_states = int(lines[5].split(",")[1])
    except ValueError as exc:
        raise FormatVersionMismatch(f"{path}: malformed header: {exc}") from exc
    if shape != (N_HOURS, N_SOC_BINS, N_LEVEL_BINS, N_LEVEL_BINS, N_ACTIONS):
        raise DimensionMismatch(f"{path}: table shape {shape} is not supported")
    try:
        discretizer = Discretizer(load_edges, gen_edges)
    except ValueError as exc:
        raise DimensionMismatch(f"{path}: {exc}") from exc
    if n_states != discretizer.n_states:
        raise DimensionMismatch(f"{path}: {n_states} states declared, expected {discretizer.n_states}")

    body = lines[6:]
    if not body or body[-1] != "end" or len(body) != n_states + 1:
        raise IoFailure(f"{path}: truncated or padded table body")
    values = np.empty((n_states, N_ACTIONS))
    for expected, line in enumerate(body[:-1]):
        cells = line.split(",")
        if len(cells) != N_ACTIONS + 1:
            raise DimensionMismatch(f"{path}: row {expected} has {len(cells) - 1} values")
        try:
            if int(cells[0]) != expected:
                raise IoFailure(f"{path}: row {expected} is labelled {cells[0]}")
            values[expected] = [float(c) for c in cells[1:]]
        except ValueError as exc:
            raise IoFailure(f"{path}: unreadable row {expected}: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise IoFailure(f"{path}: non-finite Q values")
    return QTable(values, discretizer, hp)


def greedy_reward_per_day(q: QTable, env: FarmEnvironment, days=None) -> float:
    """Mean daily reward of the greedy policy over ``days`` (default: the whole year)."""
    days = range(env.n_days) if days is None else days
    totals = []
    for day in days:
        s = env.reset(day)
        total = 0.0
        while s is not None:
            r, s = env.step(int(np.argmax(q.values[s])))
            total += r
        totals.append(total)
    return math.fsum(totals) / len(totals)
