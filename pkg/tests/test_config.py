from pathlib import Path

import numpy as np
import pytest

from mapdes.config import (
    PRESET_FARMS, ConfigError, load_config, preset_community, preset_config_text, training_farm,
)
from mapdes.profiles import format_profile_csv, synth_pv_profile
from mapdes.simulator import AgentKind, Scenario

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def same_farms(a, b):
    assert len(a.farms) == len(b.farms)
    for x, y in zip(a.farms, b.farms):
        assert x.farm_id == y.farm_id and x.agent is y.agent and x.battery == y.battery
        assert x.dataset.load == y.dataset.load
        assert x.dataset.pv == y.dataset.pv
        assert x.dataset.wind == y.dataset.wind


def test_committed_config_reproduces_preset():
    assert (CONFIGS / "community.cfg").read_text() == preset_config_text(42)
    cfg = load_config(CONFIGS / "community.cfg")
    same_farms(cfg, preset_community(42))
    assert cfg.echo() == preset_community(42).echo()


def test_preset_shape():
    cfg = preset_community(42, horizon_hours=48)
    assert len(cfg.farms) == 10
    assert [f.agent for f in cfg.farms].count(AgentKind.Q) == 1
    assert cfg.farms[0].agent is AgentKind.Q
    for f, (_, _, pv) in zip(cfg.farms, PRESET_FARMS):
        assert 10 <= f.dataset.pv_capacity == pv <= 20
        assert f.dataset.wind_capacity == 10


def test_seed_override(tmp_path):
    a = load_config(CONFIGS / "community.cfg", seed=7)
    assert a.seed == 7
    assert a.farms[0].dataset.load != load_config(CONFIGS / "community.cfg").farms[0].dataset.load


def test_single_farm_config():
    cfg = load_config(CONFIGS / "farm.cfg")
    assert len(cfg.farms) == 1
    assert training_farm(cfg).agent is AgentKind.Q
    assert cfg.farms[0].dataset.load == preset_community(42).farms[0].dataset.load


def test_csv_profiles_and_no_battery(tmp_path):
    pv = synth_pv_profile(12.0, 3, horizon_hours=48)
    (tmp_path / "pv.csv").write_text(format_profile_csv(pv))
    (tmp_path / "c.cfg").write_text(
        "[community]\nhorizon_hours = 48\n\n[tariff]\npeak_window = 18-20\n\n"
        "[farm.3]\nannual_load_kwh = 100\npv_csv = pv.csv\nwind_kw = 5\nbattery = no\n")
    cfg = load_config(tmp_path / "c.cfg", scenario=Scenario.RE_NO_P2P)
    f = cfg.farms[0]
    assert f.farm_id == 3 and f.battery is None and f.agent is AgentKind.RULE
    assert np.array_equal(f.dataset.pv.values, pv.values)
    assert cfg.tariff.peak_window == (18, 20)
    assert cfg.scenario is Scenario.RE_NO_P2P


@pytest.mark.parametrize("body", [
    "[community]\nseed = 1\n",
    "[farm.0]\nagent = sarsa\n",
    "[farm.0]\npv_kw = -1\n",
    "[tariff]\npeak_window = five\n[farm.0]\n",
    "[farm.0]\nload_csv = missing.csv\n",
    "not an ini file",
])
def test_bad_configs(tmp_path, body):
    path = tmp_path / "bad.cfg"
    path.write_text(body)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_training_farm_requires_q_agent(tmp_path):
    path = tmp_path / "two.cfg"
    path.write_text("[community]\nhorizon_hours = 24\n[farm.0]\n[farm.1]\n")
    with pytest.raises(ConfigError):
        training_farm(load_config(path))
