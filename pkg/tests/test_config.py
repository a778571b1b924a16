import json

import pytest

from aosivision.config import ENV_VAR, SessionConfig, from_dict, load_config
from aosivision.errors import ConfigError


def test_defaults():
    cfg = SessionConfig()
    assert cfg.fps == 30 and cfg.k == 3 and cfg.tau == 45 and cfg.rho == 3
    assert cfg.grid.translation_offsets() == list(range(-10, 11))
    assert cfg.grid.scales == (0.9, 1.0, 1.1)
    assert cfg.attention.eta == 0.15


@pytest.mark.parametrize("bad", [{"fps": 0}, {"k": -1}, {"eps": 0}, {"delta": -0.1},
                                 {"tau": 0}, {"scales": []}, {"k": 2.5}, {"eta": 1.5},
                                 {"nonsense": 1}, {"sigma": 0}])
def test_invalid(bad):
    with pytest.raises(ConfigError):
        from_dict(bad)


def test_round_trip():
    cfg = SessionConfig(fps=25, delta=0.2, scales=(1.0,))
    assert from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_load_and_env(tmp_path, monkeypatch):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"fps": 60, "k": 5}))
    assert load_config(p).fps == 60
    monkeypatch.setenv(ENV_VAR, str(p))
    assert load_config().k == 5
    monkeypatch.delenv(ENV_VAR)
    assert load_config() == SessionConfig()


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_replace_validates():
    with pytest.raises(ConfigError):
        SessionConfig().replace(fps=-1)
