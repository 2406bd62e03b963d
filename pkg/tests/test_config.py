import json

import pytest

from fgwk.config import DEFAULTS, SEED_ENV, RunConfig
from fgwk.ensemble import Variant
from fgwk.exceptions import ConfigurationError


def test_defaults_resolve_desk_widths():
    cfg = RunConfig()
    assert cfg.proj_width(Variant.BASE) == 96
    assert cfg.proj_width(Variant.LION_FPN) == 64
    params = cfg.estimator_params("lion")
    assert params["optimizer"] == "lion" and params["lr"] == 3e-4 and params["beta2"] == 0.99


def test_absolute_scale_keeps_width():
    cfg = RunConfig.from_dict({"fpn_scale": "absolute", "fpn_size": 40}, env=False)
    assert cfg.proj_width(Variant.BASE) == 40


@pytest.mark.parametrize("data,key", [
    ({"dataset": {"classes": []}}, "classes"),
    ({"epochs": -1}, "epochs"),
    ({"bogus": 1}, "bogus"),
    ({"optimizer": {"lion": {"beta1": 1.5}}}, "optimizer.lion.beta1"),
    ({"optimizer": {"sgd": {"lr": 0}}}, "optimizer.sgd.lr"),
    ({"fpn_scale": "huge"}, "fpn_scale"),
    ({"dataset": {"val_fraction": 0}}, "val_fraction"),
])
def test_errors_name_the_key(data, key):
    with pytest.raises(ConfigurationError) as err:
        RunConfig.from_dict(data, env=False)
    assert err.value.key == key


def test_seed_env_override(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "42")
    cfg = RunConfig.from_dict({"seed": 1})
    assert cfg.raw["seed"] == 42 and cfg.dataset_spec().seed == 42
    monkeypatch.setenv(SEED_ENV, "x")
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict({})


def test_variant_seeds_distinct():
    cfg = RunConfig.from_dict({"seed": 10}, env=False)
    seeds = [cfg.estimator_params(v)["random_state"] for v in Variant]
    assert seeds[0] == 10 and len(set(seeds)) == 3


def test_overrides():
    cfg = RunConfig().with_overrides(epochs=0, lr=0.5, batch_size=None)
    assert cfg.raw["epochs"] == 0 and cfg.raw["batch_size"] == DEFAULTS["batch_size"]
    assert cfg.estimator_params("base")["lr"] == 0.5


def test_shipped_configs_load(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    desk = RunConfig.load(root / "desk.json")
    default = RunConfig.from_dict({}, env=False)
    assert desk.dataset_spec() == default.dataset_spec()
    for v in Variant:
        assert desk.estimator_params(v) == default.estimator_params(v)
    full = RunConfig.load(root / "full.json")
    assert full.raw["epochs"] == 100
    assert full.estimator_params("lion")["lr"] == 5e-6
    assert full.estimator_params("base")["lr"] == 5e-4


def test_load_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        RunConfig.load(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigurationError):
        RunConfig.load(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text(json.dumps([1]))
    with pytest.raises(ConfigurationError):
        RunConfig.load(tmp_path / "list.json")
