"""Run configuration: one JSON file, optional CLI overrides, ``FGWK_SEED`` env override."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .combiner import resolve_fpn_size
from .ensemble import Variant
from .exceptions import ConfigurationError
from .selector import SelectionSchedule
from .synthdata import DatasetSpec

SEED_ENV = "FGWK_SEED"

DEFAULTS = {
    "seed": 0,
    "corpus_dir": "corpus",
    "output_dir": "runs",
    "dataset": {},
    "backbone": {"base_channels": 16},
    "selections": [32, 16, 8, 4],
    "fpn_size": 1536,
    "variant_fpn_size": 1024,
    "fpn_scale": "desk",
    "optimizer": {
        "sgd": {"lr": 0.02, "momentum": 0.9},
        "lion": {"lr": 3e-4, "beta1": 0.9, "beta2": 0.99, "weight_decay": 0.0},
    },
    "batch_size": 16,
    "epochs": 30,
}

_OPT_KEYS = {"sgd": {"lr", "momentum"}, "lion": {"lr", "beta1", "beta2", "weight_decay"}}


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        key = f"{path}{k}"
        if k not in base and path != "dataset.":
            raise ConfigurationError(key, "unknown configuration key")
        if isinstance(v, dict) and isinstance(base.get(k), dict) and path + k != "dataset":
            out[k] = _merge(base[k], v, f"{key}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: Path | None = None

    def __post_init__(self):
        self.validate()

    # -- construction ------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict, source=None, env: bool = True) -> "RunConfig":
        raw = _merge(DEFAULTS, data)
        if env and os.environ.get(SEED_ENV):
            try:
                raw["seed"] = int(os.environ[SEED_ENV])
            except ValueError:
                raise ConfigurationError(SEED_ENV, f"not an integer: {os.environ[SEED_ENV]!r}") from None
        return cls(raw, Path(source) if source else None)

    @classmethod
    def load(cls, path, env: bool = True) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigurationError("config", f"file {path} does not exist")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError("config", f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config", "top level must be an object")
        return cls.from_dict(data, path, env)

    def with_overrides(self, **overrides) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "lr":
                for block in raw["optimizer"].values():
                    block["lr"] = value
            elif key in raw:
                raw[key] = value
            else:
                raise ConfigurationError(key, "unknown override")
        return RunConfig(raw, self.source)

    # -- validation ----------------------------------------------------------------
    def validate(self) -> None:
        r = self.raw
        if not isinstance(r["seed"], int) or r["seed"] < 0:
            raise ConfigurationError("seed", f"must be a non-negative integer, got {r['seed']!r}")
        self.dataset_spec()
        SelectionSchedule(tuple(r["selections"]))
        if r["fpn_scale"] not in ("desk", "absolute"):
            raise ConfigurationError("fpn_scale", "must be 'desk' or 'absolute'")
        for key in ("fpn_size", "variant_fpn_size"):
            if not isinstance(r[key], int) or r[key] <= 0:
                raise ConfigurationError(key, f"must be a positive integer, got {r[key]!r}")
        for kind, block in r["optimizer"].items():
            if kind not in _OPT_KEYS:
                raise ConfigurationError(f"optimizer.{kind}", "expected 'sgd' or 'lion'")
            extra = set(block) - _OPT_KEYS[kind]
            if extra:
                raise ConfigurationError(f"optimizer.{kind}.{sorted(extra)[0]}", "unknown key")
            if block.get("lr", 1) <= 0:
                raise ConfigurationError(f"optimizer.{kind}.lr", "must be positive")
        lion = r["optimizer"]["lion"]
        for beta in ("beta1", "beta2"):
            if not 0 <= lion.get(beta, 0.9) < 1:
                raise ConfigurationError(f"optimizer.lion.{beta}", "must lie in [0, 1)")
        if not isinstance(r["batch_size"], int) or r["batch_size"] < 1:
            raise ConfigurationError("batch_size", "must be a positive integer")
        if not isinstance(r["epochs"], int) or r["epochs"] < 0:
            raise ConfigurationError("epochs", "must be a non-negative integer")
        if not isinstance(r["backbone"].get("base_channels"), int) or r["backbone"]["base_channels"] < 1:
            raise ConfigurationError("backbone.base_channels", "must be a positive integer")

    # -- views -------------------------------------------------------------------------
    def dataset_spec(self) -> DatasetSpec:
        d = dict(self.raw["dataset"])
        if "seed" in d:
            raise ConfigurationError("dataset.seed", "set the top-level 'seed' instead")
        d["seed"] = self.raw["seed"]
        return DatasetSpec.from_dict(d)

    def proj_width(self, variant: Variant) -> int:
        value = self.raw["variant_fpn_size" if variant is Variant.LION_FPN else "fpn_size"]
        return resolve_fpn_size(value, self.raw["fpn_scale"])

    def estimator_params(self, variant: Variant | str) -> dict:
        variant = Variant(variant)
        r = self.raw
        opt = dict(r["optimizer"][variant.optimizer])
        params = {
            "base_channels": r["backbone"]["base_channels"],
            "selections": tuple(r["selections"]),
            "fpn_size": self.proj_width(variant),
            "optimizer": variant.optimizer,
            "lr": opt.pop("lr"),
            "batch_size": r["batch_size"],
            "epochs": r["epochs"],
            "random_state": r["seed"] + variant.seed_offset,
        }
        params.update(opt)
        return params

    def snapshot(self) -> dict:
        return copy.deepcopy(self.raw)
