"""
cli/config.py - Run configuration (config.json) with safe defaults.

Every key is optional; a missing key keeps its default. Unknown keys are
ignored with a warning. Command-line flags override what is read here.
"""

from __future__ import annotations

import copy
import json
import logging
import os

from engine.search import SearchConfig
from model.trainer import TrainConfig
from networking.net_state import ProviderProfile, default_profiles, load_fleet
from settings import (
    BACKBONE_DEPTH, BASELINE_DECAY, CONTROLLER_LR, DEFAULT_FLEET_SIZE, DEFAULT_SHOTS, EXACT,
    GRAD_CLIP_NORM, RMSPROP_DECAY, SAMPLES_PER_EPISODE, SEARCH_EPISODES, SEARCH_LAMBDA,
    SEARCH_WORKERS, TRAIN_BATCH_SIZE, TRAIN_EPOCHS, TRAIN_LR, TRAIN_WEIGHT_DECAY,
)
from utils.base_path import CONFIG_FILE, resolve_data_dir

log = logging.getLogger("splitq.cli")

TRANSPORTS = ("loopback", "tcp", "remote")


class ConfigError(RuntimeError):
    """An explicitly requested config file is missing or unreadable."""


_DEFAULTS = {
    "dataset": "mnist2",
    "data_dir": "",
    "out_dir": "runs",
    "seed": 0,
    "shots": DEFAULT_SHOTS,
    "fleet": None,              # null -> built-in fleet, str -> fleet file, list -> inline
    "fleet_size": DEFAULT_FLEET_SIZE,
    "transport": "loopback",    # loopback | tcp (local daemons) | remote (profile endpoints)
    "log_dir": "",              # provider circuit logs, one JSONL per provider
    "search": {
        "episodes": SEARCH_EPISODES,
        "samples_per_episode": SAMPLES_PER_EPISODE,
        "lambda": SEARCH_LAMBDA,
        "baseline_decay": BASELINE_DECAY,
        "rmsprop_decay": RMSPROP_DECAY,
        "controller_lr": CONTROLLER_LR,
        "grad_clip": GRAD_CLIP_NORM,
        "depth": BACKBONE_DEPTH,
        "workers": SEARCH_WORKERS,
    },
    "train": {
        "epochs": TRAIN_EPOCHS,
        "batch_size": TRAIN_BATCH_SIZE,
        "lr": TRAIN_LR,
        "weight_decay": TRAIN_WEIGHT_DECAY,
    },
}


class RunConfig:
    """Loads and exposes config.json values with safe defaults."""

    def __init__(self, path: str | None = None, explicit: bool = False):
        self.path = path or CONFIG_FILE
        self._data = copy.deepcopy(_DEFAULTS)
        self._load(explicit)

    def _load(self, explicit: bool):
        if not os.path.exists(self.path):
            if explicit:
                raise ConfigError(f"config file not found: {self.path}")
            return
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                raw = json.load(f)
        except (json.JSONDecodeError, OSError) as e:
            if explicit:
                raise ConfigError(f"cannot read {self.path}: {e}") from e
            log.warning("ignoring %s: %s", self.path, e)
            return
        if not isinstance(raw, dict):
            raise ConfigError(f"{self.path}: top level must be an object")
        for k, v in raw.items():
            if k not in _DEFAULTS:
                log.warning("%s: unknown key %r ignored", self.path, k)
            elif isinstance(_DEFAULTS[k], dict):
                self._merge_section(k, v)
            else:
                self._data[k] = v

    def _merge_section(self, name: str, values):
        if not isinstance(values, dict):
            log.warning("%s: %r must be an object, keeping defaults", self.path, name)
            return
        for k, v in values.items():
            if k in _DEFAULTS[name]:
                self._data[name][k] = v
            else:
                log.warning("%s: unknown key %s.%s ignored", self.path, name, k)

    def set(self, key: str, value):
        """Flag override; None leaves the config value in place."""
        if value is None:
            return
        if "." in key:
            section, name = key.split(".", 1)
            self._data[section][name] = value
        else:
            self._data[key] = value

    def use_builtin_fleet(self, size: int):
        self._data["fleet"] = None
        self._data["fleet_size"] = size

    @property
    def dataset(self) -> str:
        return self._data["dataset"]

    def data_dir(self, explicit: str | None = None) -> str:
        """--data-dir > $QUMOS_DATA_DIR > $SPLITQ_DATA_DIR > config > <root>/data_files."""
        return resolve_data_dir(explicit, self._data["data_dir"])

    @property
    def out_dir(self) -> str:
        return self._data["out_dir"]

    @property
    def seed(self) -> int:
        return int(self._data["seed"])

    @property
    def shots(self):
        shots = self._data["shots"]
        return EXACT if shots == EXACT else int(shots)

    @property
    def fleet_size(self) -> int:
        return int(self._data["fleet_size"])

    @property
    def transport(self) -> str:
        transport = self._data["transport"]
        if transport not in TRANSPORTS:
            raise ConfigError(f"transport must be one of {TRANSPORTS}, got {transport!r}")
        return transport

    @property
    def log_dir(self) -> str | None:
        return self._data["log_dir"] or None

    @property
    def profiles(self) -> list[ProviderProfile]:
        fleet = self._data["fleet"]
        if fleet is None:
            return default_profiles(self.fleet_size)
        if isinstance(fleet, str):
            return load_fleet(fleet)
        return [ProviderProfile.from_dict(entry) for entry in fleet]

    @property
    def search(self) -> SearchConfig:
        s = self._data["search"]
        return SearchConfig(
            episodes=int(s["episodes"]), samples_per_episode=int(s["samples_per_episode"]),
            lam=float(s["lambda"]), baseline_decay=float(s["baseline_decay"]),
            rmsprop_decay=float(s["rmsprop_decay"]), controller_lr=float(s["controller_lr"]),
            grad_clip=float(s["grad_clip"]), depth=int(s["depth"]),
            fleet_size=self.fleet_size, dataset=self.dataset, shots=self.shots,
            workers=int(s["workers"]), seed=self.seed)

    @property
    def train(self) -> TrainConfig:
        t = self._data["train"]
        return TrainConfig(epochs=int(t["epochs"]), batch_size=int(t["batch_size"]),
                           lr=float(t["lr"]), weight_decay=float(t["weight_decay"]))

    def to_dict(self) -> dict:
        return copy.deepcopy(self._data)
