"""Flat INI configuration with [scenario], [model], and [train] sections.

Every simulation and training knob is a named key with the default
values of the 100-node reference setup; unknown sections or keys are
rejected by name.
"""
from __future__ import annotations

from configparser import ConfigParser, ParsingError
from dataclasses import dataclass, field, fields

from .mobility import ConfigError, ScenarioConfig
from .model import ModelDims
from .training import LossConfig, TrainConfig

_SCENARIO_KEYS = {
    "num_uavs": int,
    "area_km2": float,
    "speed_min": float,
    "speed_max": float,
    "comm_radius_min": float,
    "comm_radius_max": float,
    "duration": float,
    "sampling_interval": float,
    "mobility_model": str,
    "snr_mean": float,
    "snr_std": float,
    "warmup_steps": int,
    "seed": int,
    "epoch_s": float,
    "mg_spacing": float,
    "mg_p_straight": float,
    "mg_p_left": float,
    "mg_p_right": float,
    "rpg_groups": int,
    "rpg_member_radius": float,
    "gm_alpha": float,
    "gm_mean_speed": float,
    "gm_sigma_speed": float,
    "gm_sigma_heading": float,
    "gm_margin": float,
}
_SCENARIO_RENAME = {"seed": "rng_seed"}

_MODEL_KEYS = {
    "gat_hidden": int,
    "feature_dim": int,
    "lstm_hidden": int,
    "lstm_layers": int,
    "decoder_hidden": int,
}

_TRAIN_KEYS = {
    "epochs": int,
    "window": int,
    "train_samples": int,
    "seed": int,
    "learning_rate": float,
    "epsilon": float,
    "beta": float,
    "eta": float,
    "lambda": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "early_stop_patience": int,
    "early_stop_min_delta": float,
}
_TRAIN_RENAME = {"train_samples": "n_train"}
_LOSS_KEYS = {"epsilon": "epsilon", "beta": "beta", "eta": "eta", "lambda": "lam"}


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)

    def dims(self, nodes: int | None = None, scales=None) -> ModelDims:
        kwargs = dict(self.model)
        if scales is not None:
            kwargs["scales"] = tuple(scales)
        return ModelDims(nodes=self.scenario.num_uavs if nodes is None else nodes, **kwargs)

    def validate(self) -> None:
        self.scenario.validate()
        self.train.validate()
        dims = self.dims()
        dims.validate()
        if self.train.window > self.scenario.num_snapshots:
            raise ConfigError(
                f"window {self.train.window} exceeds the {self.scenario.num_snapshots} "
                "snapshots the scenario produces")

    def echo(self) -> list[str]:
        """The effective configuration, one `section.key = value` per line."""
        lines = []
        for f in fields(self.scenario):
            lines.append(f"scenario.{f.name} = {getattr(self.scenario, f.name)}")
        dims = self.dims()
        for key in _MODEL_KEYS:
            lines.append(f"model.{key} = {getattr(dims, key)}")
        for f in fields(self.train):
            if f.name == "loss":
                continue
            lines.append(f"train.{f.name} = {getattr(self.train, f.name)}")
        for key, attr in _LOSS_KEYS.items():
            lines.append(f"train.{key} = {getattr(self.train.loss, attr)}")
        return lines


def _parse_section(parser: ConfigParser, section: str, allowed: dict) -> dict:
    if not parser.has_section(section):
        return {}
    out = {}
    for key, raw in parser.items(section):
        if key not in allowed:
            raise ConfigError(
                f"unknown key '{key}' in [{section}]; valid keys: {', '.join(sorted(allowed))}")
        conv = allowed[key]
        try:
            out[key] = conv(raw) if conv is not str else raw.strip()
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: expected {conv.__name__}") from exc
    return out


def load_config(path) -> RunConfig:
    """Parse an INI file into a RunConfig; missing keys keep defaults."""
    parser = ConfigParser()
    try:
        read = parser.read(path, encoding="utf-8")
    except ParsingError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")
    known = {"scenario", "model", "train"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(
            f"unknown section(s) {sorted(unknown)}; valid sections: {sorted(known)}")

    scenario_kwargs = {
        _SCENARIO_RENAME.get(k, k): v
        for k, v in _parse_section(parser, "scenario", _SCENARIO_KEYS).items()
    }
    model_kwargs = _parse_section(parser, "model", _MODEL_KEYS)
    train_raw = _parse_section(parser, "train", _TRAIN_KEYS)

    loss_kwargs = {_LOSS_KEYS[k]: train_raw.pop(k) for k in list(train_raw) if k in _LOSS_KEYS}
    train_kwargs = {_TRAIN_RENAME.get(k, k): v for k, v in train_raw.items()}

    cfg = RunConfig(
        scenario=ScenarioConfig(**scenario_kwargs),
        model=model_kwargs,
        train=TrainConfig(loss=LossConfig(**loss_kwargs), **train_kwargs),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
