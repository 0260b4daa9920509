"""Run configuration and its ``key = value`` file form (INI sections arch/loss/train/data)."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from ..losses import LossConfig
from ..model import ArchConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    sample_count: int = 3000
    batch_pairs: int = 8
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 1
    max_steps: int | None = None
    seed: int = 0
    flip_axis: int = 0
    checkpoint_every: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)

    def __post_init__(self):
        if self.sample_count < 1 or self.batch_pairs < 1 or self.epochs < 0:
            raise ConfigError("sample_count and batch_pairs must be positive, epochs non-negative")
        if not self.lr > 0 or not self.adam_eps > 0:
            raise ConfigError("lr and adam_eps must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.max_steps is not None and self.max_steps < 0:
            raise ConfigError("max_steps must be non-negative")
        if self.flip_axis not in (0, 1, 2):
            raise ConfigError("flip_axis must be 0, 1 or 2")

    def with_mode(self, mode: str) -> "TrainConfig":
        return dataclasses.replace(self, loss=dataclasses.replace(self.loss, mode=mode))


_TRAIN_KEYS = {
    "sample_count": int,
    "batch_pairs": int,
    "lr": float,
    "adam_beta1": float,
    "adam_beta2": float,
    "adam_eps": float,
    "epochs": int,
    "max_steps": int,
    "seed": int,
    "flip_axis": int,
    "checkpoint_every": int,
}


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.replace(" ", "").split(",") if x)


def parse_config(text: str) -> TrainConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    unknown = set(cp.sections()) - {"arch", "loss", "train", "data"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        kw = {}
        if cp.has_section("train"):
            for key, value in cp.items("train"):
                if key not in _TRAIN_KEYS:
                    raise ConfigError(f"unknown key train.{key}")
                kw[key] = None if value.lower() in ("", "none") else _TRAIN_KEYS[key](value)
        lk = {}
        if cp.has_section("loss"):
            for key, value in cp.items("loss"):
                if key == "tau":
                    lk["tau"] = float(value)
                elif key == "gamma":
                    lk["gamma"] = None if value.lower() in ("", "default", "none") else float(value)
                elif key in ("mode", "comm_norm"):
                    lk[key] = value
                else:
                    raise ConfigError(f"unknown key loss.{key}")
        ak = {}
        if cp.has_section("arch"):
            for key, value in cp.items("arch"):
                if key == "k":
                    ak["k"] = int(value)
                elif key in ("point_widths", "head_widths"):
                    ak[key] = _ints(value)
                else:
                    raise ConfigError(f"unknown key arch.{key}")
        return TrainConfig(loss=LossConfig(**lk), arch=ArchConfig(**ak), **kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


def format_config(cfg: TrainConfig) -> str:
    lines = ["[train]"]
    for key in _TRAIN_KEYS:
        value = getattr(cfg, key)
        lines.append(f"{key} = {'none' if value is None else value}")
    lines += [
        "",
        "[loss]",
        f"mode = {cfg.loss.mode}",
        f"tau = {cfg.loss.tau}",
        f"gamma = {'default' if cfg.loss.gamma is None else cfg.loss.gamma}",
        f"comm_norm = {cfg.loss.comm_norm}",
        "",
        "[arch]",
        f"k = {cfg.arch.k}",
        f"point_widths = {','.join(map(str, cfg.arch.point_widths))}",
        f"head_widths = {','.join(map(str, cfg.arch.head_widths))}",
        "",
    ]
    return "\n".join(lines)


def save_config(path, cfg: TrainConfig) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_config(cfg))
