"""Experiment configuration: dataclasses, JSON round-trip, dotted-path overrides."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .losses import LossConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "gat"
    hidden: int | None = None  # None: 8 for gat, 16 for gcn
    heads: int = 2
    dropout: float | None = None  # None: 0.6 for gat, 0.5 for gcn
    alpha: float = 0.2

    def resolved(self) -> "ModelConfig":
        if self.kind not in ("gat", "gcn"):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        hidden = self.hidden if self.hidden is not None else (8 if self.kind == "gat" else 16)
        dropout = self.dropout if self.dropout is not None else (0.6 if self.kind == "gat" else 0.5)
        return dataclasses.replace(self, hidden=hidden, dropout=dropout)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    lr: float = 5e-3
    weight_decay: float = 5e-4
    epochs: int = 300
    seed: int = 0
    patience: int | None = None
    select_by: str = "val_macro_f1"  # "val_macro_f1" | "val_loss" | "final_epoch"

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.select_by not in ("val_macro_f1", "val_loss", "final_epoch"):
            raise ConfigError(f"unknown select_by {self.select_by!r}")

    def replace(self, **kw) -> "TrainConfig":
        """``dataclasses.replace`` that also accepts ``lam=...``/``base=...`` for the loss."""
        loss_kw = {k: kw.pop(k) for k in list(kw) if k in {f.name for f in dataclasses.fields(LossConfig)}}
        model_kw = {k: kw.pop(k) for k in list(kw) if k == "kind"}
        out = dataclasses.replace(self, **kw)
        if loss_kw:
            out = dataclasses.replace(out, loss=dataclasses.replace(out.loss, **loss_kw))
        if model_kw:
            out = dataclasses.replace(out, model=dataclasses.replace(out.model, **model_kw))
        return out


@dataclass(frozen=True)
class DataConfig:
    dir: str | None = None
    name: str | None = None
    split: str = "standard"  # "standard" | "imbalanced"
    ratio: float = 0.5
    minority_classes: list | None = None  # ids, class strings, or "L<k>"; None: table defaults
    per_class: int = 20
    val_size: int = 500
    test_size: int = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str = "runs/latest"

    def to_dict(self) -> dict:
        t = self.train
        return {
            "data": dataclasses.asdict(self.data),
            "model": dataclasses.asdict(t.model),
            "loss": _loss_to_dict(t.loss),
            "train": {
                "lr": t.lr,
                "weight_decay": t.weight_decay,
                "epochs": t.epochs,
                "seed": t.seed,
                "patience": t.patience,
                "select_by": t.select_by,
            },
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"data", "model", "loss", "train", "out"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            model = ModelConfig(**d.get("model", {}))
            loss = _loss_from_dict(d.get("loss", {}))
            train = TrainConfig(model=model, loss=loss, **d.get("train", {}))
            data = DataConfig(**d.get("data", {}))
        except TypeError as e:
            raise ConfigError(str(e)) from e
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return cls(data=data, train=train, out=d.get("out", cls.out))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _loss_to_dict(loss: LossConfig) -> dict:
    d = dataclasses.asdict(loss)
    d["lambda"] = d.pop("lam")
    return d


def _loss_from_dict(d: dict) -> LossConfig:
    d = dict(d)
    if "lambda" in d:
        d["lam"] = d.pop("lambda")
    return LossConfig(**d)


def parse_value(text: str):
    """JSON literal if it parses (numbers, true/false/null, lists), else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(d: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings to a config dict (returns a copy)."""
    d = copy.deepcopy(d)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        node = d
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-section")
        node[parts[-1]] = parse_value(raw)
    return d


def load_config(path=None, overrides=()) -> ExperimentConfig:
    d = ExperimentConfig().to_dict()
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        d = _merge(d, loaded)
    return ExperimentConfig.from_dict(apply_overrides(d, overrides))


def _merge(base: dict, top: dict) -> dict:
    out = dict(base)
    for k, v in top.items():
        out[k] = _merge(base[k], v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out
