"""Run configuration file (YAML) for the ``train`` / ``eval`` commands.

Every key and its default::

    data:
      train: null            # WFM1 file used for training (required)
      test: null             # optional separate evaluation file
      split: null            # e.g. [0.8, 0.2] or [0.6, 0.1, 0.3]; splits `train`
      seed: 0                # split seed
      stratified: true
    model:
      variant: 2C            # 2C | 3C | 4C
      convs: null            # override: list of [out_channels, kernel, stride, padding]
      encoder_channels: 64
      fc_units: 256
      time_steps: 4
      v_thr: 1.0
      v_reset: 0.0
      surrogate_width: 1.0
      init_scale: 6.0
      seed: 0                # weight initialisation seed
    train:
      optimizer: adam        # adam | sgd
      lr: 0.001
      batch_size: 64
      epochs: 10
      seed: 0                # shuffling seed
      deterministic: true
      betas: [0.9, 0.999]
      eps: 1.0e-8
      weight_decay: 0.0
      lr_decay: 1.0
    output:
      dir: runs/default

Unknown sections or keys raise :class:`ConfigError`.
"""

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

import yaml

from .errors import ConfigError
from .layers import ConvSpec, NetworkConfig
from .lif import SurrogateSpec
from .training import TrainConfig


@dataclass
class DataSection:
    train: Optional[str] = None
    test: Optional[str] = None
    split: Optional[List[float]] = None
    seed: int = 0
    stratified: bool = True


@dataclass
class ModelSection:
    variant: str = "2C"
    convs: Optional[List[List[int]]] = None
    encoder_channels: int = 64
    fc_units: int = 256
    time_steps: int = 4
    v_thr: float = 1.0
    v_reset: float = 0.0
    surrogate_width: float = 1.0
    init_scale: float = 6.0
    seed: int = 0


@dataclass
class TrainSection:
    optimizer: str = "adam"
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0
    deterministic: bool = True
    betas: List[float] = field(default_factory=lambda: [0.9, 0.999])
    eps: float = 1e-8
    weight_decay: float = 0.0
    lr_decay: float = 1.0


@dataclass
class OutputSection:
    dir: str = "runs/default"


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    output: OutputSection = field(default_factory=OutputSection)

    def network_config(self):
        m = self.model
        kw = dict(
            encoder_channels=m.encoder_channels,
            fc_units=m.fc_units,
            time_steps=m.time_steps,
            v_thr=m.v_thr,
            v_reset=m.v_reset,
            init_scale=m.init_scale,
        )
        if m.convs is not None:
            kw["convs"] = tuple(ConvSpec(*c) for c in m.convs)
        try:
            return NetworkConfig.variant(m.variant, **kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model section: {exc}") from exc

    def train_config(self):
        t = self.train
        try:
            return TrainConfig(
                time_steps=self.model.time_steps,
                learning_rate=t.lr,
                batch_size=t.batch_size,
                epochs=t.epochs,
                seed=t.seed,
                optimizer=t.optimizer,
                betas=tuple(t.betas),
                eps=t.eps,
                weight_decay=t.weight_decay,
                lr_decay=t.lr_decay,
                surrogate=SurrogateSpec(self.model.surrogate_width),
                deterministic=t.deterministic,
            )
        except ValueError as exc:
            raise ConfigError(f"invalid train section: {exc}") from exc

    def to_yaml(self):
        return yaml.safe_dump(asdict(self), sort_keys=False)


_SECTIONS = {"data": DataSection, "model": ModelSection, "train": TrainSection, "output": OutputSection}


def _coerce(value, default):
    if isinstance(default, bool) or value is None:
        return value
    if isinstance(default, float) and isinstance(value, (int, float)):
        return float(value)
    return value


def _section(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in section {name!r}: {', '.join(sorted(unknown))}")
    defaults = cls()
    return cls(**{k: _coerce(v, getattr(defaults, k)) for k, v in raw.items()})


def parse_config(raw):
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config file must contain a mapping at top level")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    return RunConfig(**{name: _section(cls, raw.get(name), name) for name, cls in _SECTIONS.items()})


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(raw)
