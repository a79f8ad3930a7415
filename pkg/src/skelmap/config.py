"""Run configuration: one JSON document holding every tunable parameter.

Unknown keys are rejected at every nesting level. See ``docs/config.md`` for
the schema; ``RunConfig().to_dict()`` prints the defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, SkelmapError
from .growgrid import FineTuneParams, GGParams
from .som import SomParams

DEFAULT_ATTENTION = ("LeftElbow", "LeftHand", "RightElbow", "RightHand", "LeftKnee", "LeftFoot",
                     "RightKnee", "RightFoot")


@dataclass(frozen=True)
class MapConfig:
    """One self-organizing layer: a fixed SOM or a growing grid."""

    kind: str = "som"
    rows: int = 30
    cols: int = 30
    sigma: float = 1.0
    alpha0: float = 0.1
    alpha_min: float = 0.01
    sigma_r0: float | None = None
    sigma_r_min: float = 1.0
    epochs: int = 10
    neighborhood: str = "as-printed"
    # growing grid only
    lambda_: int = 30
    alpha_growth: float = 0.1
    max_neurons: int | None = None
    qe_stop: float | None = None
    finetune_epochs: int = 5
    finetune_alpha0: float = 0.1
    finetune_alpha_min: float = 0.01
    finetune_neighborhood: str = "direct"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("som", "gg"):
            raise ConfigError(f"map kind must be 'som' or 'gg', got {self.kind!r}")
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("map rows and cols must be >= 1")
        try:
            self.som_params()
            self.gg_params()
        except SkelmapError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def capacity(self) -> int:
        return self.max_neurons if self.max_neurons is not None else self.rows * self.cols

    def som_params(self) -> SomParams:
        return SomParams(self.sigma, self.alpha0, self.alpha_min, self.sigma_r0, self.sigma_r_min,
                         self.epochs, self.seed, self.neighborhood)

    def gg_params(self) -> GGParams:
        ft = FineTuneParams(self.finetune_alpha0, self.finetune_alpha_min, self.finetune_epochs,
                            self.finetune_neighborhood)
        return GGParams(self.lambda_, self.alpha_growth, self.sigma, max(self.capacity, 4),
                        self.qe_stop, ft, self.seed)


def _second_map_default():
    return MapConfig(rows=10, cols=10, sigma=0.25, epochs=50, seed=1)


@dataclass(frozen=True)
class PreprocessSection:
    attention_joints: tuple = DEFAULT_ATTENTION
    dynamics_order: int = 0

    def __post_init__(self):
        object.__setattr__(self, "attention_joints", tuple(self.attention_joints))
        if self.dynamics_order not in (0, 1, 2):
            raise ConfigError("dynamics_order must be 0, 1 or 2")
        if not self.attention_joints:
            raise ConfigError("attention_joints must be non-empty")


@dataclass(frozen=True)
class OutputSection:
    eta: float = 0.1
    epochs: int = 100
    input: str = "activity"
    softmax_gain: float = 10.0
    seed: int = 2

    def __post_init__(self):
        if self.input not in ("activity", "winner-one-hot"):
            raise ConfigError("output input must be 'activity' or 'winner-one-hot'")
        if self.eta < 0 or self.epochs < 0:
            raise ConfigError("eta and epochs must be non-negative")


@dataclass(frozen=True)
class SplitSection:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.train_fraction <= 1.0:
            raise ConfigError("train_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SegmentSection:
    window: int = 30
    window_min: int = 5
    theta: float = 0.5
    consecutive: int = 3

    def __post_init__(self):
        if not 1 <= self.window_min <= self.window:
            raise ConfigError("need 1 <= window_min <= window")
        if self.consecutive < 1:
            raise ConfigError("consecutive must be >= 1")


@dataclass(frozen=True)
class DataSection:
    layout: str = "msr20"
    topology: str | None = None

    def __post_init__(self):
        if self.layout not in ("msr20", "msr40"):
            raise ConfigError("layout must be 'msr20' or 'msr40'")


@dataclass(frozen=True)
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    split: SplitSection = field(default_factory=SplitSection)
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    first_map: MapConfig = field(default_factory=MapConfig)
    k: int = 30
    second_map: MapConfig = field(default_factory=_second_map_default)
    output: OutputSection = field(default_factory=OutputSection)
    segment: SegmentSection = field(default_factory=SegmentSection)

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError("k must be >= 2")

    def to_dict(self) -> dict:
        return _to_dict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return _from_dict(cls, d, "")

    def with_overrides(self, overrides: dict) -> "RunConfig":
        """Apply dotted-key overrides such as ``{"first_map.kind": "gg"}``."""
        d = self.to_dict()
        for key, value in overrides.items():
            node = d
            parts = key.split(".")
            for p in parts[:-1]:
                if not isinstance(node.get(p), dict):
                    raise ConfigError(f"unknown config key {key!r}")
                node = node[p]
            if parts[-1] not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return RunConfig.from_dict(d)


def _key(name: str) -> str:
    return name.rstrip("_")


def _to_dict(obj) -> dict:
    out = {}
    for f in dataclasses.fields(obj):
        v = getattr(obj, f.name)
        if dataclasses.is_dataclass(v):
            v = _to_dict(v)
        elif isinstance(v, tuple):
            v = list(v)
        out[_key(f.name)] = v
    return out


def _from_dict(cls, d, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    fields = {_key(f.name): f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(path + k for k in unknown)}")
    kwargs = {}
    for key, value in d.items():
        f = fields[key]
        default = cls.__dataclass_fields__[f.name]
        if default.default_factory is not dataclasses.MISSING:
            proto = default.default_factory()
            if dataclasses.is_dataclass(proto):
                merged = _to_dict(proto)
                if not isinstance(value, dict):
                    raise ConfigError(f"{path}{key} must be an object")
                merged.update(value)
                value = _from_dict(type(proto), merged, f"{path}{key}.")
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return RunConfig.from_dict(data)
