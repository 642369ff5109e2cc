"""Run configuration: one nested YAML document covering every pipeline stage."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .exceptions import ConfigError
from .model.network import HaeltConfig
from .synthetic import SyntheticSpec
from .training import TrainConfig


@dataclass
class DataSection:
    path: str | None = None
    synthetic: dict | None = None
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seq_len: int = 30
    include_raw: bool = True
    winsorize: bool = True
    winsor_limits: tuple[float, float] = (0.5, 99.5)

    def __post_init__(self):
        self.split = tuple(float(f) for f in self.split)
        self.winsor_limits = tuple(float(f) for f in self.winsor_limits)
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) <= 0:
            raise ConfigError("data.split must be three positive fractions summing to 1")
        if self.seq_len < 2:
            raise ConfigError("data.seq_len must be >= 2")
        lo, hi = self.winsor_limits
        if not 0 <= lo < hi <= 100:
            raise ConfigError("data.winsor_limits must satisfy 0 <= lower < upper <= 100")

    def synthetic_spec(self, seed: int) -> SyntheticSpec:
        spec = dict(self.synthetic or {})
        spec.setdefault("seed", seed)
        try:
            return SyntheticSpec.from_dict(spec)
        except TypeError as exc:
            raise ConfigError(f"data.synthetic: {exc}") from None


@dataclass
class EnsembleSection:
    k: int = 24
    tau: float = 1.0
    mode: str = "walk_forward"

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("ensemble.k must be >= 1")
        if self.tau <= 0:
            raise ConfigError("ensemble.tau must be positive")
        if self.mode not in ("walk_forward", "fixed"):
            raise ConfigError("ensemble.mode must be 'walk_forward' or 'fixed'")


@dataclass
class ImportanceSection:
    repeats: int = 10
    metric: str = "accuracy"
    top: int = 15

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("importance.repeats must be >= 1")
        if self.metric not in ("accuracy", "auc", "f1"):
            raise ConfigError("importance.metric must be accuracy, auc or f1")


@dataclass
class BaselineSection:
    logistic_l2: float = 1.0
    arima_order: tuple[int, int] = (5, 1)

    def __post_init__(self):
        self.arima_order = tuple(int(v) for v in self.arima_order)


@dataclass
class RunConfig:
    data: DataSection = field(default_factory=DataSection)
    model: HaeltConfig = field(default_factory=HaeltConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    importance: ImportanceSection = field(default_factory=ImportanceSection)
    baselines: BaselineSection = field(default_factory=BaselineSection)
    seed: int = 0
    out: str = "runs/default"

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_yaml())

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = dict(d or {})
        sections = {"data": DataSection, "model": HaeltConfig, "train": TrainConfig,
                    "ensemble": EnsembleSection, "importance": ImportanceSection,
                    "baselines": BaselineSection}
        unknown = set(d) - set(sections) - {"seed", "out"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for name, klass in sections.items():
            kwargs[name] = _build(klass, d.get(name) or {}, name)
        for key in ("seed", "out"):
            if key in d:
                kwargs[key] = d[key]
        try:
            kwargs["seed"] = int(kwargs.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError("seed must be an integer") from None
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data)


def _build(klass, values: dict, section: str):
    if not isinstance(values, dict):
        raise ConfigError(f"config section {section!r} must be a mapping")
    allowed = {f.name for f in fields(klass)}
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return klass(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {section!r} section: {exc}") from None


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj
