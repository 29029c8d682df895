"""Run configuration: ``key = value`` lines grouped in ``[section]`` blocks.

Example::

    [data]
    source = synthetic
    synth_total = 20000

    [split]
    train_fraction = 0.04

    [run]
    seed = 42

Every key has a default except ``data.source``. Unknown sections or keys are
rejected. Component seeds left unset are derived from ``run.seed``.
"""

import configparser
import dataclasses
import hashlib
import typing
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import ConfigError


@dataclass(frozen=True)
class DataConfig:
    source: Optional[str] = None  # "synthetic" or "csv"
    path: Optional[str] = None
    synth_total: int = 20000
    synth_separation: float = 3.0
    seed: Optional[int] = None


@dataclass(frozen=True)
class SplitConfig:
    train_fraction: float = 0.04
    calibration_fraction: float = 0.25
    stratified: bool = True
    seed: Optional[int] = None


@dataclass(frozen=True)
class MlpConfig:
    hidden_dim: int = 35
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    max_epochs: int = 300
    mse_goal: float = 1e-4
    max_lambda: float = 1e10
    seed: Optional[int] = None


@dataclass(frozen=True)
class RbfConfig:
    n_centers: int = 50
    spread: float = 2.0
    ridge: float = 1e-8
    raw_features: bool = False
    seed: Optional[int] = None


@dataclass(frozen=True)
class SvmConfig:
    C: float = 10.0
    b0: float = 1.0
    kkt_tolerance: float = 1e-3
    max_passes: int = 1000
    seed: Optional[int] = None


@dataclass(frozen=True)
class FusionConfig:
    mi_denominator: str = "truth"


@dataclass(frozen=True)
class RunSection:
    seed: int = 0


_SEED_OFFSETS = {"data": 0, "split": 1, "mlp": 2, "rbf": 3, "svm": 4}


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    rbf: RbfConfig = field(default_factory=RbfConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    run: RunSection = field(default_factory=RunSection)

    def seed_for(self, section):
        """Explicit ``<section>.seed`` or ``run.seed`` plus a fixed offset."""
        explicit = getattr(self, section).seed
        return explicit if explicit is not None else self.run.seed + _SEED_OFFSETS[section]

    def with_seed(self, seed):
        return dataclasses.replace(self, run=RunSection(int(seed)))

    def validate(self):
        if self.data.source is None:
            raise ConfigError("missing required field data.source (synthetic or csv)")
        if self.data.source not in ("synthetic", "csv"):
            raise ConfigError(f"data.source must be 'synthetic' or 'csv', not {self.data.source!r}")
        if self.data.source == "csv" and not self.data.path:
            raise ConfigError("data.path is required when data.source = csv")
        if self.fusion.mi_denominator not in ("truth", "prediction"):
            raise ConfigError("fusion.mi_denominator must be 'truth' or 'prediction'")
        return self

    def to_text(self):
        """Canonical rendering with every value spelled out (seeds resolved)."""
        lines = []
        for sec in fields(self):
            part = getattr(self, sec.name)
            lines.append(f"[{sec.name}]")
            for f in fields(part):
                value = getattr(part, f.name)
                if f.name == "seed" and sec.name in _SEED_OFFSETS:
                    value = self.seed_for(sec.name)
                if value is None:
                    continue
                lines.append(f"{f.name} = {_format(value)}")
            lines.append("")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(tp, raw, where):
    if typing.get_origin(tp) is typing.Union:
        tp = next(a for a in typing.get_args(tp) if a is not type(None))
    try:
        if tp is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {tp.__name__}") from None


def parse_config(text):
    """Parse configuration text into a :class:`RunConfig` (not yet validated)."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None

    sections = {f.name: f for f in fields(RunConfig)}
    parts = {}
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]")
        cls = sections[name].default_factory
        hints = typing.get_type_hints(cls)
        kwargs = {}
        for key, raw in parser.items(name):
            if key not in hints:
                raise ConfigError(f"unknown key '{key}' in section [{name}]")
            kwargs[key] = _convert(hints[key], raw, f"{name}.{key}")
        parts[name] = cls(**kwargs)
    return RunConfig(**parts)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
