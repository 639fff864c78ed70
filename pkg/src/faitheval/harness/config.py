"""Experiment configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..interpreters import InterpreterConfig
from ..metrics import ALL_METRICS, DEFAULT_B, Metric, parse_metrics
from ..models import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    train_path: str | None = None  # None selects the bundled synthetic corpus
    test_path: str | None = None
    corpus_format: str | None = None
    corpus_seed: int = 0
    model_path: str | None = None  # load instead of training
    golden_set_path: str | None = None  # re-score instead of regenerating
    arch: str = "cnn"
    dim: int = 32
    filters: int = 32
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.01
    init_scale: float = 0.1
    lime_samples: int = 200
    lime_kernel_width: float = 0.25
    lime_ridge_lambda: float = 1.0
    ig_steps: int = 32
    metrics: tuple[Metric, ...] = ALL_METRICS
    B: tuple[float, ...] = DEFAULT_B
    K: int = 2000
    seed: int = 0
    disagreement_instances: int = 30
    output_dir: str | None = None
    formats: tuple[str, ...] = ("markdown", "csv", "svg")

    def __post_init__(self):
        self.metrics = parse_metrics(self.metrics)
        self.B = tuple(float(q) for q in self.B)
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        for path in (self.train_path, self.test_path, self.model_path, self.golden_set_path):
            if path is not None and not Path(path).exists():
                raise ConfigError(f"path does not exist: {path}")
        if (self.train_path is None) != (self.test_path is None):
            raise ConfigError("train_path and test_path must be given together")
        bad = set(self.formats) - {"markdown", "csv", "svg"}
        if bad:
            raise ConfigError(f"unknown report formats: {sorted(bad)}")

    def train_config(self) -> TrainConfig:
        return TrainConfig(arch=self.arch, dim=self.dim, filters=self.filters, epochs=self.epochs,
                           batch_size=self.batch_size, learning_rate=self.learning_rate,
                           init_scale=self.init_scale, seed=self.seed)

    def interpreter_config(self) -> InterpreterConfig:
        return InterpreterConfig(lime_samples=self.lime_samples,
                                 lime_kernel_width=self.lime_kernel_width,
                                 lime_ridge_lambda=self.lime_ridge_lambda,
                                 ig_steps=self.ig_steps, seed=self.seed)


_LIST_FIELDS = {"metrics", "B", "formats"}


def _coerce(name: str, raw: str):
    raw = raw.strip()
    ftype = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}[name]
    if name in _LIST_FIELDS:
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if raw.lower() in ("", "none", "null"):
        if "None" in str(ftype):
            return None
    if ftype.startswith("int"):
        return int(raw)
    if ftype.startswith("float"):
        return float(raw)
    return raw


def config_from_mapping(values: dict) -> ExperimentConfig:
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    values = parse_config_text(Path(path).read_text(encoding="utf-8"))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_mapping(values)


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if f.name == "metrics":
            value = ",".join(m.value for m in value)
        elif f.name in _LIST_FIELDS:
            value = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
        lines.append(f"{f.name} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
