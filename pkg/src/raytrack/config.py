"""Tunable constants for the pipeline, the estimators and the tracker.

Every constant lives in one flat namespace so it can be printed, read from a
``key = value`` file and overridden from the command line.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    blur_radius: int = 5
    target_width: int = 160
    target_height: int = 120
    edge_threshold: int = 128
    distinct_values: int = 10
    compensation_cap: int = 64

    def __post_init__(self):
        if self.blur_radius < 0:
            raise ConfigError("blur_radius must be >= 0")
        if self.target_width < 3 or self.target_height < 3:
            raise ConfigError("target size must be at least 3x3")
        if self.distinct_values < 1:
            raise ConfigError("distinct_values must be >= 1")
        if not 0 <= self.compensation_cap <= 255:
            raise ConfigError("compensation_cap must be in 0..255")


@dataclass(frozen=True)
class EstimatorConfig:
    n: int = 16
    y: int = 2
    m: int = 8
    max_iterations: int = 10
    epsilon: float = 1.0
    ray_budget: int = 65536

    def __post_init__(self):
        if self.n < 4:
            raise ConfigError("n must be >= 4")
        if self.y < 1:
            raise ConfigError("y must be >= 1")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        if self.ray_budget < self.n:
            raise ConfigError("ray_budget must be >= n")


@dataclass(frozen=True)
class TrackerConfig:
    acquire_threshold: int = 57600
    idle_threshold: int = 4800
    idle_timeout_ms: float = 2000.0
    init_delay_ms: float = 2000.0
    max_area_fraction: float = 0.60
    min_area_fraction: float = 0.02
    color_window: int = 5
    color_threshold: float = 90.0
    recovery_offsets: tuple[int, ...] = (10, 20)
    smoothing: float = 0.9

    def __post_init__(self):
        for name in ("acquire_threshold", "idle_threshold", "idle_timeout_ms",
                     "init_delay_ms", "color_window", "color_threshold"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_area_fraction", "min_area_fraction"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be in (0, 1)")
        if self.min_area_fraction >= self.max_area_fraction:
            raise ConfigError("min_area_fraction must be below max_area_fraction")
        if not self.recovery_offsets or any(d <= 0 for d in self.recovery_offsets):
            raise ConfigError("recovery_offsets must be positive")
        if not 0.0 <= self.smoothing < 1.0:
            raise ConfigError("smoothing must be in [0, 1)")


_SECTIONS = {"pipeline": PipelineConfig, "estimator": EstimatorConfig, "tracker": TrackerConfig}


@dataclass(frozen=True)
class Config:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)

    @staticmethod
    def keys() -> dict[str, tuple[str, type]]:
        """Map every flat key to ``(section, python type)``."""
        out = {}
        for section, cls in _SECTIONS.items():
            for f in dataclasses.fields(cls):
                out[f.name] = (section, type(f.default))
        return out

    def items(self):
        for section in _SECTIONS:
            obj = getattr(self, section)
            for f in dataclasses.fields(obj):
                yield f.name, getattr(obj, f.name)

    def with_overrides(self, overrides: dict[str, object]) -> "Config":
        keys = self.keys()
        grouped: dict[str, dict] = {s: {} for s in _SECTIONS}
        for key, raw in overrides.items():
            if key not in keys:
                raise ConfigError(f"unknown config key: {key}")
            section, typ = keys[key]
            grouped[section][key] = _coerce(key, raw, typ)
        return Config(**{s: dataclasses.replace(getattr(self, s), **kv) for s, kv in grouped.items()})

    def dump(self) -> str:
        return "".join(f"{k} = {format_value(v)}\n" for k, v in self.items())


def format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def _coerce(key: str, raw, typ: type):
    if not isinstance(raw, str):
        return tuple(raw) if typ is tuple else typ(raw)
    try:
        if typ is tuple:
            return tuple(int(v) for v in raw.replace(" ", "").strip("{}").split(",") if v)
        if typ is int:
            return int(raw.replace("_", ""))
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def load_config(path: str | Path, base: Config | None = None) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return (base or Config()).with_overrides(parse_config_text(text))
