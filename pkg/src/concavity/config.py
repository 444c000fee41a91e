"""Experiment configuration files.

The file is a flat list of dotted assignments (a TOML subset)::

    detector.k = 7
    detector.epsilon = 0.2
    generator.seed = 42
    eval.theta = 15
    eval.theta_range = "1:20"

Values are integers, floats or quoted strings. Unknown sections or keys are
rejected. Command-line flags override file values.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .detector import DetectorParams
from .synth import GenParams


class ConfigError(ValueError):
    pass


def parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"bad range {text!r}, expected LO:HI") from None
    if not (1 <= lo <= hi):
        raise ConfigError(f"bad range {text!r}, need 1 <= LO <= HI")
    return lo, hi


@dataclass(frozen=True)
class EvalSettings:
    theta: int = 15
    theta_range: tuple[int, int] = (1, 20)


@dataclass(frozen=True)
class Config:
    detector: DetectorParams = field(default_factory=DetectorParams)
    generator: GenParams = field(default_factory=GenParams)
    eval: EvalSettings = field(default_factory=EvalSettings)

    def to_dict(self) -> dict:
        return {
            "detector": asdict(self.detector),
            "generator": asdict(self.generator),
            "eval": {"theta": self.eval.theta, "theta_range": f"{self.eval.theta_range[0]}:{self.eval.theta_range[1]}"},
        }

    def override(self, section: str, **values) -> "Config":
        """Copy with non-``None`` values replaced in one section."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return self
        return replace(self, **{section: replace(getattr(self, section), **values)})


def _coerce(section: str, key: str, value, target):
    if section == "eval" and key == "theta_range":
        return parse_range(value)
    ftype = {f.name: f.type for f in fields(target)}[key]
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{section}.{key}: unsupported value {value!r}")
    if "int" in ftype and "float" not in ftype:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{section}.{key} must be an integer")
        return int(value)
    if "float" in ftype:
        return float(value)
    return value


def load_config(path: str | Path | None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    try:
        raw = tomllib.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section, values in raw.items():
        if section not in ("detector", "generator", "eval") or not isinstance(values, dict):
            raise ConfigError(f"{path}: unknown section {section!r}")
        target = getattr(cfg, section)
        known = {f.name for f in fields(target)}
        updates = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
            updates[key] = _coerce(section, key, value, target)
        try:
            cfg = replace(cfg, **{section: replace(target, **updates)})
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return cfg
