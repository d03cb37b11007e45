"""Run configuration: defaults, per-network presets and the ``key = value`` file format.

Example file::

    # tuned for BASNet maps
    preset = basnet
    gamma = 10.0
    no_deep_reintro = false

A ``preset`` line is applied first wherever it appears; other keys
override it. Unknown keys, duplicate keys and out-of-range values are
rejected with the offending line number.
"""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

from .fusion import CaConfig
from .saliency import SemConfig
from .superpixel import SuperpixelParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SessConfig:
    """Every knob of the pipeline. Defaults are the U2Net tuning."""

    iterations: int = 12
    superpixels: int = 2500
    seeds_per_component: int = 10
    oisf_iters: int = 5
    alpha: float = 12.0
    beta: float = 0.5
    gamma: float = 10.0
    sigma2: float = 0.01
    lam: float = 0.0001
    ca_steps: int = 3
    epsilon: float = 0.001
    decay: float = 0.8
    floor: int = 200
    no_deep_reintro: bool = False
    keep_reduced_superpixels: bool = False

    def __post_init__(self):
        # build the sub-configs once so bad values fail at construction
        self.sem
        self.ca

    @property
    def superpixel_params(self) -> SuperpixelParams:
        return SuperpixelParams(self.alpha, self.beta, self.gamma, self.oisf_iters)

    @property
    def sem(self) -> SemConfig:
        return SemConfig(
            iterations=self.iterations,
            superpixels=self.superpixels,
            seeds_per_component=self.seeds_per_component,
            sigma2=self.sigma2,
            superpixel_params=self.superpixel_params,
            decay=self.decay,
            floor=self.floor,
        )

    @property
    def ca(self) -> CaConfig:
        return CaConfig(self.lam, self.ca_steps, self.epsilon)

    def replace(self, **changes) -> "SessConfig":
        return dataclasses.replace(self, **changes)


PRESETS: dict[str, dict] = {
    "u2net": dict(iterations=12, superpixels=2500, seeds_per_component=10, oisf_iters=5),
    "basnet": dict(iterations=9, superpixels=200, seeds_per_component=30, oisf_iters=3),
    "msfnet": dict(iterations=12, superpixels=2500, seeds_per_component=30, oisf_iters=1),
}

# file key -> dataclass field
KEYS = {f.name: f.name for f in dataclasses.fields(SessConfig)}
KEYS["lambda"] = "lam"
del KEYS["lam"]
_FIELD_TO_KEY = {v: k for k, v in KEYS.items()}
_TYPES = {f.name: f.type for f in dataclasses.fields(SessConfig)}

_POSITIVE = {"iterations", "superpixels", "seeds_per_component", "oisf_iters", "alpha", "beta", "sigma2", "decay", "floor"}
_NONNEG = {"gamma", "lam", "ca_steps"}


def preset(name: str) -> SessConfig:
    try:
        return SessConfig(**PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from None


def _convert(field: str, raw: str):
    kind = _TYPES[field]
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind == "int":
        return int(raw)
    return float(raw)


def _check_range(field: str, value) -> str | None:
    if field in _POSITIVE and not value > 0:
        return "must be > 0"
    if field in _NONNEG and not value >= 0:
        return "must be >= 0"
    if field == "superpixels" and value < 2:
        return "must be >= 2"
    if field == "decay" and not value <= 1:
        return "must be <= 1"
    if field == "epsilon" and not 0 < value < 0.5:
        return "must be in (0, 0.5)"
    return None


def parse_config_text(text: str, source: str = "<config>") -> SessConfig:
    base = "u2net"
    preset_seen = False
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        where = f"{source}:{lineno}"
        if not sep or not key or not raw:
            raise ConfigError(f"{where}: malformed line, expected 'key = value'")
        if key == "preset":
            if preset_seen:
                raise ConfigError(f"{where}: duplicate key 'preset'")
            if raw not in PRESETS:
                raise ConfigError(f"{where}: unknown preset {raw!r}")
            base, preset_seen = raw, True
            continue
        if key not in KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        field = KEYS[key]
        if field in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        try:
            value = _convert(field, raw)
        except ValueError as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
        problem = _check_range(field, value)
        if problem:
            raise ConfigError(f"{where}: {key} {problem} (got {raw})")
        values[field] = value
    merged = {**PRESETS[base], **values}
    try:
        return SessConfig(**merged)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path: str | os.PathLike) -> SessConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


def format_config(cfg: SessConfig) -> str:
    """Emit every key explicitly; parsing the result gives back ``cfg``."""
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(value)
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {text}")
    return "\n".join(lines) + "\n"
