"""Run configuration: JSON file schema, strict validation, dataclass assembly.

The config file is one JSON object with up to four sections.  Unknown
sections or keys are rejected by name; every value is range-checked before a
run starts.

    dit:   n_blocks, n_heads, head_dim, n_steps, seed, grid_h, grid_w, cond_dim
    retro: w_edge (int or "auto"), s_edge, s_mid
    kab:   beta_min, beta_max, layer_lo, layer_hi, step_fraction, epsilon
    probe: n_seeds, window, f, l_q, base, sharpness, seed
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dit import DitConfig
from .errors import ConfigError
from .kab import GuidanceSchedule
from .rope import RetroConfig


@dataclass(frozen=True)
class ProbeConfig:
    n_seeds: int = 200
    window: int = 2
    f: int = 21
    l_q: int = 4
    head_dim: int = 16
    base: float = 100.0
    sharpness: float = 16.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ConfigError(f"probe.n_seeds must be >= 1, got {self.n_seeds}")
        if self.window < 0:
            raise ConfigError(f"probe.window must be >= 0, got {self.window}")
        if self.f < 2:
            raise ConfigError(f"probe.f must be >= 2, got {self.f}")
        if self.l_q < 1:
            raise ConfigError(f"probe.l_q must be >= 1, got {self.l_q}")
        if self.head_dim < 2 or self.head_dim % 2 != 0:
            raise ConfigError(f"probe.head_dim must be even and >= 2, got {self.head_dim}")
        if self.base <= 1.0:
            raise ConfigError(f"probe.base must be > 1, got {self.base}")
        if self.sharpness <= 0.0:
            raise ConfigError(f"probe.sharpness must be > 0, got {self.sharpness}")


@dataclass(frozen=True)
class RunConfig:
    dit: DitConfig = field(default_factory=DitConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    def as_dict(self) -> dict[str, Any]:
        """Resolved configuration echoed into run reports."""
        retro = self.dit.retro
        g = self.dit.guidance
        return {
            "dit": {
                "n_blocks": self.dit.n_blocks,
                "n_heads": self.dit.n_heads,
                "head_dim": self.dit.head_dim,
                "n_steps": self.dit.n_steps,
                "seed": self.dit.seed,
                "grid_h": self.dit.grid_h,
                "grid_w": self.dit.grid_w,
                "cond_dim": self.dit.cond_dim,
            },
            "retro": {
                "w_edge": "auto" if retro is None or retro.w_edge is None else retro.w_edge,
                "s_edge": 1.0 if retro is None else retro.s_edge,
                "s_mid": 1.0 if retro is None else retro.s_mid,
            },
            "kab": {
                "beta_min": g.beta_min,
                "beta_max": g.beta_max,
                "layer_lo": g.layer_lo,
                "layer_hi": g.layer_hi,
                "step_fraction": g.step_fraction,
                "epsilon": g.epsilon,
            },
            "probe": {
                "n_seeds": self.probe.n_seeds,
                "window": self.probe.window,
                "f": self.probe.f,
                "l_q": self.probe.l_q,
                "head_dim": self.probe.head_dim,
                "base": self.probe.base,
                "sharpness": self.probe.sharpness,
                "seed": self.probe.seed,
            },
        }


_INT_KEYS = {
    ("dit", "n_blocks"),
    ("dit", "n_heads"),
    ("dit", "head_dim"),
    ("dit", "n_steps"),
    ("dit", "seed"),
    ("dit", "grid_h"),
    ("dit", "grid_w"),
    ("dit", "cond_dim"),
    ("kab", "layer_lo"),
    ("kab", "layer_hi"),
    ("probe", "n_seeds"),
    ("probe", "window"),
    ("probe", "f"),
    ("probe", "l_q"),
    ("probe", "head_dim"),
    ("probe", "seed"),
}
_FLOAT_KEYS = {
    ("retro", "s_edge"),
    ("retro", "s_mid"),
    ("kab", "beta_min"),
    ("kab", "beta_max"),
    ("kab", "step_fraction"),
    ("kab", "epsilon"),
    ("probe", "base"),
    ("probe", "sharpness"),
}
_SECTIONS = {
    "dit": {"n_blocks", "n_heads", "head_dim", "n_steps", "seed", "grid_h", "grid_w", "cond_dim"},
    "retro": {"w_edge", "s_edge", "s_mid"},
    "kab": {"beta_min", "beta_max", "layer_lo", "layer_hi", "step_fraction", "epsilon"},
    "probe": {"n_seeds", "window", "f", "l_q", "head_dim", "base", "sharpness", "seed"},
}


def _typed(section: str, key: str, value: Any) -> Any:
    if (section, key) in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {section}.{key} must be an integer, got {value!r}")
        return value
    if (section, key) in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {section}.{key} must be a number, got {value!r}")
        return float(value)
    return value


def parse_config(data: dict[str, Any]) -> RunConfig:
    """Validate a raw config mapping and assemble the run configuration."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    for section in data:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section: {section}")
        if not isinstance(data[section], dict):
            raise ConfigError(f"config section {section} must be an object")
        for key in data[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown config key: {section}.{key}")

    def get(section: str, key: str, default: Any) -> Any:
        value = data.get(section, {}).get(key, default)
        return _typed(section, key, value)

    w_edge_raw = get("retro", "w_edge", "auto")
    if w_edge_raw == "auto":
        w_edge = None
    elif isinstance(w_edge_raw, int) and not isinstance(w_edge_raw, bool):
        w_edge = w_edge_raw
    else:
        raise ConfigError(f'config key retro.w_edge must be an integer or "auto", got {w_edge_raw!r}')

    try:
        retro = RetroConfig(
            s_edge=get("retro", "s_edge", 1.06),
            s_mid=get("retro", "s_mid", 0.94),
            w_edge=w_edge,
        )
        guidance = GuidanceSchedule(
            beta_min=get("kab", "beta_min", 0.3),
            beta_max=get("kab", "beta_max", 0.7),
            layer_lo=get("kab", "layer_lo", 5),
            layer_hi=get("kab", "layer_hi", 12),
            step_fraction=get("kab", "step_fraction", 0.4),
            epsilon=get("kab", "epsilon", 1e-6),
        )
        dit = DitConfig(
            n_blocks=get("dit", "n_blocks", 8),
            n_heads=get("dit", "n_heads", 4),
            head_dim=get("dit", "head_dim", 16),
            n_steps=get("dit", "n_steps", 50),
            seed=get("dit", "seed", 0),
            grid_h=get("dit", "grid_h", 4),
            grid_w=get("dit", "grid_w", 4),
            cond_dim=get("dit", "cond_dim", 48),
            retro=retro,
            guidance=guidance,
        )
        probe = ProbeConfig(
            n_seeds=get("probe", "n_seeds", 200),
            window=get("probe", "window", 2),
            f=get("probe", "f", 21),
            l_q=get("probe", "l_q", 4),
            head_dim=get("probe", "head_dim", 16),
            base=get("probe", "base", 100.0),
            sharpness=get("probe", "sharpness", 16.0),
            seed=get("probe", "seed", 0),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(dit=dit, probe=probe)


def load_config(path: str | Path | None) -> RunConfig:
    """Load and validate a config file; ``None`` yields the defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(data)
