"""Run configuration: residual policy and FOUR search settings.

Files are YAML (JSON is accepted as a YAML subset)::

    policy:
      name: largest        # largest | rotation | random
      cycle: day           # rotation: fill | day | week | <days>
      seed: 0              # random
    four:
      k: 2
      mode: proportional   # proportional | corrective
      probe: null          # probe price move in currency; default is last move
      nmax: 12
      max_iterations: null
      weights:
        enabled: false
        frequency: per-fill  # per-fill | weekly | monthly | quarterly
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Optional, Union

import yaml

from ..four import SearchConfig
from ..rounding import ResidualPolicy, make_policy
from .io import InputError

_POLICY_KEYS = {"name", "cycle", "seed"}
_FOUR_KEYS = {"k", "mode", "probe", "nmax", "max_iterations", "weights"}
_WEIGHT_KEYS = {"enabled", "frequency"}


@dataclass(frozen=True)
class Config:
    policy: str = "largest"
    cycle: Union[str, int] = "day"
    seed: int = 0
    four: SearchConfig = field(default_factory=SearchConfig)

    def make_policy(self) -> ResidualPolicy:
        """A fresh policy; rotation and random policies carry state."""
        return make_policy(self.policy, self.cycle, self.seed)


def _section(data: dict, name: str, allowed: set, path) -> dict:
    section = data.get(name) or {}
    if not isinstance(section, dict):
        raise InputError(f"'{name}' must be a mapping", path, field=name)
    unknown = set(section) - allowed
    if unknown:
        raise InputError(f"unknown keys {sorted(unknown)}", path, field=name)
    return section


def config_from_dict(data: Optional[dict], path=None) -> Config:
    data = data or {}
    if not isinstance(data, dict):
        raise InputError("configuration must be a mapping", path)
    unknown = set(data) - {"policy", "four"}
    if unknown:
        raise InputError(f"unknown keys {sorted(unknown)}", path)
    pol = _section(data, "policy", _POLICY_KEYS, path)
    four = _section(data, "four", _FOUR_KEYS, path)
    weights = _section(four, "weights", _WEIGHT_KEYS, path)
    probe = four.get("probe")
    try:
        search = SearchConfig(
            k=int(four.get("k", 2)),
            mode=four.get("mode", "proportional"),
            probe=None if probe is None else Decimal(str(probe)),
            nmax=int(four.get("nmax", 12)),
            max_iterations=four.get("max_iterations"),
            weights=bool(weights.get("enabled", False)),
            weight_frequency=weights.get("frequency", "per-fill"),
        )
        config = Config(pol.get("name", "largest"), pol.get("cycle", "day"),
                        int(pol.get("seed", 0)), search)
        config.make_policy()
    except (ValueError, TypeError, ArithmeticError) as exc:
        raise InputError(str(exc), path) from None
    return config


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(str(exc.strerror or exc), path) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InputError(f"invalid configuration: {exc}", path) from None
    return config_from_dict(data, path)


def config_to_dict(config: Config) -> dict:
    s = config.four
    return {
        "policy": {"name": config.policy, "cycle": config.cycle, "seed": config.seed},
        "four": {
            "k": s.k,
            "mode": s.mode,
            "probe": None if s.probe is None else str(s.probe),
            "nmax": s.nmax,
            "max_iterations": s.max_iterations,
            "weights": {"enabled": s.weights, "frequency": s.weight_frequency},
        },
    }
