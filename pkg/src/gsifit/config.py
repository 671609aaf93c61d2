"""Run configuration loaded from a JSON file; unknown keys are rejected."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .estimation import Aggregation, LikelihoodConfig, Method
from .safety import SafetyParams, ValidationError
from .simulator import Q3_ITEMS


@dataclass(frozen=True)
class ClusterOptions:
    bandwidth: Optional[float] = None

    def __post_init__(self) -> None:
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ValidationError(f"clustering.bandwidth must be > 0, got {self.bandwidth}")


@dataclass(frozen=True)
class Paths:
    trajectories: Optional[str] = None
    ratings: Optional[str] = None
    fits: Optional[str] = None
    out_dir: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    safety: SafetyParams = field(default_factory=SafetyParams)
    likelihood: LikelihoodConfig = field(default_factory=LikelihoodConfig)
    aggregation: Aggregation = Aggregation.WORST_CASE
    method: Method = Method.QUASI_NEWTON
    grid_step: float = 1e-3
    clustering: ClusterOptions = field(default_factory=ClusterOptions)
    q3_items: Mapping[str, tuple[str, ...]] = field(
        default_factory=lambda: {r.value: (item,) for r, item in Q3_ITEMS.items()})
    seed: int = 7
    paths: Paths = field(default_factory=Paths)

    def __post_init__(self) -> None:
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        object.__setattr__(self, "method", Method(self.method))
        if not self.grid_step > 0:
            raise ValidationError(f"grid_step must be > 0, got {self.grid_step}")
        items = {str(k): tuple(v) for k, v in self.q3_items.items()}
        if set(items) - {"BYS", "CAS"}:
            raise ValidationError(f"q3_items keys must be BYS/CAS, got {sorted(items)}")
        object.__setattr__(self, "q3_items", items)


_SECTIONS = {"safety": SafetyParams, "likelihood": LikelihoodConfig,
             "clustering": ClusterOptions, "paths": Paths}


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ValidationError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from None


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    data = dict(data)
    for key, cls in _SECTIONS.items():
        if key in data:
            data[key] = _build(cls, data[key], key)
    return _build(RunConfig, data, "config")


def load_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return config_from_dict(data)
