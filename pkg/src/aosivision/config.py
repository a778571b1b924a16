"""Session configuration: frame rate, thresholds and search grids.

A configuration is a flat JSON object whose keys are the field names of
:class:`SessionConfig`; missing keys take their defaults. The CLI reads the
file given by ``--config``, else the one named by the ``AOSIVISION_CONFIG``
environment variable, else uses the defaults, and finally applies flag
overrides.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Tuple

from .attention import AttentionParams
from .csm import PoseGrid
from .errors import ConfigError

ENV_VAR = "AOSIVISION_CONFIG"


@dataclass(frozen=True)
class SessionConfig:
    fps: float = 30.0
    # event detection; delta=None derives the yaw threshold from each trial
    delta: Optional[float] = None
    k: int = 3
    eps: float = 0.01
    pause_s: float = 1.0 / 3.0
    eta: float = 0.15
    delta_p: float = 0.25
    baseline_s: float = 0.5
    min_excursion: float = 0.05
    yaw_midline: float = 0.0
    # arm asymmetry
    tau: float = 45.0
    sigma: Optional[float] = None
    # landmark fusion
    detector_threshold: float = 0.0
    search_scale: float = 1.5
    # pose search
    t_max: int = 10
    t_step: int = 1
    r_max: float = 30.0
    r_step: float = 5.0
    scales: Tuple[float, ...] = field(default=(0.9, 1.0, 1.1))
    rho: int = 3

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        positive = ["fps", "k", "eps", "pause_s", "eta", "delta_p", "baseline_s",
                    "min_excursion", "tau", "search_scale", "t_step", "r_step"]
        if self.delta is not None:
            positive.append("delta")
        if self.sigma is not None:
            positive.append("sigma")
        for name in positive:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        for name in ("k", "t_max", "t_step", "rho"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value:
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        for name in ("t_max", "r_max", "rho", "detector_threshold"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.eta >= 1:
            raise ConfigError("eta must be below 1")
        if not self.scales or min(self.scales) <= 0:
            raise ConfigError("scales must be a non-empty list of positive numbers")

    @property
    def attention(self) -> AttentionParams:
        return AttentionParams(
            delta=self.delta, k=int(self.k), eps=self.eps, pause_s=self.pause_s,
            eta=self.eta, delta_p=self.delta_p, baseline_s=self.baseline_s,
            min_excursion=self.min_excursion, yaw_midline=self.yaw_midline,
        )

    @property
    def grid(self) -> PoseGrid:
        return PoseGrid(int(self.t_max), int(self.t_step), self.r_max, self.r_step,
                        self.scales)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["scales"] = list(self.scales)
        return out

    def replace(self, **changes) -> "SessionConfig":
        return from_dict({**self.to_dict(), **changes})


def from_dict(doc: Mapping[str, Any]) -> SessionConfig:
    known = {f.name for f in dataclasses.fields(SessionConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        return SessionConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None) -> SessionConfig:
    """Configuration from ``path``, the environment variable, or defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return SessionConfig()
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    return from_dict(doc)
