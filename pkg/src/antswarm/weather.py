"""Weather modes and how they scale speed, noise, sampling and radio reliability."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

MODES = ("clear", "fog", "rain")


@dataclass(frozen=True)
class EnvState:
    mode: str
    speed_scale: float
    motion_noise_scale: float
    sample_period_scale: float
    gradient_gain_scale: float
    drop_prob: float
    visibility: float
    rain_intensity: float

    def __post_init__(self):
        if not 0 < self.speed_scale <= 1:
            raise ValueError("speed_scale must lie in (0, 1]")
        if not 0 <= self.drop_prob < 1:
            raise ValueError("drop_prob must lie in [0, 1)")

    @property
    def slip(self) -> float:
        return self.motion_noise_scale


_TABLE = {
    "clear": dict(speed_scale=1.0, motion_noise_scale=1.0, sample_period_scale=1.0,
                  gradient_gain_scale=1.0, drop_prob=0.0, visibility=1.0, rain_intensity=0.0),
    "fog": dict(speed_scale=0.78, motion_noise_scale=1.5, sample_period_scale=1.4,
                gradient_gain_scale=1.0, drop_prob=0.0, visibility=0.35, rain_intensity=0.0),
    "rain": dict(speed_scale=0.5, motion_noise_scale=2.0, sample_period_scale=0.8,
                 gradient_gain_scale=1.1, drop_prob=0.15, visibility=0.7, rain_intensity=0.8),
}


def env_params(mode: str) -> EnvState:
    try:
        return EnvState(mode=mode, **_TABLE[mode])
    except KeyError:
        raise ValueError(f"unknown weather mode {mode!r}; expected one of {MODES}") from None


def maybe_drop(message, env: EnvState, rng: np.random.Generator) -> bool:
    """Return True when ``message`` gets through. STOP_ALL always does."""
    if getattr(message, "kind", None) == "STOP_ALL":
        return True
    if env.drop_prob <= 0.0:
        return True
    return bool(rng.random() >= env.drop_prob)


def write_environment_state(path: Path, env: EnvState) -> None:
    d = asdict(env)
    payload = {
        "mode": d["mode"],
        "visibility": d["visibility"],
        "rain_intensity": d["rain_intensity"],
        "slip_factor": d["motion_noise_scale"],
        "speed_scale": d["speed_scale"],
        "sample_period_scale": d["sample_period_scale"],
        "gradient_gain_scale": d["gradient_gain_scale"],
        "drop_prob": d["drop_prob"],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
