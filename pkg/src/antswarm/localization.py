"""Per-robot Monte Carlo localisation from odometry, GPS and compass heading."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arena import wrap_angle, wrap_array


@dataclass(frozen=True)
class PFConfig:
    n_particles: int = 150
    alpha: float = 0.95
    gps_sd: float = 0.02
    heading_sd: float = 0.05
    motion_d_gain: float = 0.1
    motion_theta_gain: float = 0.1
    d_floor: float = 0.001
    theta_floor: float = 0.002
    init_pos_sd: float = 0.05
    init_heading_sd: float = 0.1

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("need at least 2 particles")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        sds = (self.gps_sd, self.heading_sd, self.motion_d_gain, self.motion_theta_gain,
               self.d_floor, self.theta_floor, self.init_pos_sd, self.init_heading_sd)
        if min(sds) < 0:
            raise ValueError("standard deviations and gains must be non-negative")


@dataclass
class PoseEstimate:
    x: float
    y: float
    theta: float
    n_eff: float


class ParticleSet:
    """Weighted pose hypotheses stored as flat arrays."""

    def __init__(self, n: int):
        self.x = np.zeros(n)
        self.y = np.zeros(n)
        self.theta = np.zeros(n)
        self.weights = np.full(n, 1.0 / n)
        self.initialized = False
        self.underflow_count = 0
        self.resample_count = 0

    def __len__(self):
        return len(self.weights)

    def copy(self) -> "ParticleSet":
        out = ParticleSet(len(self))
        out.x, out.y, out.theta = self.x.copy(), self.y.copy(), self.theta.copy()
        out.weights = self.weights.copy()
        out.initialized = self.initialized
        out.underflow_count = self.underflow_count
        out.resample_count = self.resample_count
        return out


def initialize(cfg: PFConfig, gps_fix: tuple[float, float], heading: float,
               rng: np.random.Generator, ps: ParticleSet | None = None) -> ParticleSet:
    ps = ps if ps is not None else ParticleSet(cfg.n_particles)
    if ps.initialized:
        raise RuntimeError("particle set already initialized")
    n = len(ps)
    ps.x = gps_fix[0] + rng.normal(0.0, cfg.init_pos_sd, n) if cfg.init_pos_sd else np.full(n, float(gps_fix[0]))
    ps.y = gps_fix[1] + rng.normal(0.0, cfg.init_pos_sd, n) if cfg.init_pos_sd else np.full(n, float(gps_fix[1]))
    th = heading + rng.normal(0.0, cfg.init_heading_sd, n) if cfg.init_heading_sd else np.full(n, float(heading))
    ps.theta = wrap_array(np.asarray(th, dtype=float))
    ps.weights = np.full(n, 1.0 / n)
    ps.initialized = True
    return ps


def predict(ps: ParticleSet, d: float, dtheta: float, cfg: PFConfig,
            rng: np.random.Generator) -> ParticleSet:
    """Propagate every particle through the odometry motion model."""
    if not ps.initialized:
        raise RuntimeError("predict before initialize")
    n = len(ps)
    sd_theta = cfg.motion_theta_gain * abs(dtheta) + cfg.theta_floor
    sd_d = cfg.motion_d_gain * abs(d) + cfg.d_floor
    th = ps.theta + dtheta
    if sd_theta > 0:
        th = th + rng.normal(0.0, sd_theta, n)
    ps.theta = wrap_array(th)
    ps.x = ps.x + d * np.sin(ps.theta)
    ps.y = ps.y + d * np.cos(ps.theta)
    if sd_d > 0:
        ps.x = ps.x + rng.normal(0.0, sd_d, n)
        ps.y = ps.y + rng.normal(0.0, sd_d, n)
    return ps


def effective_count(weights: np.ndarray) -> float:
    return float(1.0 / np.sum(weights * weights))


def estimate(ps: ParticleSet) -> PoseEstimate:
    """Weighted mean position and weighted circular-mean heading."""
    w = ps.weights
    x = float(np.dot(w, ps.x))
    y = float(np.dot(w, ps.y))
    theta = math.atan2(float(np.dot(w, np.sin(ps.theta))), float(np.dot(w, np.cos(ps.theta))))
    n_eff = min(max(effective_count(w), 1.0), float(len(ps)))
    return PoseEstimate(x, y, wrap_angle(theta), n_eff)


def systematic_resample(ps: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    n = len(ps)
    positions = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(ps.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, positions, side="right")
    np.minimum(idx, n - 1, out=idx)
    ps.x, ps.y, ps.theta = ps.x[idx], ps.y[idx], ps.theta[idx]
    ps.weights = np.full(n, 1.0 / n)
    ps.resample_count += 1
    return ps


def update(ps: ParticleSet, gps: tuple[float, float] | None, heading: float | None,
           cfg: PFConfig, rng: np.random.Generator | None = None) -> PoseEstimate:
    """Weight by GPS/heading likelihoods, estimate, then resample if degenerate.

    The estimate is computed before resampling. Resampling needs ``rng``; without
    one it is skipped.
    """
    if not ps.initialized:
        raise RuntimeError("update before initialize")
    logw = np.log(np.maximum(ps.weights, 1e-300))
    touched = False
    if gps is not None and cfg.gps_sd > 0:
        d2 = (ps.x - gps[0]) ** 2 + (ps.y - gps[1]) ** 2
        logw = logw - d2 / (2.0 * cfg.gps_sd ** 2)
        touched = True
    if heading is not None and cfg.heading_sd > 0:
        e = wrap_array(ps.theta - heading)
        logw = logw - e * e / (2.0 * cfg.heading_sd ** 2)
        touched = True
    if touched:
        # exponentiate without the max shift so genuine underflow is observable
        w = np.exp(logw)
        s = w.sum()
        if not np.isfinite(s) or s <= 0.0:
            ps.underflow_count += 1
            w = np.full(len(ps), 1.0 / len(ps))
        else:
            w = w / s
        ps.weights = w
    est = estimate(ps)
    if rng is not None and est.n_eff < cfg.alpha * len(ps):
        systematic_resample(ps, rng)
    return est


def localisation_error(true_pose, est) -> float:
    return math.hypot(true_pose.x - est.x, true_pose.y - est.y)
