"""EXPLORE / BLOB / RECOVER controller with an UNSTUCK override.

Steering follows the arena heading convention (see ``arena``): positive w turns
right, and ``bearing(dx, dy)`` gives the heading that points along (dx, dy).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .arena import bearing, wrap_angle

EXPLORE, BLOB, RECOVER, UNSTUCK = "EXPLORE", "BLOB", "RECOVER", "UNSTUCK"

FRONT_RIGHT = (0, 1, 2)
FRONT_LEFT = (0, 15, 14)
SIDE_RIGHT = (3, 4, 5)
SIDE_LEFT = (13, 12, 11)


@dataclass(frozen=True)
class ControllerConfig:
    base_fwd: float = 0.25
    recover_speed: float = 0.3
    blob_speed: float = 0.15
    blob_enter_val: float = 0.55
    blob_exit_val: float = 0.35
    blob_exit_count: int = 5
    blob_timeout: float = 60.0
    recover_min_dist: float = 1.0
    recover_timeout: float = 8.0
    stuck_pos_eps: float = 0.05
    stuck_time: float = 4.0
    unstuck_phase: float = 1.0
    unstuck_speed: float = 0.15
    unstuck_turn: float = 1.2
    sample_period: float = 0.5
    osc_period: float = 0.8
    osc_sd: float = 0.6
    heading_gain: float = 2.0
    max_w: float = 1.5
    front_thresh: float = 0.3
    hard_stop: float = 0.95
    corner_boost: float = 2.0
    obstacle_gain: float = 2.0
    lateral_gain: float = 0.6
    wall_margin: float = 0.6
    wall_gain: float = 1.0
    dispersion_gain: float = 2.0
    band_base: float = 1.0
    band_step: float = 0.8
    band_width: float = 0.4
    repulsion_gain: float = 1.0
    forbidden_radius: float = 0.6
    bullseye_value: float = 0.85
    flat_grad: float = 0.05
    bullseye_min_dwell: float = 15.0
    arrive_radius: float = 0.1
    pheromone_gain: float = 1.5
    pheromone_scale: float = 0.2
    long_term_repulsion: bool = True
    explore_grad_gain: float = 0.8
    grad_floor: float = 0.1
    grad_scale: float = 0.5

    def __post_init__(self):
        if not 0 <= self.blob_exit_val < self.blob_enter_val <= 1:
            raise ValueError("need 0 <= blob_exit_val < blob_enter_val <= 1")
        positive = ("base_fwd", "recover_speed", "blob_speed", "recover_timeout", "stuck_time",
                    "sample_period", "osc_period", "max_w", "unstuck_phase")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.blob_exit_count < 1:
            raise ValueError("blob_exit_count must be >= 1")


class LocalBeliefGrid:
    """Private per-robot count and running-mean grid."""

    def __init__(self, cx: float, cy: float, n: int = 40, res: float = 0.1):
        self.n, self.res = n, res
        self.x0 = cx - n * res / 2.0
        self.y0 = cy - n * res / 2.0
        self.counts = np.zeros((n, n), dtype=np.int64)
        self.means = np.zeros((n, n))

    def cell(self, x: float, y: float) -> tuple[int, int] | None:
        i = math.floor((x - self.x0) / self.res)
        j = math.floor((y - self.y0) / self.res)
        if 0 <= i < self.n and 0 <= j < self.n:
            return i, j
        return None


def record_local_sample(grid: LocalBeliefGrid, x: float, y: float, r_meas: float) -> LocalBeliefGrid:
    ij = grid.cell(x, y)
    if ij is None:
        return grid
    i, j = ij
    grid.counts[j, i] += 1
    grid.means[j, i] += (r_meas - grid.means[j, i]) / grid.counts[j, i]
    return grid


def obstacle_steer(ir: np.ndarray, cfg: ControllerConfig) -> tuple[float, float]:
    """Turn rate and speed scale from the IR ring.

    A head-on or perfectly symmetric obstacle turns right.
    """
    fr = max(ir[k] for k in FRONT_RIGHT)
    fl = max(ir[k] for k in FRONT_LEFT)
    front = max(fr, fl)
    w = 0.0
    v_scale = 1.0
    if front > cfg.front_thresh:
        # obstacle on the left -> turn right (positive)
        side = 1.0 if fl >= fr else -1.0
        w = side * cfg.obstacle_gain * front
        if fr > cfg.front_thresh and fl > cfg.front_thresh:
            w *= cfg.corner_boost
        span = cfg.hard_stop - cfg.front_thresh
        v_scale = min(max((cfg.hard_stop - front) / span, 0.0), 1.0) if span > 0 else 0.0
    sl = max(ir[k] for k in SIDE_LEFT)
    sr = max(ir[k] for k in SIDE_RIGHT)
    w += cfg.lateral_gain * (sl - sr)
    return w, v_scale


@dataclass
class Sample:
    x: float
    y: float
    R: float
    grad: tuple[float, float]
    pgrad: tuple[float, float] | None = None


@dataclass
class ControllerState:
    robot_id: int
    grid: LocalBeliefGrid
    mode: str = EXPLORE
    prior_mode: str = EXPLORE
    best: tuple[float, float, float] | None = None
    low_count: int = 0
    blob_start: float = 0.0
    bullseye_fired: bool = False
    recover_anchor: tuple[float, float] | None = None
    recover_start: float = 0.0
    recover_heading: float | None = None
    unstuck_start: float = 0.0
    w_osc: float = 0.0
    next_osc: float = 0.0
    last_request: float = -math.inf
    latest: Sample | None = None
    forbidden: list = field(default_factory=list)
    blocked_discs: list = field(default_factory=list)
    history: deque = field(default_factory=deque)
    halted: bool = False
    time: float = 0.0
    # counters surfaced in run summaries
    blob_entries: int = 0
    blob_exits: int = 0
    bullseyes: int = 0
    unstuck_count: int = 0
    mode_time: dict = field(default_factory=dict)
    samples_received: int = 0
    requests_sent: int = 0


def new_state(robot_id: int, spawn: tuple[float, float], arena_half: float = 5.0,
              grid_n: int = 40, grid_res: float = 0.1) -> ControllerState:
    half = grid_n * grid_res / 2.0
    cx = min(max(spawn[0], -arena_half + half), arena_half - half)
    cy = min(max(spawn[1], -arena_half + half), arena_half - half)
    return ControllerState(robot_id=robot_id, grid=LocalBeliefGrid(cx, cy, grid_n, grid_res))


def _in_any_disc(x: float, y: float, discs) -> bool:
    return any(math.hypot(x - cx, y - cy) <= r for cx, cy, r in discs)


def _discs(state: ControllerState, cfg: ControllerConfig) -> list:
    if not cfg.long_term_repulsion:
        return []
    return state.forbidden + state.blocked_discs


def _turn_toward(target: float, theta: float) -> float:
    return wrap_angle(target - theta)


def wall_steer(x: float, y: float, theta: float, cfg: ControllerConfig, half: float = 5.0) -> float:
    nx = ny = 0.0
    closeness = 0.0
    for dist, ux, uy in ((x + half, 1.0, 0.0), (half - x, -1.0, 0.0),
                         (y + half, 0.0, 1.0), (half - y, 0.0, -1.0)):
        if dist < cfg.wall_margin:
            c = 1.0 - dist / cfg.wall_margin
            nx += c * ux
            ny += c * uy
            closeness = max(closeness, c)
    if closeness == 0.0:
        return 0.0
    err = _turn_toward(bearing(nx, ny), theta)
    # only act when heading has a component into the wall
    if abs(err) <= math.pi / 2:
        return 0.0
    return cfg.wall_gain * closeness * err


def dispersion_steer(robot_id: int, x: float, y: float, theta: float, cfg: ControllerConfig) -> float:
    r = math.hypot(x, y)
    band = cfg.band_base + cfg.band_step * (robot_id % 5)
    off = r - band
    if abs(off) <= cfg.band_width / 2 or r < 1e-9:
        return 0.0
    target = bearing(-x, -y) if off > 0 else bearing(x, y)
    k = min(abs(off), 1.0)
    return cfg.dispersion_gain * k * _turn_toward(target, theta)


def repulsion_steer(x: float, y: float, theta: float, discs, cfg: ControllerConfig) -> float:
    w = 0.0
    for cx, cy, r in discs:
        d = math.hypot(x - cx, y - cy)
        reach = 1.5 * r
        if d >= reach:
            continue
        s = 1.0 - d / reach
        away = bearing(x - cx, y - cy) if d > 1e-9 else theta + math.pi
        err = _turn_toward(away, theta)
        if abs(err) <= math.pi / 2:
            continue
        w += cfg.repulsion_gain * s * err
    return w


def declare_bullseye(state: ControllerState, cfg: ControllerConfig) -> tuple[float, float] | None:
    """Announce the best point when sitting on a high, flat sample; once per episode."""
    if state.mode != BLOB or state.bullseye_fired or state.best is None or state.latest is None:
        return None
    bx, by, bv = state.best
    s = state.latest
    if bv < cfg.bullseye_value or s.R < cfg.bullseye_value:
        return None
    if state.time - state.blob_start < cfg.bullseye_min_dwell:
        return None
    if math.hypot(*s.grad) >= cfg.flat_grad:
        return None
    state.bullseye_fired = True
    state.bullseyes += 1
    return (bx, by)


def _enter_recover(state: ControllerState, x: float, y: float, theta: float, now: float) -> None:
    state.mode = RECOVER
    state.recover_anchor = (x, y)
    state.recover_start = now
    if state.best is not None and math.hypot(x - state.best[0], y - state.best[1]) > 1e-6:
        state.recover_heading = bearing(x - state.best[0], y - state.best[1])
    else:
        state.recover_heading = theta
    state.best = None
    state.low_count = 0


def _exit_blob(state: ControllerState, x: float, y: float, theta: float, now: float,
               cfg: ControllerConfig) -> None:
    bx, by, _ = state.best
    state.forbidden.append((bx, by, cfg.forbidden_radius))
    state.blob_exits += 1
    _enter_recover(state, x, y, theta, now)


def on_sample(state: ControllerState, s: Sample, est_theta: float, cfg: ControllerConfig) -> list:
    """Fold a sample response into the FSM; returns any actions it triggers."""
    state.samples_received += 1
    state.latest = s
    record_local_sample(state.grid, s.x, s.y, s.R)
    actions = []
    now = state.time
    if state.mode == EXPLORE or (state.mode == UNSTUCK and state.prior_mode == EXPLORE):
        known = _discs(state, cfg)
        if s.R > cfg.blob_enter_val and not _in_any_disc(s.x, s.y, known):
            state.best = (s.x, s.y, s.R)
            state.low_count = 0
            state.blob_start = now
            state.bullseye_fired = False
            state.blob_entries += 1
            if state.mode == UNSTUCK:
                state.prior_mode = BLOB
            else:
                state.mode = BLOB
            actions.append(("MODE", BLOB))
    elif state.mode == BLOB:
        if s.R > state.best[2]:
            state.best = (s.x, s.y, s.R)
        state.low_count = state.low_count + 1 if s.R < cfg.blob_exit_val else 0
        hit = declare_bullseye(state, cfg)
        if hit is not None:
            actions.append(("BULLSEYE", hit[0], hit[1]))
            state.best = (hit[0], hit[1], state.best[2])
            _enter_recover(state, s.x, s.y, est_theta, now)
            actions.append(("MODE", RECOVER))
        elif state.low_count >= cfg.blob_exit_count or now - state.blob_start > cfg.blob_timeout:
            _exit_blob(state, s.x, s.y, est_theta, now, cfg)
            actions.append(("MODE", RECOVER))
    return actions


def unstuck_check(state: ControllerState, x: float, y: float, cfg: ControllerConfig) -> bool:
    """Track estimated positions; enter UNSTUCK when they stall for stuck_time."""
    now = state.time
    h = state.history
    h.append((now, x, y))
    while h and now - h[0][0] > cfg.stuck_time:
        h.popleft()
    if state.mode == UNSTUCK or not h or now - h[0][0] < cfg.stuck_time - 1e-9:
        return False
    t0, x0, y0 = h[0]
    if math.hypot(x - x0, y - y0) < cfg.stuck_pos_eps:
        state.prior_mode = state.mode
        state.mode = UNSTUCK
        state.unstuck_start = now
        state.unstuck_count += 1
        h.clear()
        return True
    return False


def fsm_step(state: ControllerState, est, sensors, cfg: ControllerConfig, env=None,
             rng: np.random.Generator | None = None, dt: float = 0.0625) -> tuple[float, float, list]:
    """One control tick. ``est`` is a pose estimate or None when the filter is not running.

    Sample responses are folded in beforehand via ``on_sample``. Returns
    (v_cmd, w_cmd, actions); actions hold ("SAMPLE_REQUEST", x, y),
    ("BULLSEYE", x, y) and ("MODE", name) tuples.
    """
    now = state.time
    state.time = now + dt
    state.mode_time[state.mode] = state.mode_time.get(state.mode, 0.0) + dt
    if state.halted:
        return 0.0, 0.0, []
    if est is None or not (math.isfinite(est.x) and math.isfinite(est.y) and math.isfinite(est.theta)):
        return 0.0, 0.0, []
    speed_scale = env.speed_scale if env is not None else 1.0
    period = cfg.sample_period * (env.sample_period_scale if env is not None else 1.0)
    gain_scale = env.gradient_gain_scale if env is not None else 1.0
    x, y, th = est.x, est.y, est.theta
    actions: list = []

    if now - state.last_request >= period - 1e-9:
        state.last_request = now
        state.requests_sent += 1
        actions.append(("SAMPLE_REQUEST", x, y))

    if unstuck_check(state, x, y, cfg):
        actions.append(("MODE", UNSTUCK))

    if state.mode == UNSTUCK:
        elapsed = now - state.unstuck_start
        if elapsed < cfg.unstuck_phase:
            v, w = -cfg.unstuck_speed, cfg.unstuck_turn
        elif elapsed < 2 * cfg.unstuck_phase:
            v, w = cfg.unstuck_speed, cfg.unstuck_turn
        else:
            state.mode = state.prior_mode
            state.history.clear()
            actions.append(("MODE", state.mode))
            return _mode_command(state, x, y, th, sensors, cfg, speed_scale, gain_scale, rng, actions)
        return v * speed_scale, w, actions

    return _mode_command(state, x, y, th, sensors, cfg, speed_scale, gain_scale, rng, actions)


def _mode_command(state, x, y, th, sensors, cfg, speed_scale, gain_scale, rng, actions):
    now = state.time
    w_obs, v_scale = obstacle_steer(sensors.ir, cfg)
    discs = _discs(state, cfg)

    if state.mode == RECOVER:
        ax, ay = state.recover_anchor
        if math.hypot(x - ax, y - ay) >= cfg.recover_min_dist or now - state.recover_start >= cfg.recover_timeout:
            state.mode = EXPLORE
            actions.append(("MODE", EXPLORE))
        else:
            w = cfg.heading_gain * _turn_toward(state.recover_heading, th)
            w += w_obs + wall_steer(x, y, th, cfg) + repulsion_steer(x, y, th, discs, cfg)
            w = _clamp(w, cfg.max_w)
            return cfg.recover_speed * v_scale * speed_scale, w, actions

    if state.mode == BLOB:
        s = state.latest
        bx, by, bv = state.best
        d_best = math.hypot(bx - x, by - y)
        g = s.grad if s is not None else (0.0, 0.0)
        at_best = s is not None and (d_best <= cfg.arrive_radius or s.R >= bv)
        if at_best and math.hypot(*g) > 1e-9:
            target = bearing(g[0], g[1])
        elif d_best > cfg.arrive_radius:
            target = bearing(bx - x, by - y)
        else:
            target = th
        err = _turn_toward(target, th)
        w = _clamp(cfg.heading_gain * gain_scale * err, cfg.max_w)
        v = cfg.blob_speed * max(0.0, math.cos(err))
        if v_scale < 1.0:
            w = _clamp(w + w_obs, cfg.max_w)
        return v * v_scale * speed_scale, w, actions

    # EXPLORE
    if now >= state.next_osc:
        state.w_osc = float(rng.normal(0.0, cfg.osc_sd)) if rng is not None else 0.0
        state.next_osc = now + cfg.osc_period
    w = state.w_osc + w_obs + wall_steer(x, y, th, cfg)
    w += dispersion_steer(state.robot_id, x, y, th, cfg)
    w += repulsion_steer(x, y, th, discs, cfg)
    s = state.latest
    if cfg.explore_grad_gain > 0 and s is not None:
        g = math.hypot(*s.grad)
        if g > cfg.grad_floor:
            k = min((g - cfg.grad_floor) / cfg.grad_scale, 1.0)
            w += cfg.explore_grad_gain * k * _turn_toward(bearing(s.grad[0], s.grad[1]), th)
    if cfg.pheromone_gain > 0 and s is not None and s.pgrad is not None:
        pg = math.hypot(*s.pgrad)
        if pg > 1e-9:
            k = min(pg / cfg.pheromone_scale, 1.0)
            w += cfg.pheromone_gain * k * _turn_toward(bearing(-s.pgrad[0], -s.pgrad[1]), th)
    w = _clamp(w, cfg.max_w)
    return cfg.base_fwd * v_scale * speed_scale, w, actions


def _clamp(w: float, lim: float) -> float:
    return min(max(w, -lim), lim)
