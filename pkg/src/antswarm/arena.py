"""Flat square arena with circular obstacles, unicycle robots and their raw sensors.

Heading convention: theta is measured from the +y axis, clockwise positive, so a
robot moving forward by d displaces (d*sin(theta), d*cos(theta)). A positive
angular rate therefore turns the robot to its right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi
N_IR = 16


def wrap_angle(a: float) -> float:
    """Normalise an angle into (-pi, pi]."""
    a = math.remainder(a, TWO_PI)
    return math.pi if a == -math.pi else a


def wrap_array(a: np.ndarray) -> np.ndarray:
    out = np.remainder(a + math.pi, TWO_PI) - math.pi
    out[out == -math.pi] = math.pi
    return out


def bearing(dx: float, dy: float) -> float:
    """Heading (in the arena convention) of the vector (dx, dy)."""
    return math.atan2(dx, dy)


@dataclass
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        self.theta = wrap_angle(self.theta)


@dataclass(frozen=True)
class Obstacle:
    cx: float
    cy: float
    radius: float


# Stand-ins for rocks and tree trunks; clear of blob centres and the spawn line.
DEFAULT_OBSTACLES = (
    Obstacle(0.2, 0.3, 0.35),
    Obstacle(-3.9, 0.2, 0.25),
    Obstacle(4.0, 0.6, 0.2),
    Obstacle(-0.6, -2.4, 0.3),
    Obstacle(0.6, 3.9, 0.15),
    Obstacle(2.0, -3.4, 0.2),
)


@dataclass(frozen=True)
class NoiseConfig:
    gps_sd: float = 0.02
    heading_sd: float = 0.05
    slip_gain: float = 0.05
    encoder_sd: float = 0.02
    gps_every: int = 4

    def __post_init__(self):
        if min(self.gps_sd, self.heading_sd, self.slip_gain, self.encoder_sd) < 0:
            raise ValueError("noise levels must be non-negative")
        if self.gps_every < 1:
            raise ValueError("gps_every must be >= 1")


@dataclass
class RobotBody:
    id: int
    true_pose: Pose
    body_radius: float = 0.15
    wheel_base: float = 0.3
    v_cmd: float = 0.0
    w_cmd: float = 0.0
    max_speed: float = 0.35
    max_w: float = 1.5
    accel_limit: float = 0.5
    ang_accel_limit: float = 4.0
    # wheel-limited speeds actually applied last tick
    v: float = 0.0
    w: float = 0.0
    odo_d: float = 0.0
    odo_dtheta: float = 0.0


@dataclass
class SensorFrame:
    gps: tuple[float, float] | None
    heading_meas: float | None
    ir: np.ndarray
    odo_d: float
    odo_dtheta: float


@dataclass
class Arena:
    x_min: float = -5.0
    x_max: float = 5.0
    y_min: float = -5.0
    y_max: float = 5.0
    obstacles: tuple[Obstacle, ...] = DEFAULT_OBSTACLES
    ir_range: float = 0.6
    _obs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for ob in self.obstacles:
            if ob.radius <= 0:
                raise ValueError("obstacle radius must be positive")
            if (ob.cx - ob.radius < self.x_min or ob.cx + ob.radius > self.x_max
                    or ob.cy - ob.radius < self.y_min or ob.cy + ob.radius > self.y_max):
                raise ValueError(f"obstacle {ob} not inside the arena")
        self._obs = np.array([[o.cx, o.cy, o.radius] for o in self.obstacles],
                             dtype=float).reshape(-1, 3)

    def clearance(self, x: float, y: float) -> float:
        """Distance from (x, y) to the nearest wall or obstacle surface."""
        d = min(x - self.x_min, self.x_max - x, y - self.y_min, self.y_max - y)
        if len(self._obs):
            c = np.hypot(self._obs[:, 0] - x, self._obs[:, 1] - y) - self._obs[:, 2]
            d = min(d, float(c.min()))
        return d

    def resolve(self, x: float, y: float, r: float) -> tuple[float, float]:
        """Project a body centre out of walls and obstacles."""
        for _ in range(4):
            x = min(max(x, self.x_min + r), self.x_max - r)
            y = min(max(y, self.y_min + r), self.y_max - r)
            moved = False
            for cx, cy, rad in self._obs:
                ddx, ddy = x - cx, y - cy
                dist = math.hypot(ddx, ddy)
                need = rad + r
                if dist < need:
                    if dist < 1e-12:
                        ddx, ddy, dist = 0.0, 1.0, 1.0
                    x = cx + ddx / dist * need
                    y = cy + ddy / dist * need
                    moved = True
            if not moved:
                break
        return x, y

    def raycast(self, x: float, y: float, angles: np.ndarray,
                extra: np.ndarray | None = None) -> np.ndarray:
        """Distance along each ray heading until the first wall or obstacle hit."""
        sx, cy_ = np.sin(angles), np.cos(angles)
        big = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            tx = np.where(sx > 0, (self.x_max - x) / sx,
                          np.where(sx < 0, (self.x_min - x) / sx, big))
            ty = np.where(cy_ > 0, (self.y_max - y) / cy_,
                          np.where(cy_ < 0, (self.y_min - y) / cy_, big))
        t = np.minimum(tx, ty)
        circles = self._obs if extra is None else np.vstack([self._obs, extra])
        if len(circles):
            ox = circles[:, 0][None, :] - x
            oy = circles[:, 1][None, :] - y
            b = sx[:, None] * ox + cy_[:, None] * oy
            c = ox * ox + oy * oy - circles[:, 2][None, :] ** 2
            disc = b * b - c
            with np.errstate(invalid="ignore"):
                root = np.sqrt(disc)
            hit = b - root
            # ray origin inside a circle counts as an immediate hit
            hit = np.where(c <= 0, 0.0, hit)
            valid = (disc >= 0) & ((hit >= 0) | (c <= 0)) & ((b > 0) | (c <= 0))
            hit = np.where(valid, hit, big)
            t = np.minimum(t, hit.min(axis=1))
        return t


IR_OFFSETS = np.arange(N_IR) * (TWO_PI / N_IR)


def step_kinematics(body: RobotBody, dt: float, slip: float, rng: np.random.Generator,
                    arena: Arena | None = None, noise: NoiseConfig | None = None) -> tuple[float, float]:
    """Advance the true pose one tick; returns the odometry deltas (d, dtheta)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    noise = noise or NoiseConfig()
    dv = min(max(body.v_cmd - body.v, -body.accel_limit * dt), body.accel_limit * dt)
    dw = min(max(body.w_cmd - body.w, -body.ang_accel_limit * dt), body.ang_accel_limit * dt)
    body.v = min(max(body.v + dv, -body.max_speed), body.max_speed)
    body.w = min(max(body.w + dw, -body.max_w), body.max_w)

    d_cmd = body.v * dt
    th_cmd = body.w * dt
    d_true, th_true = d_cmd, th_cmd
    k = noise.slip_gain * slip
    if k > 0 and (d_cmd or th_cmd):
        d_true += rng.normal(0.0, k * abs(d_cmd)) if d_cmd else 0.0
        th_true += rng.normal(0.0, k * abs(th_cmd)) if th_cmd else 0.0
    odo_d, odo_th = d_cmd, th_cmd
    if noise.encoder_sd > 0 and (d_cmd or th_cmd):
        odo_d += rng.normal(0.0, noise.encoder_sd * abs(d_cmd)) if d_cmd else 0.0
        odo_th += rng.normal(0.0, noise.encoder_sd * abs(th_cmd)) if th_cmd else 0.0

    p = body.true_pose
    theta = wrap_angle(p.theta + th_true)
    x = p.x + d_true * math.sin(theta)
    y = p.y + d_true * math.cos(theta)
    if arena is not None:
        x, y = arena.resolve(x, y, body.body_radius)
        if arena.clearance(x, y) < body.body_radius - 1e-9:
            x, y = p.x, p.y
    p.x, p.y, p.theta = x, y, theta
    body.odo_d, body.odo_dtheta = odo_d, odo_th
    return odo_d, odo_th


def read_sensors(body: RobotBody, arena: Arena, noise: NoiseConfig, env, rng: np.random.Generator,
                 tick: int = 0, others: np.ndarray | None = None) -> SensorFrame:
    """Noisy GPS (intermittent), heading and IR ring for one robot.

    ``others`` optionally lists (x, y, r) circles of other robots, making them
    visible to the IR ring.
    """
    p = body.true_pose
    gps = None
    if tick % noise.gps_every == 0:
        drop = env is not None and env.drop_prob > 0 and rng.random() < env.drop_prob
        if not drop:
            gx, gy = p.x, p.y
            if noise.gps_sd > 0:
                e = rng.normal(0.0, noise.gps_sd, size=2)
                gx, gy = gx + float(e[0]), gy + float(e[1])
            gps = (gx, gy)
    heading = p.theta
    if noise.heading_sd > 0:
        heading = wrap_angle(heading + float(rng.normal(0.0, noise.heading_sd)))
    dist = arena.raycast(p.x, p.y, p.theta + IR_OFFSETS, extra=others)
    gap = np.maximum(dist - body.body_radius, 0.0)
    ir = np.where(gap <= arena.ir_range, 1.0 - gap / arena.ir_range, 0.0)
    ir = np.clip(ir, 0.0, 1.0)
    return SensorFrame(gps=gps, heading_meas=heading, ir=ir,
                       odo_d=body.odo_d, odo_dtheta=body.odo_dtheta)
