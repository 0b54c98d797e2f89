"""Run configuration and the deterministic tick loop tying all subsystems together."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import controller as ctl
from .arena import Arena, NoiseConfig, Pose, RobotBody, read_sensors, step_kinematics
from .field import BlobParams, GridSpec, build_field
from .gridio import format_grid, write_grid
from .localization import ParticleSet, PFConfig, estimate, initialize, predict, update
from .metrics import compute_run_metrics, format_metrics_csv, metrics_row
from .supervisor import BROADCAST, SUPERVISOR, Message, Supervisor, SupervisorConfig, evaporate
from .weather import env_params, maybe_drop, write_environment_state

log = logging.getLogger(__name__)

# subsystem codes for independent RNG streams
_MOTION, _SENSOR, _PF, _CONTROL, _RADIO = 1, 2, 3, 4, 5
_SUPERVISOR_STREAM = 1_000_000
_SAMPLE_NOISE = 1

SUPERVISOR_PERIOD_S = 1.0


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...); unaffected by other keys in use."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


@dataclass
class RunConfig:
    seed: int = 0
    team_size: int = 5
    pf_enabled: bool = True
    coordination_enabled: bool = True
    weather: str = "clear"
    horizon_s: float = 600.0
    dt: float = 0.0625
    field_seed: int = 0
    log_every: int = 8
    robot_ir_visibility: bool = False
    out: str | None = None
    blobs: BlobParams = field(default_factory=BlobParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    pf: PFConfig = field(default_factory=PFConfig)
    controller: ctl.ControllerConfig = field(default_factory=ctl.ControllerConfig)
    supervisor: SupervisorConfig = field(default_factory=SupervisorConfig)

    def validate(self) -> None:
        if self.team_size < 1:
            raise ValueError("team_size must be >= 1")
        if not self.horizon_s > 0 or not self.dt > 0:
            raise ValueError("horizon_s and dt must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        env_params(self.weather)

    def flat(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if dataclasses.is_dataclass(v):
                for g in dataclasses.fields(v):
                    out[f"{f.name}.{g.name}"] = getattr(v, g.name)
            else:
                out[f.name] = v
        return out

    def dumps(self) -> str:
        lines = []
        for k, v in self.flat().items():
            if k == "out":
                continue
            lines.append(f"{k} = {_render(v)}")
        return "\n".join(lines) + "\n"


def _render(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if isinstance(v, tuple):
        return json.dumps(v)
    return "" if v is None else str(v)


_TRUE = {"1", "true", "on", "yes"}
_FALSE = {"0", "false", "off", "no"}


def _coerce(template, raw: str):
    raw = raw.strip()
    if isinstance(template, bool):
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    if isinstance(template, tuple):
        return tuple(tuple(x) if isinstance(x, list) else x for x in json.loads(raw))
    if template is None or isinstance(template, str):
        return raw or None
    raise ValueError(f"cannot parse {raw!r}")


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Return a copy of ``cfg`` with flat (possibly dotted) keys replaced.

    Values may be strings (parsed against the current value's type) or
    already-typed objects. Unknown keys raise ``KeyError``.
    """
    top: dict = {}
    nested: dict[str, dict] = {}
    current = cfg.flat()
    for key, raw in overrides.items():
        if key not in current:
            raise KeyError(f"unknown config key {key!r}")
        val = _coerce(current[key], raw) if isinstance(raw, str) else raw
        if "." in key:
            group, name = key.split(".", 1)
            nested.setdefault(group, {})[name] = val
        else:
            top[key] = val
    for group, vals in nested.items():
        top[group] = dataclasses.replace(getattr(cfg, group), **vals)
    return dataclasses.replace(cfg, **top)


def parse_config_text(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    return apply_overrides(base or RunConfig(), parse_config_text(Path(path).read_text()))


def spawn_pose(robot_id: int) -> Pose:
    return Pose(-1.0 + 0.5 * robot_id, -4.5, 0.0)


class Robot:
    """Bundles one robot's body, filter, controller state and RNG streams."""

    def __init__(self, rid: int, cfg: RunConfig):
        pose = spawn_pose(rid)
        self.id = rid
        self.body = RobotBody(id=rid, true_pose=pose)
        self.body.max_w = cfg.controller.max_w
        self.ps = ParticleSet(cfg.pf.n_particles)
        self.state = ctl.new_state(rid, (pose.x, pose.y))
        self.est = None
        self.inbox: list[Message] = []
        self.motion_rng = stream(cfg.seed, rid, _MOTION)
        self.sensor_rng = stream(cfg.seed, rid, _SENSOR)
        self.pf_rng = stream(cfg.seed, rid, _PF)
        self.control_rng = stream(cfg.seed, rid, _CONTROL)
        self.radio_rng = stream(cfg.seed, rid, _RADIO)


@dataclass
class RunResult:
    config: RunConfig
    metrics: object
    summary: dict
    supervisor: Supervisor
    robots: list
    trajectory: list
    metrics_csv: str
    grids: dict


TRAJ_COLUMNS = ("tick", "time_s", "robot_id", "true_x", "true_y", "true_theta",
                "est_x", "est_y", "est_theta", "mode")


def _traj_line(r: dict) -> str:
    vals = []
    for k in TRAJ_COLUMNS:
        v = r[k]
        if isinstance(v, str):
            vals.append(v)
        elif isinstance(v, (int, np.integer)):
            vals.append(str(int(v)))
        else:
            vals.append(f"{v:.6f}")
    return ",".join(vals)


def run(cfg: RunConfig) -> RunResult:
    cfg.validate()
    spec = GridSpec()
    rf = build_field(spec, cfg.blobs, cfg.field_seed)
    env = env_params(cfg.weather)
    arena = Arena()
    sup = Supervisor(rf, dataclasses.replace(cfg.supervisor, coordination=cfg.coordination_enabled),
                     rng=stream(cfg.seed, _SUPERVISOR_STREAM, _SAMPLE_NOISE))
    sup_radio = stream(cfg.seed, _SUPERVISOR_STREAM, _RADIO)
    if not cfg.coordination_enabled:
        cfg = dataclasses.replace(cfg, controller=dataclasses.replace(cfg.controller, long_term_repulsion=False))
    robots = [Robot(i, cfg) for i in range(cfg.team_size)]
    for r in robots:
        r.body.max_speed = r.body.max_speed * env.speed_scale

    out_dir = Path(cfg.out) if cfg.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    dt = cfg.dt
    n_ticks = int(round(cfg.horizon_s / dt))
    sup_every = max(1, int(round(SUPERVISOR_PERIOD_S / dt)))
    requests_received = 0
    traj: list[dict] = []
    dropped = 0
    last_tick = -1

    for tick in range(n_ticks):
        last_tick = tick
        uplink: list[Message] = []
        others = None
        if cfg.robot_ir_visibility:
            others = np.array([[r.body.true_pose.x, r.body.true_pose.y, r.body.body_radius] for r in robots])

        for rb in robots:
            st = rb.state
            for msg in rb.inbox:
                if msg.kind == "SAMPLE_RESPONSE":
                    p = msg.payload
                    s = ctl.Sample(p["x"], p["y"], p["R"], p["grad"], p.get("pgrad"))
                    theta = rb.est.theta if rb.est is not None else 0.0
                    for a in ctl.on_sample(st, s, theta, cfg.controller):
                        if a[0] == "BULLSEYE":
                            uplink.append(Message("BULLSEYE", rb.id, SUPERVISOR, tick, {"x": a[1], "y": a[2]}))
                elif msg.kind == "BLOCK":
                    if cfg.coordination_enabled:
                        p = msg.payload
                        st.blocked_discs.append((p["x"], p["y"], p["r"]))
                elif msg.kind == "STOP_ALL":
                    st.halted = True
            rb.inbox = []
            if st.halted:
                rb.body.v = rb.body.w = rb.body.v_cmd = rb.body.w_cmd = 0.0
                continue

            vis = None
            if others is not None:
                vis = np.delete(others, rb.id, axis=0)
            frame = read_sensors(rb.body, arena, cfg.noise, env, rb.sensor_rng, tick=tick, others=vis)

            if cfg.pf_enabled:
                if not rb.ps.initialized:
                    if frame.gps is not None and frame.heading_meas is not None:
                        initialize(cfg.pf, frame.gps, frame.heading_meas, rb.pf_rng, rb.ps)
                        rb.est = estimate(rb.ps)
                else:
                    predict(rb.ps, frame.odo_d, frame.odo_dtheta, cfg.pf, rb.pf_rng)
                    rb.est = update(rb.ps, frame.gps, frame.heading_meas, cfg.pf, rb.pf_rng)

            v, w, actions = ctl.fsm_step(st, rb.est, frame, cfg.controller, env, rb.control_rng, dt)
            lim = rb.body.max_speed
            rb.body.v_cmd = min(max(v, -lim), lim)
            rb.body.w_cmd = min(max(w, -cfg.controller.max_w), cfg.controller.max_w)
            step_kinematics(rb.body, dt, env.slip, rb.motion_rng, arena, cfg.noise)

            for a in actions:
                if a[0] == "SAMPLE_REQUEST":
                    uplink.append(Message("SAMPLE_REQUEST", rb.id, SUPERVISOR, tick, {"x": a[1], "y": a[2]}))
                elif a[0] == "BULLSEYE":
                    uplink.append(Message("BULLSEYE", rb.id, SUPERVISOR, tick, {"x": a[1], "y": a[2]}))
            if tick % sup_every == 0 and rb.est is not None:
                uplink.append(Message("TELEMETRY", rb.id, SUPERVISOR, tick, {
                    "robot_id": rb.id, "est_x": rb.est.x, "est_y": rb.est.y,
                    "est_theta": rb.est.theta, "n_eff": rb.est.n_eff,
                    "underflow_count": rb.ps.underflow_count}))

        # uplink: robot radio drops, then supervisor drains in (tick, robot id) order
        by_robot = {rb.id: rb for rb in robots}
        for msg in uplink:
            if not maybe_drop(msg, env, by_robot[msg.sender].radio_rng):
                dropped += 1
                continue
            msg.delivered = True
            if msg.kind == "SAMPLE_REQUEST":
                requests_received += 1
            for out in sup.handle(msg, tick):
                targets = robots if out.recipient == BROADCAST else [by_robot[out.recipient]]
                for rb in targets:
                    copy = dataclasses.replace(out, recipient=rb.id)
                    if maybe_drop(copy, env, sup_radio):
                        copy.delivered = True
                        rb.inbox.append(copy)
                    else:
                        dropped += 1

        if (tick + 1) % sup_every == 0:
            evaporate(sup.maps)
            if out_dir is not None:
                write_environment_state(out_dir / "environment_state.json", env)

        if tick % cfg.log_every == 0:
            for rb in robots:
                p = rb.body.true_pose
                e = rb.est
                traj.append({
                    "tick": tick, "time_s": tick * dt, "robot_id": rb.id,
                    "true_x": p.x, "true_y": p.y, "true_theta": p.theta,
                    "est_x": e.x if e else math.nan, "est_y": e.y if e else math.nan,
                    "est_theta": e.theta if e else math.nan, "mode": rb.state.mode,
                })
        if all(rb.state.halted for rb in robots):
            break

    time_to_stop = sup.stop_tick * dt if sup.stop_tick is not None else None
    m = compute_run_metrics(sup.maps, rf, traj, time_to_stop)
    row = metrics_row(cfg, m)
    metrics_csv = format_metrics_csv([row])
    grids = {
        "richness": rf.values, "pheromone": sup.maps.P, "visited": sup.maps.V,
        "blocked": sup.maps.B, "counts": sup.maps.C, "coverage_mask": sup.coverage_mask(),
    }
    summary = {
        "seed": cfg.seed, "team_size": cfg.team_size, "pf_enabled": cfg.pf_enabled,
        "coordination": cfg.coordination_enabled, "weather": cfg.weather,
        "ticks_run": last_tick + 1, "sim_time_s": (last_tick + 1) * dt,
        "stop_time_s": time_to_stop, "hotspots": sup.hotspot_log,
        "hotspots_confirmed": sup.maps.hotspots_confirmed,
        "blob_cells": rf.n_blob_cells,
        "sample_requests_received": requests_received,
        "sample_responses": sup.responses_issued,
        "map_updates": sup.map_updates,
        "malformed_requests": sup.malformed_requests,
        "rejected_bullseyes": sup.rejected_bullseyes,
        "duplicate_bullseyes": sup.duplicate_bullseyes,
        "messages_dropped": dropped,
        "metrics": {k: v for k, v in m.as_dict().items() if k != "per_robot"},
        "robots": [{
            "id": rb.id, "blob_entries": rb.state.blob_entries, "blob_exits": rb.state.blob_exits,
            "bullseyes": rb.state.bullseyes, "unstuck": rb.state.unstuck_count,
            "requests_sent": rb.state.requests_sent, "samples_received": rb.state.samples_received,
            "pf_initialized": rb.ps.initialized, "pf_underflows": rb.ps.underflow_count,
            "final_mode": rb.state.mode,
            "mode_time_s": {k: round(v, 4) for k, v in sorted(rb.state.mode_time.items())}, "errors": m.per_robot.get(rb.id),
        } for rb in robots],
    }
    result = RunResult(cfg, m, summary, sup, robots, traj, metrics_csv, grids)
    if out_dir is not None:
        write_artifacts(result, out_dir)
    return result


def write_artifacts(result: RunResult, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    for name, grid in result.grids.items():
        write_grid(out_dir / f"{name}.csv", grid)
    (out_dir / "metrics.csv").write_text(result.metrics_csv)
    lines = [",".join(TRAJ_COLUMNS)] + [_traj_line(r) for r in result.trajectory]
    (out_dir / "trajectory.csv").write_text("\n".join(lines) + "\n")
    for rb in result.robots:
        write_grid(out_dir / f"local_belief_r{rb.id}.csv", rb.state.grid.means)
        write_grid(out_dir / f"local_counts_r{rb.id}.csv", rb.state.grid.counts)
    (out_dir / "run_summary.json").write_text(json.dumps(result.summary, indent=2, sort_keys=True) + "\n")
    (out_dir / "config.txt").write_text(result.config.dumps())
    env = env_params(result.config.weather)
    write_environment_state(out_dir / "environment_state.json", env)


__all__ = ["RunConfig", "RunResult", "run", "apply_overrides", "load_config", "format_grid", "stream"]
