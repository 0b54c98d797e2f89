"""Central supervisor: shared stigmergic maps, sample service, hotspot bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .field import GridSpec, RichnessField, sample, world_to_grid

EVAPORATION = 0.995
HOTSPOTS_TO_STOP = 4

KINDS = ("SAMPLE_REQUEST", "SAMPLE_RESPONSE", "BULLSEYE", "TELEMETRY", "BLOCK", "STOP_ALL")
SUPERVISOR = -1
BROADCAST = -2


@dataclass
class Message:
    kind: str
    sender: int
    recipient: int
    tick_sent: int
    payload: dict[str, Any] = field(default_factory=dict)
    delivered: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")


@dataclass
class SharedMaps:
    spec: GridSpec
    P: np.ndarray = None
    V: np.ndarray = None
    B: np.ndarray = None
    C: np.ndarray = None
    hotspots_confirmed: int = 0
    block_discs: list = field(default_factory=list)
    hotspots: list = field(default_factory=list)  # every counted (x, y)

    def __post_init__(self):
        shape = self.spec.shape
        if self.P is None:
            self.P = np.zeros(shape)
        if self.V is None:
            self.V = np.zeros(shape, dtype=bool)
        if self.B is None:
            self.B = np.zeros(shape, dtype=bool)
        if self.C is None:
            self.C = np.zeros(shape, dtype=np.int64)


def evaporate(maps: SharedMaps) -> None:
    maps.P *= EVAPORATION


def disc_cells(spec: GridSpec, x: float, y: float, r: float) -> np.ndarray:
    """Boolean mask of cells whose centre lies within distance r of (x, y)."""
    cx, cy = spec.cell_centers()
    return (cx - x) ** 2 + (cy - y) ** 2 <= r * r


@dataclass
class SupervisorConfig:
    block_radius: float = 0.7
    sample_noise_sd: float = 0.02
    coordination: bool = True
    validate_level: float = 0.5
    update_blocked_cells: bool = True
    pheromone_hint: bool = True
    pheromone_window: int = 4


class Supervisor:
    """Owns the hidden field and shared maps; answers robot messages in order."""

    def __init__(self, rf: RichnessField, cfg: SupervisorConfig | None = None,
                 rng: np.random.Generator | None = None):
        self.field = rf
        self.cfg = cfg or SupervisorConfig()
        self.maps = SharedMaps(rf.spec)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.malformed_requests = 0
        self.responses_issued = 0
        self.map_updates = 0
        self.rejected_bullseyes = 0
        self.duplicate_bullseyes = 0
        self.stop_sent = False
        self.stop_tick: int | None = None
        self.telemetry: dict[int, dict] = {}
        self.hotspot_log: list[dict] = []

    def handle_sample_request(self, msg: Message, tick: int) -> Message | None:
        x, y = msg.payload.get("x"), msg.payload.get("y")
        if x is None or y is None or not (math.isfinite(x) and math.isfinite(y)):
            self.malformed_requests += 1
            return None
        maps = self.maps
        i, j = world_to_grid(maps.spec, x, y)
        r, grad = sample(self.field, x, y, maps.B, self.cfg.sample_noise_sd, self.rng)
        payload = {"x": x, "y": y, "R": r, "grad": grad}
        if self.cfg.pheromone_hint and self.cfg.coordination:
            payload["pgrad"] = pheromone_push(maps.P, i, j, self.cfg.pheromone_window)
        if self.cfg.update_blocked_cells or not maps.B[j, i]:
            maps.P[j, i] += 1.0
            maps.C[j, i] += 1
            maps.V[j, i] = True
            self.map_updates += 1
        self.responses_issued += 1
        return Message("SAMPLE_RESPONSE", SUPERVISOR, msg.sender, tick, payload)

    def validate_hotspot(self, x: float, y: float) -> bool:
        if not (math.isfinite(x) and math.isfinite(y)):
            return False
        i, j = world_to_grid(self.field.spec, x, y)
        return bool(self.field.clean[j, i] >= self.cfg.validate_level)

    def handle_bullseye(self, msg: Message, tick: int) -> list[Message]:
        x, y = msg.payload["x"], msg.payload["y"]
        if not self.validate_hotspot(x, y):
            self.rejected_bullseyes += 1
            return []
        maps = self.maps
        r = self.cfg.block_radius
        # dedup only against published block discs; without coordination there are none
        if any(math.hypot(x - bx, y - by) <= br for bx, by, br in maps.block_discs):
            self.duplicate_bullseyes += 1
            return []
        maps.hotspots.append((x, y))
        maps.hotspots_confirmed += 1
        self.hotspot_log.append({"tick": tick, "robot": msg.sender, "x": x, "y": y})
        out = []
        if self.cfg.coordination:
            maps.B |= disc_cells(maps.spec, x, y, r)
            maps.block_discs.append((x, y, r))
            out.append(Message("BLOCK", SUPERVISOR, BROADCAST, tick, {"x": x, "y": y, "r": r}))
        if maps.hotspots_confirmed >= HOTSPOTS_TO_STOP and not self.stop_sent:
            self.stop_sent = True
            self.stop_tick = tick
            out.append(Message("STOP_ALL", SUPERVISOR, BROADCAST, tick))
        return out

    def handle_telemetry(self, msg: Message, tick: int) -> None:
        self.telemetry[msg.sender] = dict(msg.payload, tick=msg.tick_sent)

    def handle(self, msg: Message, tick: int) -> list[Message]:
        if msg.kind == "SAMPLE_REQUEST":
            resp = self.handle_sample_request(msg, tick)
            return [resp] if resp is not None else []
        if msg.kind == "BULLSEYE":
            return self.handle_bullseye(msg, tick)
        if msg.kind == "TELEMETRY":
            self.handle_telemetry(msg, tick)
            return []
        raise ValueError(f"supervisor cannot handle {msg.kind}")

    def coverage_mask(self) -> np.ndarray:
        return build_coverage_mask(self.maps, self.field)


def build_coverage_mask(maps: SharedMaps, rf: RichnessField) -> np.ndarray:
    """-1 visited background, 0 untouched background, 1 missed blob, 2 covered blob."""
    mask = np.zeros(rf.spec.shape, dtype=np.int64)
    blob, v = rf.blob_mask, maps.V
    mask[blob & v] = 2
    mask[blob & ~v] = 1
    mask[~blob & v] = -1
    return mask


def pheromone_push(P: np.ndarray, i: int, j: int, window: int) -> tuple[float, float]:
    """Mean pheromone-weighted unit vector from (i, j) toward nearby marked cells.

    Steering against it moves a robot away from recently sampled ground.
    """
    ny, nx = P.shape
    j0, j1 = max(j - window, 0), min(j + window + 1, ny)
    i0, i1 = max(i - window, 0), min(i + window + 1, nx)
    patch = P[j0:j1, i0:i1]
    jj, ii = np.mgrid[j0:j1, i0:i1]
    ox, oy = (ii - i).astype(float), (jj - j).astype(float)
    r = np.hypot(ox, oy)
    keep = (r > 0) & (r <= window)
    if not keep.any():
        return (0.0, 0.0)
    w = patch[keep] / r[keep]
    n = float(keep.sum())
    return (float((w * ox[keep]).sum() / n), float((w * oy[keep]).sum() / n))
