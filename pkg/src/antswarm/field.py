"""Hidden richness field on a regular grid, its gradient, and the world/grid transform."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    nx: int = 50
    ny: int = 50
    x_min: float = -5.0
    x_max: float = 5.0
    y_min: float = -5.0
    y_max: float = 5.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 cells per axis")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty grid extent")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        # arrays are indexed [j, i] (row = y)
        return (self.ny, self.nx)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates of every cell center as two (ny, nx) arrays."""
        xs = self.x_min + (np.arange(self.nx) + 0.5) * self.dx
        ys = self.y_min + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(xs, ys)

    def cell_center(self, i: int, j: int) -> tuple[float, float]:
        return (self.x_min + (i + 0.5) * self.dx, self.y_min + (j + 0.5) * self.dy)


def world_to_grid(spec: GridSpec, x: float, y: float) -> tuple[int, int]:
    """Map a world point to (i, j); points outside the extent are clamped."""
    i = math.floor((x - spec.x_min) / spec.dx)
    j = math.floor((y - spec.y_min) / spec.dy)
    return (min(max(i, 0), spec.nx - 1), min(max(j, 0), spec.ny - 1))


# Default blob layout: one blob per quadrant, spaced so the Gaussians barely
# interact. With sigma in [3.06, 3.40) cells each blob owns 45 mask cells.
DEFAULT_CENTERS = ((13.0, 14.0), (37.0, 17.0), (16.0, 37.0), (36.0, 35.0))


@dataclass(frozen=True)
class BlobParams:
    centers: tuple[tuple[float, float], ...] = DEFAULT_CENTERS
    sigma: float = 3.2
    noise_amp: float = 0.02
    mask_level: float = 0.5

    def validate(self, spec: GridSpec) -> None:
        if len(self.centers) != 4:
            raise ValueError(f"expected 4 blob centers, got {len(self.centers)}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.noise_amp < 0:
            raise ValueError("noise_amp must be non-negative")
        for mx, my in self.centers:
            if not (0 <= mx <= spec.nx - 1 and 0 <= my <= spec.ny - 1):
                raise ValueError(f"blob center {(mx, my)} outside the grid")


@dataclass
class RichnessField:
    spec: GridSpec
    values: np.ndarray
    blob_mask: np.ndarray
    blob_labels: np.ndarray  # index of the owning blob, -1 off-blob
    clean: np.ndarray  # un-noised mixture scaled to max 1
    centers: tuple[tuple[float, float], ...] = field(default=())

    @property
    def n_blob_cells(self) -> int:
        return int(self.blob_mask.sum())

    def blob_center_world(self, k: int) -> tuple[float, float]:
        mx, my = self.centers[k]
        return (self.spec.x_min + (mx + 0.5) * self.spec.dx,
                self.spec.y_min + (my + 0.5) * self.spec.dy)


def gaussian_mixture(spec: GridSpec, blobs: BlobParams) -> np.ndarray:
    """Per-blob Gaussian stack of shape (4, ny, nx), evaluated in grid units."""
    j, i = np.mgrid[0:spec.ny, 0:spec.nx].astype(float)
    parts = [np.exp(-((i - mx) ** 2 + (j - my) ** 2) / (2.0 * blobs.sigma ** 2))
             for mx, my in blobs.centers]
    return np.stack(parts)


def build_field(spec: GridSpec, blobs: BlobParams, rng_seed: int) -> RichnessField:
    blobs.validate(spec)
    parts = gaussian_mixture(spec, blobs)
    mixture = parts.sum(axis=0)
    rng = np.random.default_rng(rng_seed)
    noisy = mixture + rng.uniform(0.0, blobs.noise_amp, size=mixture.shape)
    values = noisy / noisy.max()
    clean = mixture / mixture.max()
    mask = clean >= blobs.mask_level
    labels = np.where(mask, parts.argmax(axis=0), -1)
    return RichnessField(spec=spec, values=values, blob_mask=mask,
                         blob_labels=labels, clean=clean, centers=tuple(blobs.centers))


def gradient_at(values: np.ndarray, i: int, j: int, dx: float, dy: float) -> tuple[float, float]:
    """Central difference with neighbour indices clamped into the grid."""
    ny, nx = values.shape
    ip, im = min(i + 1, nx - 1), max(i - 1, 0)
    jp, jm = min(j + 1, ny - 1), max(j - 1, 0)
    gx = (values[j, ip] - values[j, im]) / (2.0 * dx)
    gy = (values[jp, i] - values[jm, i]) / (2.0 * dy)
    return (float(gx), float(gy))


def sample(rf: RichnessField, x: float, y: float, blocked: np.ndarray | None,
           noise_sd: float, rng: np.random.Generator) -> tuple[float, tuple[float, float]]:
    """Noisy richness and gradient at the cell containing (x, y).

    Blocked cells read as zero with a zero gradient.
    """
    i, j = world_to_grid(rf.spec, x, y)
    if blocked is not None and blocked[j, i]:
        return 0.0, (0.0, 0.0)
    r = float(rf.values[j, i])
    if noise_sd > 0:
        r = min(max(r + rng.normal(0.0, noise_sd), 0.0), 1.0)
    return r, gradient_at(rf.values, i, j, rf.spec.dx, rf.spec.dy)
