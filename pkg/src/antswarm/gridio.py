"""Grid CSV layout shared by every exported map, plus PGM heatmaps."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def format_grid(a: np.ndarray) -> str:
    # row j = 0 first; 6 decimals everywhere so files diff byte-for-byte
    a = np.asarray(a, dtype=float)
    return "".join(",".join(f"{v:.6f}" for v in row) + "\n" for row in a)


def write_grid(path, a: np.ndarray) -> None:
    Path(path).write_text(format_grid(a))


def read_grid(path) -> np.ndarray:
    text = Path(path).read_text().strip()
    if not text:
        raise ValueError(f"{path}: empty grid")
    rows = [[float(v) for v in line.split(",")] for line in text.splitlines() if line.strip()]
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged grid")
    return np.array(rows)


def heatmap_pixels(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ValueError("empty grid")
    top = a.max()
    if top <= 0:
        return np.zeros(a.shape, dtype=int)
    return np.rint(255.0 * np.clip(a, 0, None) / top).astype(int)


def export_heatmap(grid_csv, out_pgm) -> np.ndarray:
    """Write a plain (P2) greyscale PGM, row 0 of the grid as the first image row."""
    px = heatmap_pixels(read_grid(grid_csv))
    h, w = px.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(str(v) for v in row) for row in px]
    Path(out_pgm).write_text("\n".join(lines) + "\n")
    return px
