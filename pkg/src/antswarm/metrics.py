"""Coverage, detection, redundancy, entropy and localisation-error metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

UNDEFINED = None


@dataclass
class RunMetrics:
    world_coverage: float
    blob_recall: float
    precision: float
    f1: float
    accuracy: float
    blobs_detected: int
    time_to_stop_all: float | None
    redundancy: float
    visit_entropy: float | None
    blocked_fraction: float
    total_samples: int
    unique_cells: int
    mae: float | None
    rmse: float | None
    max_err: float | None
    per_robot: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s == 0 else 2.0 * precision * recall / s


def coverage_metrics(V: np.ndarray, blob_mask: np.ndarray, blob_labels: np.ndarray | None = None):
    """(coverage, recall, precision, f1, accuracy, detected) for a visited mask.

    Unvisited background cells count as true negatives for accuracy.
    """
    total = V.size
    tp = int(np.count_nonzero(V & blob_mask))
    n_v = int(np.count_nonzero(V))
    n_blob = int(np.count_nonzero(blob_mask))
    tn = int(np.count_nonzero(~V & ~blob_mask))
    coverage = n_v / total
    recall = tp / n_blob if n_blob else 0.0
    precision = tp / n_v if n_v else 0.0
    accuracy = (tp + tn) / total
    if blob_labels is None:
        detected = int(tp > 0)
    else:
        hit = blob_labels[V & blob_mask]
        detected = int(len(np.unique(hit[hit >= 0])))
    return coverage, recall, precision, f1_score(precision, recall), accuracy, detected


def redundancy(total_samples: int, unique_cells: int) -> float:
    if unique_cells < 0 or total_samples < 0:
        raise ValueError("counts must be non-negative")
    if unique_cells > total_samples:
        raise ValueError("unique cells cannot exceed total samples")
    if total_samples == 0:
        return 0.0
    return 1.0 - unique_cells / total_samples


def visit_entropy(C: np.ndarray) -> float | None:
    """Shannon entropy (nats) of the visit distribution; None for no visits."""
    total = C.sum()
    if total <= 0:
        return UNDEFINED
    p = C[C > 0].astype(float) / float(total)
    return float(-(p * np.log(p)).sum())


def error_stats(errors) -> tuple[float | None, float | None, float | None]:
    e = np.asarray([v for v in errors if v is not None and math.isfinite(v)], dtype=float)
    if e.size == 0:
        return (UNDEFINED, UNDEFINED, UNDEFINED)
    return (float(np.mean(e)), float(np.sqrt(np.mean(e * e))), float(np.max(e)))


def pf_error_stats(rows) -> tuple[dict, tuple]:
    """Per-robot and pooled (mae, rmse, max) from trajectory-log rows.

    Rows are mappings with robot_id, true_x, true_y, est_x, est_y.
    """
    per: dict[int, list] = {}
    for r in rows:
        ex, ey = float(r["est_x"]), float(r["est_y"])
        if not (math.isfinite(ex) and math.isfinite(ey)):
            continue
        e = math.hypot(float(r["true_x"]) - ex, float(r["true_y"]) - ey)
        per.setdefault(int(r["robot_id"]), []).append(e)
    pooled = [e for rid in sorted(per) for e in per[rid]]
    return {rid: error_stats(per[rid]) for rid in sorted(per)}, error_stats(pooled)


def compute_run_metrics(maps, rf, traj_rows, time_to_stop: float | None) -> RunMetrics:
    cov, rec, prec, f1, acc, det = coverage_metrics(maps.V, rf.blob_mask, rf.blob_labels)
    total = int(maps.C.sum())
    unique = int(np.count_nonzero(maps.V))
    per, (mae, rmse, mx) = pf_error_stats(traj_rows)
    return RunMetrics(
        world_coverage=cov, blob_recall=rec, precision=prec, f1=f1, accuracy=acc,
        blobs_detected=det, time_to_stop_all=time_to_stop,
        redundancy=redundancy(total, unique), visit_entropy=visit_entropy(maps.C),
        blocked_fraction=float(np.count_nonzero(maps.B)) / maps.B.size,
        total_samples=total, unique_cells=unique, mae=mae, rmse=rmse, max_err=mx,
        per_robot={rid: {"mae": s[0], "rmse": s[1], "max_err": s[2]} for rid, s in per.items()},
    )


METRICS_COLUMNS = ("seed", "team_size", "pf_enabled", "coordination", "weather", "coverage",
                   "recall", "precision", "f1", "accuracy", "detected", "time_to_stop_s",
                   "redundancy", "entropy_nats", "blocked_frac", "mae_m", "rmse_m", "max_err_m")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6f}"


def metrics_row(cfg, m: RunMetrics) -> dict:
    return {
        "seed": cfg.seed, "team_size": cfg.team_size, "pf_enabled": cfg.pf_enabled,
        "coordination": cfg.coordination_enabled, "weather": cfg.weather,
        "coverage": m.world_coverage, "recall": m.blob_recall, "precision": m.precision,
        "f1": m.f1, "accuracy": m.accuracy, "detected": m.blobs_detected,
        "time_to_stop_s": m.time_to_stop_all, "redundancy": m.redundancy,
        "entropy_nats": m.visit_entropy, "blocked_frac": m.blocked_fraction,
        "mae_m": m.mae, "rmse_m": m.rmse, "max_err_m": m.max_err,
    }


def format_metrics_csv(rows) -> str:
    lines = [",".join(METRICS_COLUMNS)]
    for r in rows:
        lines.append(",".join(r["weather"] if k == "weather" else _fmt(r[k]) for k in METRICS_COLUMNS))
    return "\n".join(lines) + "\n"
