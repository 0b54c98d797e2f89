"""Multi-seed experiment presets: arm matrices, aggregation and hypothesis checks."""

from __future__ import annotations

import dataclasses
import json
import statistics
from pathlib import Path

import numpy as np

from .metrics import format_metrics_csv, metrics_row
from .sim import RunConfig, RunResult, run

# metric name -> RunMetrics attribute, in report order
REPORT_METRICS = {
    "coverage": "world_coverage",
    "recall": "blob_recall",
    "precision": "precision",
    "f1": "f1",
    "accuracy": "accuracy",
    "detected": "blobs_detected",
    "time_to_stop_s": "time_to_stop_all",
    "redundancy": "redundancy",
    "entropy_nats": "visit_entropy",
    "blocked_frac": "blocked_fraction",
    "total_samples": "total_samples",
    "unique_cells": "unique_cells",
    "mae_m": "mae",
    "rmse_m": "rmse",
    "max_err_m": "max_err",
}


def preset_arms(which: int, base: RunConfig | None = None) -> dict[str, RunConfig]:
    """Arm name -> config template (seed filled in per run)."""
    base = base or RunConfig()
    if which == 1:
        return {f"N{n}": dataclasses.replace(base, team_size=n, pf_enabled=True, coordination_enabled=True)
                for n in (1, 3, 5)}
    if which == 2:
        return {
            "pf_on": dataclasses.replace(base, team_size=5, pf_enabled=True, coordination_enabled=True),
            "pf_off": dataclasses.replace(base, team_size=5, pf_enabled=False, coordination_enabled=True),
        }
    if which == 3:
        return {
            "coord_on": dataclasses.replace(base, team_size=5, pf_enabled=True, coordination_enabled=True),
            "coord_off": dataclasses.replace(base, team_size=5, pf_enabled=True, coordination_enabled=False),
        }
    raise ValueError(f"unknown preset {which!r}; expected 1, 2 or 3")


def run_arm(template: RunConfig, seeds, out_dir: Path | None = None) -> list[RunResult]:
    results = []
    for s in seeds:
        cfg = dataclasses.replace(template, seed=int(s),
                                  out=str(out_dir / f"seed_{s}") if out_dir is not None else None)
        results.append(run(cfg))
    return results


def summarize(values) -> dict:
    """Median and interquartile range over the defined values; None if there are none."""
    vals = [float(v) for v in values if v is not None]
    if not vals:
        return {"median": None, "iqr": None, "n": 0}
    q1, q3 = np.percentile(vals, [25, 75])
    return {"median": float(statistics.median(vals)), "iqr": float(q3 - q1), "n": len(vals)}


def aggregate(results: list[RunResult]) -> dict:
    out = {name: summarize([getattr(r.metrics, attr) for r in results])
           for name, attr in REPORT_METRICS.items()}
    out["blob_entries"] = summarize([sum(rb["blob_entries"] for rb in r.summary["robots"]) for r in results])
    out["sample_requests"] = summarize([r.summary["sample_requests_received"] for r in results])
    return out


def _med(agg: dict, arm: str, metric: str):
    return agg[arm][metric]["median"]


def _lt(a, b) -> bool:
    return a is not None and b is not None and a < b


def hypothesis_checks(which: int, agg: dict) -> dict[str, dict]:
    """Direction checks against the expected experimental outcomes."""
    checks: dict[str, dict] = {}
    if which == 1:
        cov = [_med(agg, a, "coverage") for a in ("N1", "N3", "N5")]
        rec = [_med(agg, a, "recall") for a in ("N1", "N3", "N5")]
        det1, det5 = _med(agg, "N1", "detected"), _med(agg, "N5", "detected")
        checks["H1a"] = {
            "claim": "coverage and recall rise with team size",
            "holds": _lt(cov[0], cov[1]) and _lt(cov[1], cov[2]) and _lt(rec[0], rec[1])
            and _lt(rec[1], rec[2]) and det5 is not None and det1 is not None and det5 >= det1,
            "coverage": cov, "recall": rec, "detected": [det1, det5],
        }
        # naive baseline: N copies of the single-robot sample stream, fully overlapping
        t1, u1 = _med(agg, "N1", "total_samples"), _med(agg, "N1", "unique_cells")
        rows = {}
        ok = bool(t1)
        for arm, n in (("N3", 3), ("N5", 5)):
            naive = 1.0 - u1 / (n * t1) if t1 else None
            red = _med(agg, arm, "redundancy")
            rows[arm] = {"redundancy": red, "naive": naive}
            ok = ok and _lt(red, naive)
        checks["H1b"] = {"claim": "redundancy grows slower than a full-overlap baseline",
                         "holds": ok, **rows}
    elif which == 2:
        on_e, off_e = _med(agg, "pf_on", "blob_entries"), _med(agg, "pf_off", "blob_entries")
        checks["H2a"] = {"claim": "only localised robots react to hotspots",
                         "holds": bool(on_e and on_e > 0 and off_e == 0),
                         "blob_entries": [on_e, off_e]}
        on_s, off_s = _med(agg, "pf_on", "sample_requests"), _med(agg, "pf_off", "sample_requests")
        on_c, off_c = _med(agg, "pf_on", "coverage"), _med(agg, "pf_off", "coverage")
        checks["H2b"] = {"claim": "without localisation there are no samples and no coverage",
                         "holds": bool(on_s and on_s > 0 and on_c and on_c > 0 and off_s == 0 and off_c == 0),
                         "sample_requests": [on_s, off_s], "coverage": [on_c, off_c]}
    elif which == 3:
        r_on, r_off = _med(agg, "coord_on", "redundancy"), _med(agg, "coord_off", "redundancy")
        checks["H3a"] = {"claim": "coordination lowers redundancy", "holds": _lt(r_on, r_off),
                         "redundancy": [r_on, r_off]}
        c_on, c_off = _med(agg, "coord_on", "recall"), _med(agg, "coord_off", "recall")
        d_on, d_off = _med(agg, "coord_on", "detected"), _med(agg, "coord_off", "detected")
        checks["H3b"] = {"claim": "coordination keeps or improves recall and blobs found",
                         "holds": c_on is not None and c_off is not None and c_on >= c_off
                         and d_on is not None and d_off is not None and d_on >= d_off,
                         "recall": [c_on, c_off], "detected": [d_on, d_off]}
    return checks


def experiment_preset(which: int, seeds, out: str | Path | None = None,
                      base: RunConfig | None = None, cache: dict | None = None) -> dict:
    """Run every arm of a preset over ``seeds`` and return the aggregated report.

    ``cache`` maps (arm config without seed, seed) to results so callers can share
    identical arms across presets.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("seeds must be non-empty")
    out_dir = Path(out) if out is not None else None
    arms = preset_arms(which, base)
    per_arm: dict[str, list[RunResult]] = {}
    for name, template in arms.items():
        arm_dir = out_dir / name if out_dir is not None else None
        if cache is None or arm_dir is not None:
            per_arm[name] = run_arm(template, seeds, arm_dir)
            continue
        key = template.dumps()
        got = []
        for s in seeds:
            if (key, s) not in cache:
                cache[(key, s)] = run_arm(template, [s])[0]
            got.append(cache[(key, s)])
        per_arm[name] = got
    agg = {name: aggregate(res) for name, res in per_arm.items()}
    report = {"preset": which, "seeds": seeds, "arms": agg, "hypotheses": hypothesis_checks(which, agg)}
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = [metrics_row(r.config, r.metrics) for res in per_arm.values() for r in res]
        (out_dir / "metrics.csv").write_text(format_metrics_csv(rows))
        (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    report["results"] = per_arm
    return report


def format_report(report: dict) -> str:
    lines = [f"preset {report['preset']} over {len(report['seeds'])} seeds (median [IQR])"]
    for arm, agg in report["arms"].items():
        parts = []
        for k in ("coverage", "recall", "precision", "f1", "detected", "redundancy", "time_to_stop_s", "mae_m"):
            s = agg[k]
            parts.append(f"{k}=--" if s["median"] is None else f"{k}={s['median']:.3f} [{s['iqr']:.3f}]")
        lines.append(f"  {arm:10s} " + " ".join(parts))
    for h, c in report["hypotheses"].items():
        lines.append(f"  {h}: {'holds' if c['holds'] else 'does not hold'} ({c['claim']})")
    return "\n".join(lines)
