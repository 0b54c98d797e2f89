"""Acceptance gate: one PASS/FAIL line per criterion, printed even under capture.

Run standalone with ``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from antswarm.experiments import experiment_preset
from antswarm.field import BlobParams, GridSpec, build_field, gradient_at
from antswarm.localization import (ParticleSet, PFConfig, effective_count, initialize, predict,
                                   systematic_resample, update)
from antswarm.metrics import f1_score, pf_error_stats
from antswarm.sim import RunConfig, apply_overrides, run
from antswarm.supervisor import SharedMaps, disc_cells, evaporate

SEEDS = list(range(10))
SPEC = GridSpec()


def report(capsys, n, ok, detail):
    with capsys.disabled():
        sys.stdout.write(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}\n")
    assert ok, detail


@pytest.fixture(scope="module")
def sweeps():
    cache = {}
    exp1 = experiment_preset(1, SEEDS, cache=cache)
    exp3 = experiment_preset(3, SEEDS, cache=cache)
    return exp1, exp3


def _all_runs(sweeps):
    exp1, exp3 = sweeps
    seen = {}
    for rep in (exp1, exp3):
        for results in rep["results"].values():
            for r in results:
                seen[id(r)] = r
    return list(seen.values())


def test_c01_f1_closed_form(capsys):
    pairs = [((17.0, 20.0), 0.184), ((34.4, 46.7), 0.396), ((26.1, 65.6), 0.373),
             ((26.1, 65.6), 0.373), ((16.7, 33.9), 0.223)]
    got = [round(f1_score(p / 100, r / 100), 4) for (p, r), _ in pairs]
    ok = all(abs(g - want) <= 1e-3 for g, (_, want) in zip(got, pairs))
    report(capsys, 1, ok, f"F1 from published (P,R) pairs = {got}")


def _oracle(values, i, j, dx, dy):
    ny, nx = len(values), len(values[0])
    ip, im = min(i + 1, nx - 1), max(i - 1, 0)
    jp, jm = min(j + 1, ny - 1), max(j - 1, 0)
    return ((values[j][ip] - values[j][im]) / (2.0 * dx), (values[jp][i] - values[jm][i]) / (2.0 * dy))


def test_c02_gradient_oracle(capsys):
    rng = np.random.default_rng(2024)
    bad = 0
    for k in range(100):
        centers = tuple((float(rng.uniform(0, 49)), float(rng.uniform(0, 49))) for _ in range(4))
        rf = build_field(SPEC, BlobParams(centers=centers, sigma=float(rng.uniform(1.5, 6.0))), int(k))
        vals = rf.values
        lst = vals.tolist()
        for j in range(50):
            for i in range(50):
                if gradient_at(vals, i, j, SPEC.dx, SPEC.dy) != _oracle(lst, i, j, SPEC.dx, SPEC.dy):
                    bad += 1
    report(capsys, 2, bad == 0, f"100 random fields x 2500 cells, {bad} gradient mismatches")


def test_c03_pf_identities(capsys):
    n = 150
    uni = effective_count(np.full(n, 1 / n))
    hot = np.zeros(n)
    hot[7] = 1.0
    one = effective_count(hot)
    rng = np.random.default_rng(3)
    ps = initialize(PFConfig(), (0.0, 0.0), 0.0, rng)
    before = sorted(zip(ps.x, ps.y, ps.theta))
    systematic_resample(ps, rng)
    multiset = sorted(zip(ps.x, ps.y, ps.theta)) == before
    worst = 0.0
    cfg = PFConfig()
    ps = initialize(cfg, (0.0, 0.0), 0.0, rng)
    for _ in range(10_000):
        predict(ps, float(rng.uniform(0, 0.03)), float(rng.uniform(-0.1, 0.1)), cfg, rng)
        gps = (float(rng.normal(0, 0.3)), float(rng.normal(0, 0.3))) if rng.random() < 0.3 else None
        update(ps, gps, float(rng.uniform(-math.pi, math.pi)), cfg, rng)
        worst = max(worst, abs(ps.weights.sum() - 1.0))
    ok = uni == pytest.approx(150.0) and one == 1.0 and multiset and worst <= 1e-9
    report(capsys, 3, ok, f"N_eff uniform={uni:.6f} one-hot={one} multiset={multiset} "
                          f"max |sum w - 1| over 1e4 updates={worst:.2e}")


def test_c04_pf_convergence_band(capsys):
    rows = []
    for s in SEEDS:
        r = run(RunConfig(seed=s, team_size=1, horizon_s=120.0, weather="clear"))
        rows += [dict(t, robot_id=s) for t in r.trajectory]
    _, (mae, rmse, mx) = pf_error_stats(rows)
    ok = mae is not None and mae <= 0.30 and rmse <= 0.45
    report(capsys, 4, ok, f"single robot 120 s x 10 seeds: MAE={mae:.4f} m RMSE={rmse:.4f} m max={mx:.4f} m")


def test_c05_pf_off_ablation(capsys):
    details = []
    ok = True
    for s in (0, 1, 2):
        r = run(RunConfig(seed=s, team_size=5, pf_enabled=False, horizon_s=300.0))
        m = r.metrics
        this = (r.summary["sample_requests_received"] == 0 and not r.grids["visited"].any()
                and r.grids["counts"].sum() == 0 and (m.mae, m.rmse, m.max_err) == (None, None, None))
        ok &= this
        details.append(f"seed {s}: requests={r.summary['sample_requests_received']} "
                       f"|V|={int(r.grids['visited'].sum())} mae={m.mae}")
    report(capsys, 5, ok, "; ".join(details))


def test_c06_team_size_trend(capsys, sweeps):
    exp1, _ = sweeps
    a = exp1["arms"]
    cov = [a[k]["coverage"]["median"] for k in ("N1", "N3", "N5")]
    rec = [a[k]["recall"]["median"] for k in ("N1", "N3", "N5")]
    d1, d5 = a["N1"]["detected"]["median"], a["N5"]["detected"]["median"]
    ok = cov[0] < cov[1] < cov[2] and rec[0] < rec[1] < rec[2] and d5 >= d1
    report(capsys, 6, ok, "medians over 10 seeds N=1,3,5: coverage="
           f"{[round(c, 4) for c in cov]} recall={[round(r, 4) for r in rec]} detected N1={d1} N5={d5}")


def test_c07_coordination_trend(capsys, sweeps):
    _, exp3 = sweeps
    a = exp3["arms"]
    red_on, red_off = a["coord_on"]["redundancy"]["median"], a["coord_off"]["redundancy"]["median"]
    rec_on, rec_off = a["coord_on"]["recall"]["median"], a["coord_off"]["recall"]["median"]
    blocked = [r.metrics.blocked_fraction for r in exp3["results"]["coord_off"]]
    ok = red_on < red_off and rec_on > rec_off and all(b == 0.0 for b in blocked)
    report(capsys, 7, ok, f"N=5 medians: redundancy ON={red_on:.4f} OFF={red_off:.4f}; "
                          f"recall ON={rec_on:.4f} OFF={rec_off:.4f}; OFF blocked max={max(blocked)}")


def test_c08_supervisor_ledger(capsys, sweeps):
    runs = _all_runs(sweeps)
    ledger_ok = all(int(r.grids["counts"].sum()) == r.supervisor.map_updates for r in runs)
    rng = np.random.default_rng(8)
    m = SharedMaps(SPEC)
    m.P[:] = rng.random(SPEC.shape) * 10
    p0 = m.P.copy()
    err = 0.0
    for k in range(1, 301):
        evaporate(m)
        err = max(err, float(np.abs(m.P - p0 * 0.995 ** k).max()))
    ok = ledger_ok and err <= 1e-12
    report(capsys, 8, ok, f"sum C == map-updating responses on {len(runs)} runs: {ledger_ok}; "
                          f"evaporation max deviation over 300 ticks={err:.2e}")


def test_c09_block_disc_oracle(capsys):
    rng = np.random.default_rng(9)
    cx_all = -5.0 + (np.arange(50) + 0.5) * 0.2
    mism = 0
    for _ in range(50):
        x, y = rng.uniform(-5, 5, 2)
        r = float(rng.uniform(0.05, 2.5))
        got = disc_cells(SPEC, float(x), float(y), r)
        scan = np.zeros((50, 50), dtype=bool)
        for j in range(50):
            for i in range(50):
                scan[j, i] = (cx_all[i] - x) ** 2 + (cx_all[j] - y) ** 2 <= r * r
        mism += int((got != scan).sum())
    report(capsys, 9, mism == 0, f"50 random discs vs exhaustive scan: {mism} mismatched cells")


def test_c10_determinism(capsys, tmp_path):
    cfg = RunConfig(seed=5, team_size=5, horizon_s=200.0)
    run(apply_overrides(cfg, {"out": str(tmp_path / "a")}))
    run(apply_overrides(cfg, {"out": str(tmp_path / "b")}))
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    diff = [n for n in names if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes()]
    report(capsys, 10, "metrics.csv" in names and not diff,
           f"{len(names)} CSV artefacts compared byte-for-byte, differing: {diff or 'none'}")


def test_c11_mask_encoding(capsys, sweeps):
    runs = _all_runs(sweeps)
    ok = True
    for r in runs:
        mask = r.grids["coverage_mask"]
        ok &= set(np.unique(mask)) <= {0, -1, 1, 2}
        ok &= int((mask == 1).sum() + (mask == 2).sum()) == 180
    report(capsys, 11, bool(ok), f"{len(runs)} run masks use only {{0,-1,1,2}} with #1+#2 = 180")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
