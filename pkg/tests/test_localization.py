import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antswarm.arena import Pose
from antswarm.localization import (ParticleSet, PFConfig, effective_count, estimate, initialize,
                                   localisation_error, predict, systematic_resample, update)

CFG = PFConfig()


def _ps(cfg=CFG, seed=0, at=(0.0, 0.0), heading=0.0):
    return initialize(cfg, at, heading, np.random.default_rng(seed))


def test_initialize_spread():
    ps = _ps()
    assert len(ps) == 150 and ps.initialized
    assert ps.weights.sum() == pytest.approx(1.0)
    assert np.std(ps.x) == pytest.approx(0.05, rel=0.25)


def test_initialize_twice_fails():
    ps = _ps()
    with pytest.raises(RuntimeError):
        initialize(CFG, (0, 0), 0.0, np.random.default_rng(1), ps)


def test_predict_and_update_need_initialisation():
    ps = ParticleSet(10)
    with pytest.raises(RuntimeError):
        predict(ps, 0.1, 0.0, CFG, np.random.default_rng(0))
    with pytest.raises(RuntimeError):
        update(ps, (0, 0), 0.0, CFG)


def test_predict_noise_free_moves_north():
    cfg = PFConfig(motion_d_gain=0, motion_theta_gain=0, d_floor=0, theta_floor=0,
                   init_pos_sd=0, init_heading_sd=0)
    ps = _ps(cfg)
    predict(ps, 1.0, 0.0, cfg, np.random.default_rng(0))
    assert np.allclose(ps.x, 0.0) and np.allclose(ps.y, 1.0)


def test_effective_count_identities():
    n = 150
    assert effective_count(np.full(n, 1 / n)) == pytest.approx(150.0)
    one_hot = np.zeros(n)
    one_hot[17] = 1.0
    assert effective_count(one_hot) == 1.0
    half = np.zeros(n)
    half[:2] = 0.5
    assert effective_count(half) == pytest.approx(2.0)


def test_uniform_resample_preserves_multiset():
    ps = _ps()
    before = sorted(zip(ps.x, ps.y, ps.theta))
    systematic_resample(ps, np.random.default_rng(3))
    assert sorted(zip(ps.x, ps.y, ps.theta)) == before


def test_one_hot_resample_collapses():
    ps = _ps()
    ps.weights = np.zeros(len(ps))
    ps.weights[42] = 1.0
    target = ps.x[42]
    systematic_resample(ps, np.random.default_rng(0))
    assert np.all(ps.x == target)
    assert ps.weights.sum() == pytest.approx(1.0)


def test_resample_expected_copies():
    # each particle's copy count is floor or ceil of N*w under systematic resampling
    rng = np.random.default_rng(9)
    for _ in range(50):
        ps = _ps(seed=int(rng.integers(1e6)))
        w = rng.random(len(ps)) ** 3
        ps.weights = w / w.sum()
        ps.x = np.arange(len(ps), dtype=float)
        expected = len(ps) * ps.weights
        systematic_resample(ps, rng)
        counts = np.bincount(ps.x.astype(int), minlength=len(ps))
        assert np.all(counts >= np.floor(expected) - 1e-9)
        assert np.all(counts <= np.ceil(expected) + 1e-9)


def test_resample_mean_unbiased():
    rng = np.random.default_rng(4)
    ps0 = _ps()
    w = rng.random(len(ps0))
    ps0.weights = w / w.sum()
    target = float(np.dot(ps0.weights, ps0.x))
    means = []
    for k in range(400):
        ps = ps0.copy()
        systematic_resample(ps, np.random.default_rng(k))
        means.append(ps.x.mean())
    se = np.std(means) / math.sqrt(len(means))
    assert abs(np.mean(means) - target) <= 3 * se + 1e-12


def test_heading_estimate_wraps():
    ps = _ps()
    ps.theta = np.where(np.arange(len(ps)) % 2 == 0, math.pi - 0.05, -math.pi + 0.05)
    th = estimate(ps).theta
    assert abs(abs(th) - math.pi) < 0.01


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_weights_normalised_after_update(seed):
    rng = np.random.default_rng(seed)
    ps = _ps(seed=seed)
    for _ in range(25):
        predict(ps, float(rng.uniform(0, 0.03)), float(rng.uniform(-0.1, 0.1)), CFG, rng)
        gps = tuple(rng.normal(0, 0.5, 2)) if rng.random() < 0.5 else None
        est = update(ps, gps, float(rng.uniform(-3, 3)), CFG, rng)
        assert abs(ps.weights.sum() - 1.0) < 1e-9
        assert 1.0 <= est.n_eff <= len(ps)


def test_underflow_resets_uniform():
    ps = _ps()
    update(ps, (1e3, 1e3), None, CFG)
    assert ps.underflow_count == 1
    assert np.allclose(ps.weights, 1 / len(ps))


def test_converges_with_noiseless_matching_models():
    rng = np.random.default_rng(2)
    truth = Pose(0.5, -1.0, 0.3)
    ps = initialize(CFG, (0.6, -1.1), 0.2, rng)
    for _ in range(50):
        d, dth = 0.01, 0.02
        truth.theta += dth
        truth.x += d * math.sin(truth.theta)
        truth.y += d * math.cos(truth.theta)
        predict(ps, d, dth, CFG, rng)
        est = update(ps, (truth.x, truth.y), truth.theta, CFG, rng)
    assert localisation_error(truth, est) < 2 * CFG.gps_sd


def test_localisation_error_345():
    assert localisation_error(Pose(3.0, 4.0, 0.0), Pose(0.0, 0.0, 0.0)) == 5.0


def test_invalid_config():
    with pytest.raises(ValueError):
        PFConfig(alpha=0.0)
    with pytest.raises(ValueError):
        PFConfig(n_particles=1)
