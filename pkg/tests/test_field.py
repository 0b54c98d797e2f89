
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from antswarm.field import (BlobParams, GridSpec, RichnessField, build_field, gradient_at,
                            sample, world_to_grid)

SPEC = GridSpec()


def brute_gradient(values, i, j, dx, dy):
    # pure-Python restatement of the clamped central difference
    ny, nx = len(values), len(values[0])
    right = values[j][i + 1] if i + 1 < nx else values[j][nx - 1]
    left = values[j][i - 1] if i - 1 >= 0 else values[j][0]
    up = values[j + 1][i] if j + 1 < ny else values[ny - 1][i]
    down = values[j - 1][i] if j - 1 >= 0 else values[0][i]
    return ((right - left) / (2.0 * dx), (up - down) / (2.0 * dy))


def _field_from(values):
    ny, nx = values.shape
    spec = GridSpec(nx=nx, ny=ny)
    mask = np.zeros(values.shape, dtype=bool)
    return RichnessField(spec, values, mask, np.full(values.shape, -1), values)


def test_grid_spacing():
    assert SPEC.dx == pytest.approx(0.2)
    assert SPEC.dy == pytest.approx(0.2)


@pytest.mark.parametrize("xy,ij", [
    ((-5.0, -5.0), (0, 0)),
    ((4.999, 4.999), (49, 49)),
    ((0.0, 0.0), (25, 25)),
    ((5.0, 5.0), (49, 49)),
    ((-7.0, 12.0), (0, 49)),
])
def test_world_to_grid(xy, ij):
    assert world_to_grid(SPEC, *xy) == ij


@given(st.floats(-6, 6), st.floats(-6, 6), st.floats(0, 3))
def test_world_to_grid_monotone(x, y, step):
    i0, j0 = world_to_grid(SPEC, x, y)
    i1, j1 = world_to_grid(SPEC, x + step, y + step)
    assert i1 >= i0 and j1 >= j0
    assert 0 <= i0 < 50 and 0 <= j0 < 50


def test_world_to_grid_surjective():
    hit = {world_to_grid(SPEC, *SPEC.cell_center(i, j)) for i in range(50) for j in range(50)}
    assert len(hit) == 2500


def test_reference_field_blob_cells():
    rf = build_field(SPEC, BlobParams(), 0)
    assert rf.n_blob_cells == 180
    assert [int((rf.blob_labels == k).sum()) for k in range(4)] == [45] * 4
    assert rf.values.max() == 1.0
    assert rf.values.min() >= 0.0


def test_field_deterministic():
    a = build_field(SPEC, BlobParams(), 7)
    b = build_field(SPEC, BlobParams(), 7)
    assert np.array_equal(a.values, b.values)
    c = build_field(SPEC, BlobParams(), 8)
    assert not np.array_equal(a.values, c.values)


def test_noise_free_peak_is_one():
    rf = build_field(SPEC, BlobParams(noise_amp=0.0), 0)
    assert rf.values.max() == 1.0
    for mx, my in BlobParams().centers:
        # the other three blobs add only a vanishing tail at each peak
        assert rf.values[int(my), int(mx)] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("bad", [
    BlobParams(sigma=0.0),
    BlobParams(sigma=-1.0),
    BlobParams(centers=((10, 10), (20, 20), (30, 30), (60, 10))),
    BlobParams(centers=((10, 10), (20, 20), (30, 30))),
])
def test_build_rejects_invalid_blobs(bad):
    with pytest.raises(ValueError):
        build_field(SPEC, bad, 0)


def test_constant_field_zero_gradient():
    rf = _field_from(np.full((50, 50), 0.4))
    r, g = sample(rf, 0.1, 0.1, None, 0.0, np.random.default_rng(0))
    assert r == 0.4
    assert g == (0.0, 0.0)


def test_ramp_gradient():
    i = np.arange(50)
    values = np.tile(i * 0.2, (50, 1))
    rf = _field_from(values)
    _, g = sample(rf, 0.3, -1.1, None, 0.0, np.random.default_rng(0))
    assert g[0] == pytest.approx(1.0, abs=1e-12)
    assert g[1] == 0.0


def test_blocked_cell_reads_zero():
    rf = build_field(SPEC, BlobParams(), 0)
    blocked = np.zeros((50, 50), dtype=bool)
    cx, cy = rf.blob_center_world(0)
    i, j = world_to_grid(SPEC, cx, cy)
    blocked[j, i] = True
    r, g = sample(rf, cx, cy, blocked, 0.02, np.random.default_rng(0))
    assert (r, g) == (0.0, (0.0, 0.0))


def test_noise_free_sample_is_exact():
    rf = build_field(SPEC, BlobParams(), 3)
    rng = np.random.default_rng(0)
    for i in range(0, 50, 7):
        for j in range(0, 50, 5):
            x, y = SPEC.cell_center(i, j)
            assert sample(rf, x, y, None, 0.0, rng)[0] == rf.values[j, i]


def test_sample_noise_clamped():
    rf = build_field(SPEC, BlobParams(), 0)
    rng = np.random.default_rng(1)
    cx, cy = rf.blob_center_world(1)
    vals = [sample(rf, cx, cy, None, 0.5, rng)[0] for _ in range(200)]
    assert min(vals) >= 0.0 and max(vals) <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gradient_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    values = rng.random((50, 50))
    for j in range(50):
        for i in range(50):
            assert gradient_at(values, i, j, 0.2, 0.2) == brute_gradient(values.tolist(), i, j, 0.2, 0.2)


def test_border_gradient_one_sided():
    values = np.tile(np.arange(50) * 0.2, (50, 1))
    gx, _ = gradient_at(values, 0, 10, 0.2, 0.2)
    # clamped neighbour: (v[1] - v[0]) / (2 dx)
    assert gx == pytest.approx(0.5)
