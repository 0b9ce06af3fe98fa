import math

import numpy as np
import pytest

from firefront.assess import (BurnMask, classification_raster, fire_area_series, mean_sorenson, moe,
                              rasterize_polygon, relative_error, rge, ros_direction_stats, sorenson, wrap_angle)
from firefront.geo import FireArrivalField, ValidationError


def _mask(grid, arr):
    return BurnMask(grid, np.asarray(arr, dtype=bool))


def test_area_series(grid, rng):
    f = FireArrivalField.clamped(grid, rng.uniform(0.5, 3.0, grid.shape))
    times = np.linspace(0, 3, 13)
    a = fire_area_series(f, times)
    assert a[0] == 0
    assert a[-1] == grid.size
    assert np.all(np.diff(a) >= 0)
    brute = [int((f.values <= t).sum()) for t in times]
    np.testing.assert_array_equal(a, brute)
    with pytest.raises(ValidationError):
        fire_area_series(f, [2.0, 1.0])


def test_rge_cases(rng):
    a = rng.uniform(1, 100, 20)
    assert rge(a, a) == 0.0
    assert rge(2 * a, a) == pytest.approx(1.0)
    b = rng.uniform(1, 100, 20)
    assert rge(7.5 * b, 7.5 * a) == pytest.approx(rge(b, a), rel=1e-12)
    with pytest.raises(ValidationError):
        rge(a, np.zeros(20))
    with pytest.raises(ValidationError):
        rge(a[:3], a)


def test_moe_cases(grid):
    a = np.zeros(grid.shape, bool)
    a[:10, :10] = True
    assert tuple(moe(_mask(grid, a), _mask(grid, a))) == (1.0, 1.0)
    b = np.zeros(grid.shape, bool)
    b[20:30, 20:30] = True
    assert tuple(moe(_mask(grid, a), _mask(grid, b))) == (0.0, 0.0)
    c = np.zeros(grid.shape, bool)
    c[2:12, :10] = True  # 100 cells, 80 shared
    m = moe(_mask(grid, a), _mask(grid, c))
    assert (m.x, m.y) == (0.8, 0.8)
    assert m.false_negative.sum() == 20 and m.false_positive.sum() == 20
    assert m.norm == pytest.approx(math.hypot(0.8, 0.8))


def test_moe_empty(grid):
    z = np.zeros(grid.shape, bool)
    o = z.copy()
    o[0, 0] = True
    with pytest.raises(ValidationError):
        moe(_mask(grid, z), _mask(grid, o))
    with pytest.raises(ValidationError):
        moe(_mask(grid, o), _mask(grid, z))


def test_nested_masks_moe_y_one(grid, rng):
    ob = rng.random(grid.shape) < 0.5
    pr = ob & (rng.random(grid.shape) < 0.5)
    assert moe(_mask(grid, ob), _mask(grid, pr)).y == 1.0


def test_sorenson_cases(grid):
    a = np.zeros(grid.shape, bool)
    a[:5] = True
    b = np.zeros(grid.shape, bool)
    b[-5:] = True
    assert sorenson(_mask(grid, a), _mask(grid, a)) == 1.0
    assert sorenson(_mask(grid, a), _mask(grid, b)) == 0.0
    z = np.zeros(grid.shape, bool)
    assert sorenson(_mask(grid, z), _mask(grid, z)) == 1.0


def test_sorenson_harmonic_identity(grid):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        p, q = rng.uniform(0.05, 0.95, 2)
        a = _mask(grid, rng.random(grid.shape) < p)
        b = _mask(grid, rng.random(grid.shape) < q)
        m = moe(a, b)
        s = sorenson(a, b)
        assert s == pytest.approx(2 * m.x * m.y / (m.x + m.y), rel=1e-12)
        assert s == sorenson(b, a)
        perm = rng.permutation(grid.size)
        a2 = _mask(grid, a.burned.ravel()[perm].reshape(grid.shape))
        b2 = _mask(grid, b.burned.ravel()[perm].reshape(grid.shape))
        assert sorenson(a2, b2) == s
        assert tuple(moe(a2, b2)) == tuple(m)


def test_mean_sorenson(grid):
    a = np.zeros(grid.shape, bool)
    a[:4] = True
    b = np.zeros(grid.shape, bool)
    b[-4:] = True
    ma, mb = _mask(grid, a), _mask(grid, b)
    assert mean_sorenson([(ma, ma), (ma, mb)]) == 0.5
    with pytest.raises(ValidationError):
        mean_sorenson([])


def test_relative_error(grid, rng):
    t = FireArrivalField.clamped(grid, rng.uniform(0.5, 2.5, grid.shape))
    assert relative_error(t, t) == 0.0
    eps = 0.1
    e = FireArrivalField.clamped(grid, t.values + eps)
    assert relative_error(t, e) == pytest.approx(eps * math.sqrt(grid.size) / np.linalg.norm(t.values), rel=1e-12)
    zero = FireArrivalField.clamped(grid, np.zeros(grid.shape))
    with pytest.raises(ValidationError):
        relative_error(zero, t)


def test_burn_mask_from_field(grid):
    v = np.full(grid.shape, 3.0)
    v[0, 0] = 1.0
    v[0, 1] = 2.0
    f = FireArrivalField.clamped(grid, v)
    assert BurnMask.from_field(f, 2.0).area == 2
    assert BurnMask.from_field(f).area == grid.size
    assert BurnMask.from_field(f, strict=True).area == 2


def test_wrap_angle():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    np.testing.assert_allclose(wrap_angle([3 * math.pi / 2, -3 * math.pi / 2, 0.2]),
                               [-math.pi / 2, math.pi / 2, 0.2])


def test_direction_stats(grid, rng):
    r = rng.uniform(0.01, 0.1, grid.shape)
    th = rng.uniform(-math.pi, math.pi, grid.shape)
    m = np.ones(grid.shape, bool)
    assert ros_direction_stats(r, th, r, th, m) == (0.0, 0.0, 0.0, 0.0)
    mrd, srd, _, _ = ros_direction_stats(r, th, r + 0.1, th, m)
    assert mrd == pytest.approx(0.1) and srd == pytest.approx(0.0, abs=1e-12)
    # +pi and -pi offsets wrap to the same difference
    a = ros_direction_stats(r, th, r, th + math.pi, m)
    b = ros_direction_stats(r, th, r, th - math.pi, m)
    assert a[2] == pytest.approx(b[2]) and a[3] == pytest.approx(b[3], abs=1e-12)
    with pytest.raises(ValidationError):
        ros_direction_stats(r, th, r, th, np.zeros(grid.shape, bool))


def test_classification_raster(grid):
    ob = np.zeros(grid.shape, bool)
    pr = np.zeros(grid.shape, bool)
    ob[0, 0:2] = True
    pr[0, 1:3] = True
    c = classification_raster(_mask(grid, ob), _mask(grid, pr))
    assert list(c[0, :4]) == [2, 1, 3, 0]


def test_rasterize_polygon_disc(grid):
    ang = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    r = 3000.0
    m = rasterize_polygon(grid, r * np.cos(ang), r * np.sin(ang))
    X, Y = grid.mesh()
    want = np.hypot(X, Y) <= r
    assert np.count_nonzero(m.burned != want) <= 8  # only nodes touching the chordal boundary
