import math

import numpy as np
import pytest

from firefront.assess import fire_area_series
from firefront.geo import FireArrivalField, FireDomain, GeoPoint, Kind, ValidationError, build_grid
from firefront.ros import ros_field
from firefront.synth import (ConeSpec, cone_field, fireline_1d, granule_schedule, polygon_area,
                             scatter_detections, scatter_nonfire, synth_perimeter)

SLOPE = 1 / (0.03 * 86400)


@pytest.fixture(scope="module")
def g200():
    dom = FireDomain.around(40.0, -120.0, 49750.0, 49750.0, 0.0, 5.0)
    return build_grid(dom, 250.0)


def test_cone_apex_and_symmetry(grid):
    f = cone_field(ConeSpec(grid.domain.center, 0.4, (SLOPE,)), grid)
    assert f.values[20, 20] == pytest.approx(0.4, abs=1e-12)
    X, Y = grid.mesh()
    r = np.round(np.hypot(X, Y), 6)
    for d in np.unique(r)[:30]:
        vals = f.values[r == d]
        assert np.ptp(vals) < 1e-12


def test_cone_lobes_take_max(grid):
    c = grid.domain.center
    a = ConeSpec(c, 0.2, (SLOPE,), (0.0,), (0.4,))
    b = ConeSpec(c, 0.2, (SLOPE * 1.2,), (2.0,), (0.1,))
    both = ConeSpec(c, 0.2, (SLOPE, SLOPE * 1.2), (0.0, 2.0), (0.4, 0.1))
    np.testing.assert_allclose(cone_field(both, grid).values,
                               np.maximum(cone_field(a, grid).values, cone_field(b, grid).values))


def test_cone_lobe_speeds(grid):
    e = 0.3
    f = cone_field(ConeSpec(grid.domain.center, 0.1, (SLOPE,), (0.0,), (e,)), grid)
    # along the heading (east) the slope is s(1 - e), against it s(1 + e)
    assert f.values[20, 36] - 0.1 == pytest.approx(SLOPE * (1 - e) * 16 * 250, rel=1e-9)
    assert f.values[20, 4] - 0.1 == pytest.approx(SLOPE * (1 + e) * 16 * 250, rel=1e-9)
    assert f.values[36, 20] - 0.1 == pytest.approx(SLOPE * 16 * 250, rel=1e-9)


def test_cone_rejects(grid):
    with pytest.raises(ValidationError):
        cone_field(ConeSpec(GeoPoint(10.0, 10.0), 0.0), grid)
    for kw in (dict(slopes=()), dict(slopes=(-1.0,)), dict(ecc=(1.0,)), dict(headings=(0.0, 1.0))):
        with pytest.raises(ValidationError):
            ConeSpec(grid.domain.center, 0.0, **kw)


def test_cone_capped(grid):
    f = cone_field(ConeSpec(grid.domain.center, 2.5, (SLOPE,)), grid)
    assert f.values.max() == 3.0


def test_cone_gradient_slope(g200):
    f = cone_field(ConeSpec(g200.domain.center, 0.1, (SLOPE,)), g200)
    rf = ros_field(f)
    X, Y = g200.mesh()
    ok = rf.valid & (np.hypot(X, Y) > 5 * 250) & (f.values < 4.9)
    ok[0, :] = ok[-1, :] = ok[:, 0] = ok[:, -1] = False
    mag = np.hypot(rf.t_x, rf.t_y)[ok]
    np.testing.assert_allclose(mag, SLOPE, rtol=0.01)


def test_fireline():
    assert fireline_1d(0.0) == pytest.approx(0.2)
    assert fireline_1d(math.pi) == pytest.approx(math.pi - 2.2)
    x = np.linspace(-7, 7, 101)
    np.testing.assert_allclose(fireline_1d(x), fireline_1d(-x))


def test_granules():
    s = granule_schedule(0.0, 5.0, 6.0)
    assert len(s) == 21 and s[0] == 0.0 and s[-1] == pytest.approx(5.0)
    assert np.all(np.diff(s) > 0)


def test_scatter_density_one_hits_every_burned_node(grid):
    f = cone_field(ConeSpec(grid.domain.center, 0.3, (SLOPE,)), grid)
    sched = np.linspace(0, 3, 301)
    dets = scatter_detections(f, 1.0, sched, 0)
    assert len(dets) == int((f.values < 3.0).sum())


def test_scatter_times_on_schedule_and_after_arrival(g200):
    f = cone_field(ConeSpec(g200.domain.center, 0.3, (SLOPE,)), g200)
    sched = granule_schedule(0, 5)
    dets = scatter_detections(f, 0.05, sched, 3)
    iy, ix = g200.nearest_node(*g200.domain.project(np.array([d.pos.lat for d in dets]),
                                                    np.array([d.pos.lon for d in dets])))
    t = np.array([d.time for d in dets])
    assert np.all(np.isin(t, sched))
    assert np.all(t >= f.values[iy, ix] - 1e-12)
    # the granule right before the detection precedes the arrival
    k = np.searchsorted(sched, t)
    prev = np.where(k > 0, sched[np.maximum(k - 1, 0)], -np.inf)
    assert np.all(prev < f.values[iy, ix])


def test_scatter_binomial_count(g200):
    f = cone_field(ConeSpec(g200.domain.center, 0.3, (SLOPE,)), g200)
    sched = granule_schedule(0, 5)
    n = int(((f.values < 5.0) & (f.values <= sched[-1])).sum())
    p = 0.05
    cnt = len(scatter_detections(f, p, sched, 11))
    assert abs(cnt - n * p) < 3 * math.sqrt(n * p * (1 - p))


def test_scatter_deterministic(grid):
    f = cone_field(ConeSpec(grid.domain.center, 0.3, (SLOPE,)), grid)
    sched = granule_schedule(0, 3)
    assert scatter_detections(f, 0.2, sched, 5) == scatter_detections(f, 0.2, sched, 5)
    assert scatter_nonfire(f, 0.2, sched, 5) == scatter_nonfire(f, 0.2, sched, 5)
    with pytest.raises(ValidationError):
        scatter_detections(f, 0.0, sched, 5)


def test_nonfire_rules(grid):
    v = np.full(grid.shape, 3.0)
    v[:5] = 0.0  # burning before the first granule
    v[5:10] = 1.1
    f = FireArrivalField.clamped(grid, v)
    sched = granule_schedule(0, 3)
    non = scatter_nonfire(f, 1.0, sched, 0)
    assert all(d.kind is Kind.NONFIRE_LAND for d in non)
    iy, _ = grid.nearest_node(*grid.domain.project(np.array([d.pos.lat for d in non]),
                                                   np.array([d.pos.lon for d in non])))
    t = np.array([d.time for d in non])
    assert not np.any(iy < 5)
    assert np.all(t[(iy >= 5) & (iy < 10)] < 1.1)
    fire = scatter_detections(f, 1.0, sched, 0)
    fire_keys = {(d.pos, d.time) for d in fire}
    assert not fire_keys & {(d.pos, d.time) for d in non}


def test_nonfire_no_fire_all_nonfire(grid):
    f = FireArrivalField.clamped(grid, np.full(grid.shape, 3.0))
    sched = granule_schedule(0, 3)
    assert scatter_detections(f, 1.0, sched, 0) == []
    non = scatter_nonfire(f, 1.0, sched, 0)
    assert len(non) == grid.size * (len(sched) - 1)  # the last granule equals t_end


def test_perimeter_circle(g200):
    t0 = 0.2
    f = cone_field(ConeSpec(g200.domain.center, t0, (SLOPE,)), g200)
    t = 2.0
    pts = synth_perimeter(f, t, 100)
    assert len(pts) == 100
    x, y = g200.domain.project(np.array([p.pos.lat for p in pts]), np.array([p.pos.lon for p in pts]))
    r = (t - t0) / SLOPE
    np.testing.assert_allclose(np.hypot(x, y), r, atol=250.0)
    assert polygon_area(x, y) == pytest.approx(math.pi * r * r, rel=0.05)
    assert all(p.time == t for p in pts)


def test_perimeter_empty_level(grid):
    f = cone_field(ConeSpec(grid.domain.center, 0.3, (SLOPE,)), grid)
    with pytest.raises(ValidationError):
        synth_perimeter(f, 0.1, 10)


def test_area_series_matches_disc(g200):
    t0 = 0.2
    f = cone_field(ConeSpec(g200.domain.center, t0, (SLOPE,)), g200)
    times = np.array([1.0, 2.0, 3.0])
    a = fire_area_series(f, times)
    want = math.pi * ((times - t0) / SLOPE) ** 2 / 250.0**2
    np.testing.assert_allclose(a, want, rtol=0.05)
