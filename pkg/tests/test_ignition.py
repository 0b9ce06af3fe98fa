import numpy as np
import pytest

from firefront.geo import FireDomain, GeoPoint, ValidationError, build_grid, snap_detections
from firefront.ignition import IgnitionCandidate, candidate_grid, grid_search, refine_candidates, surrogate_forecast
from firefront.likelihood import LikelihoodParams
from firefront.synth import ConeSpec, cone_values, granule_schedule, scatter_detections, scatter_nonfire, synth_perimeter

TIMES = [0.1, 0.3, 0.5, 0.7, 0.9]


@pytest.fixture(scope="module")
def setup():
    dom = FireDomain.around(40.0, -120.0, 20000.0, 20000.0, 0.0, 3.0)
    grid = build_grid(dom, 250.0)
    cands = candidate_grid(dom, 10, 10, TIMES)
    tmpl = ConeSpec(dom.center, 0.0, (1 / (0.03 * 86400),))
    true = cands[2 * 100 + 4 * 10 + 6]
    truth = surrogate_forecast(true, grid, tmpl)
    return dom, grid, cands, tmpl, true, truth


def test_candidate_grid_counts(setup):
    dom, *_ = setup
    c = candidate_grid(dom, 10, 10, TIMES)
    assert len(c) == 500
    assert [x.index for x in c] == list(range(500))
    assert all(dom.contains(x.pos.lat, x.pos.lon) for x in c)
    # time-major, then south-to-north rows, then west-to-east
    assert c[0].t0 == c[99].t0 == 0.1 and c[100].t0 == 0.3
    assert c[0].pos.lat == c[9].pos.lat and c[0].pos.lon < c[9].pos.lon
    assert c[10].pos.lat > c[0].pos.lat


def test_candidate_single_is_centre(setup):
    dom, *_ = setup
    (c,) = candidate_grid(dom, 1, 1, [0.2])
    x, y = dom.project(c.pos.lat, c.pos.lon)
    assert abs(x) < 1e-6 and abs(y) < 1e-6


def test_candidate_grid_rejects(setup):
    dom, *_ = setup
    with pytest.raises(ValidationError):
        candidate_grid(dom, 0, 3, TIMES)
    with pytest.raises(ValidationError):
        candidate_grid(dom, 3, 3, [])


def test_surrogate_matches_truth_and_shifts(setup):
    dom, grid, cands, tmpl, true, truth = setup
    same = ConeSpec(true.pos, true.t0, tmpl.slopes, tmpl.headings, tmpl.ecc)
    np.testing.assert_array_equal(surrogate_forecast(true, grid, tmpl).values,
                                  np.minimum(cone_values(same, grid), dom.t_end))
    later = IgnitionCandidate(true.pos, true.t0 + 0.25)
    np.testing.assert_allclose(cone_values(tmpl.moved(later.pos, later.t0), grid),
                               cone_values(tmpl.moved(true.pos, true.t0), grid) + 0.25, atol=1e-12)
    other = cands[2 * 100 + 7 * 10 + 2]
    f = surrogate_forecast(other, grid, tmpl)
    iy, ix = np.unravel_index(np.argmin(f.values), grid.shape)
    want = grid.nearest_node(*dom.project(other.pos.lat, other.pos.lon))
    assert (iy, ix) == (int(want[0]), int(want[1]))


def test_dense_detections_recover_exact_candidate(setup):
    dom, grid, cands, tmpl, true, truth = setup
    sched = granule_schedule(0, 3)
    dets = scatter_detections(truth, 1.0, sched, 1)
    res = grid_search(cands, snap_detections(grid, dets), tmpl)
    assert res.best.index == true.index
    # brute-force argmax over the table is the oracle
    assert res.scores[res.best.index] == res.scores.max()
    dets2 = dets + scatter_nonfire(truth, 0.3, sched, 2)
    assert grid_search(cands, snap_detections(grid, dets2), tmpl).best.index == true.index


@pytest.mark.parametrize("t", [1.0, 1.5, 2.0])
def test_perimeter_only_biases_early(setup, t):
    dom, grid, cands, tmpl, true, truth = setup
    per = synth_perimeter(truth, t, 30)
    res = grid_search(cands, snap_detections(grid, per), tmpl)
    assert res.best.t0 <= true.t0


def test_nonfire_penalises_too_early(setup):
    dom, grid, cands, tmpl, true, truth = setup
    sched = granule_schedule(0, 3)
    fire = scatter_detections(truth, 0.05, sched, 4)
    non = scatter_nonfire(truth, 0.05, sched, 5)
    early = next(c for c in cands if c.pos == true.pos and c.t0 == 0.1)
    a = grid_search([true, early], snap_detections(grid, fire), tmpl).scores
    b = grid_search([true, early], snap_detections(grid, fire + non), tmpl).scores
    assert (b[0] - b[1]) > (a[0] - a[1])


def test_ties_and_constant_shift(setup):
    dom, grid, cands, tmpl, true, truth = setup
    from firefront.ignition import _pick
    cs = [IgnitionCandidate(true.pos, 0.5, 0), IgnitionCandidate(true.pos, 0.3, 1),
          IgnitionCandidate(true.pos, 0.3, 2)]
    assert _pick(cs, np.array([1.0, 1.0, 1.0])) == 1
    s = np.array([0.2, 3.0, -1.0])
    assert _pick(cs, s) == _pick(cs, s + 123.0)


def test_search_deterministic_and_rows(setup):
    dom, grid, cands, tmpl, true, truth = setup
    sn = snap_detections(grid, synth_perimeter(truth, 1.5, 20))
    a = grid_search(cands[:60], sn, tmpl)
    b = grid_search(cands[:60], sn, tmpl)
    np.testing.assert_array_equal(a.scores, b.scores)
    rows = a.rows()
    assert len(rows) == 60 and len(rows[0]) == 4


def test_smoothness_term(setup):
    dom, grid, cands, tmpl, true, truth = setup
    sn = snap_detections(grid, synth_perimeter(truth, 1.5, 20))
    plain = grid_search(cands[:30], sn, tmpl)
    pen = grid_search(cands[:30], sn, tmpl, reference=truth, weight=1e-9)
    assert np.all(pen.scores <= plain.scores)


def test_refinement_keeps_winner(setup):
    dom, grid, cands, tmpl, true, truth = setup
    sn = snap_detections(grid, synth_perimeter(truth, 1.5, 30))
    coarse = grid_search(cands, sn, tmpl)
    fine = refine_candidates(dom, coarse.best, 1000.0, 0.1)
    assert fine[0].pos == coarse.best.pos and fine[0].t0 == coarse.best.t0
    assert len(fine) == 125
    r = grid_search(fine, sn, tmpl)
    assert r.scores.max() >= coarse.scores[coarse.best.index]


def test_search_rejects_empty(setup):
    dom, grid, cands, tmpl, true, truth = setup
    sn = snap_detections(grid, synth_perimeter(truth, 1.5, 5))
    with pytest.raises(ValidationError):
        grid_search([], sn, tmpl)
    with pytest.raises(ValidationError):
        grid_search(cands[:2], snap_detections(grid, []), tmpl)
