"""Grid search for the ignition point and time under a cone forward model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geo import FireArrivalField, FireDomain, GeoPoint, Grid, SnappedDetections, ValidationError
from .likelihood import LikelihoodParams, dataset_log_likelihood, smoothness_penalty
from .synth import ConeSpec, cone_field


@dataclass(frozen=True)
class IgnitionCandidate:
    pos: GeoPoint
    t0: float
    index: int = 0


def candidate_grid(domain: FireDomain, nx: int, ny: int, times: Sequence[float]) -> list[IgnitionCandidate]:
    """Cell centres of an ``nx`` by ``ny`` partition of the domain, crossed with ``times``.

    Ordered by time, then row (south first), then column.
    """
    if nx < 1 or ny < 1:
        raise ValidationError("nx and ny must be positive")
    times = [float(t) for t in times]
    if not times:
        raise ValidationError("at least one candidate time is required")
    w, h = domain.extent_m
    x0, y0 = domain.project(domain.lat_min, domain.lon_min)
    xs = x0 + (np.arange(nx) + 0.5) * w / nx
    ys = y0 + (np.arange(ny) + 0.5) * h / ny
    out = []
    for t in times:
        for y in ys:
            lat, lon = domain.unproject(xs, np.full(nx, y))
            for a, b in zip(lat, lon):
                out.append(IgnitionCandidate(GeoPoint(float(a), float(b)), t, len(out)))
    return out


def surrogate_forecast(cand: IgnitionCandidate, grid: Grid, template: ConeSpec) -> FireArrivalField:
    return cone_field(template.moved(cand.pos, cand.t0), grid)


@dataclass(frozen=True, eq=False)
class SearchResult:
    best: IgnitionCandidate
    scores: np.ndarray  # one objective value per candidate, in candidate order
    candidates: list

    def rows(self):
        """``lat, lon, t0_days, loglik`` per candidate."""
        return [(c.pos.lat, c.pos.lon, c.t0, float(s)) for c, s in zip(self.candidates, self.scores)]


def _pick(candidates, scores) -> int:
    best = None
    for i, (c, s) in enumerate(zip(candidates, scores)):
        if best is None or s > scores[best] or (s == scores[best] and c.t0 < candidates[best].t0):
            best = i
    return best


def grid_search(candidates: Sequence[IgnitionCandidate], snapped: SnappedDetections, template: ConeSpec,
                params: LikelihoodParams = LikelihoodParams(),
                reference: Optional[FireArrivalField] = None, weight: float = 0.0) -> SearchResult:
    """Score every candidate by log-likelihood minus the optional smoothness penalty."""
    candidates = list(candidates)
    if not candidates:
        raise ValidationError("no candidates")
    if len(snapped) == 0:
        raise ValidationError("no detections")
    grid = snapped.grid
    scores = np.empty(len(candidates))
    for i, c in enumerate(candidates):
        fld = surrogate_forecast(c, grid, template)
        s = dataset_log_likelihood(fld, snapped, params)
        if reference is not None and weight:
            s -= smoothness_penalty(fld, reference, weight)
        scores[i] = s
    return SearchResult(candidates[_pick(candidates, scores)], scores, candidates)


def refine_candidates(domain: FireDomain, winner: IgnitionCandidate, half_width_m: float, dt: float,
                      n_xy: int = 5, n_t: int = 5) -> list[IgnitionCandidate]:
    """A finer candidate set centred on ``winner``; the winner itself always comes first."""
    cx, cy = domain.project(winner.pos.lat, winner.pos.lon)
    offs = np.linspace(-half_width_m, half_width_m, n_xy)
    toffs = np.linspace(-dt, dt, n_t)
    out = [IgnitionCandidate(winner.pos, winner.t0, 0)]
    for t in winner.t0 + toffs:
        for oy in offs:
            for ox in offs:
                if ox == 0 and oy == 0 and t == winner.t0:
                    continue
                lat, lon = domain.unproject(cx + ox, cy + oy)
                lat, lon = float(lat), float(lon)
                if domain.contains(lat, lon):
                    out.append(IgnitionCandidate(GeoPoint(lat, lon), float(t), len(out)))
    return out
