"""Synthetic ground truth and simulated satellite observations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from skimage import measure

from .geo import (Detection, FireArrivalField, GeoPoint, Grid, Kind, ValidationError)


@dataclass(frozen=True)
class ConeSpec:
    """Ignition point, start time and one or more elliptic lobes.

    Lobe ``k`` has slope ``slopes[k]`` (days per meter), heading ``headings[k]``
    (radians, counter-clockwise from east) and eccentricity ``ecc[k]``; along the
    heading it spreads at ``1/(slope*(1-ecc))``, against it at ``1/(slope*(1+ecc))``.
    The field is the maximum over lobes.
    """

    ignition: GeoPoint
    t0: float
    slopes: tuple = (1e-4,)
    headings: tuple = (0.0,)
    ecc: tuple = (0.0,)

    def __post_init__(self):
        n = len(self.slopes)
        if n < 1:
            raise ValidationError("at least one lobe is required")
        if not (len(self.headings) == len(self.ecc) == n):
            raise ValidationError("lobe parameter lists must have equal length")
        if any(s <= 0 for s in self.slopes):
            raise ValidationError("lobe slopes must be positive")
        if any(not 0 <= e < 1 for e in self.ecc):
            raise ValidationError("lobe eccentricity must lie in [0, 1)")

    @property
    def lobes(self) -> int:
        return len(self.slopes)

    def moved(self, ignition: GeoPoint, t0: float) -> "ConeSpec":
        return ConeSpec(ignition, t0, self.slopes, self.headings, self.ecc)

    def to_dict(self) -> dict:
        return {"lat": self.ignition.lat, "lon": self.ignition.lon, "t0": self.t0,
                "slopes": list(self.slopes), "headings": list(self.headings), "ecc": list(self.ecc)}


def cone_values(spec: ConeSpec, grid: Grid) -> np.ndarray:
    """Uncapped cone values on the grid nodes."""
    X, Y = grid.mesh()
    cx, cy = grid.domain.project(spec.ignition.lat, spec.ignition.lon)
    dx, dy = X - cx, Y - cy
    r = np.hypot(dx, dy)
    out = None
    for s, hd, e in zip(spec.slopes, spec.headings, spec.ecc):
        along = dx * math.cos(hd) + dy * math.sin(hd)
        t = spec.t0 + s * (r - e * along)
        out = t if out is None else np.maximum(out, t)
    return out


def cone_field(spec: ConeSpec, grid: Grid) -> FireArrivalField:
    if not grid.domain.contains(spec.ignition.lat, spec.ignition.lon):
        raise ValidationError("ignition lies outside the domain")
    return FireArrivalField.clamped(grid, cone_values(spec, grid))


def fireline_1d(x):
    x = np.asarray(x, dtype=float)
    v = np.abs(x) + 1.2 * np.cos(x) - 1.0
    return v if v.ndim else float(v)


def granule_schedule(t_start: float, t_end: float, every_h: float = 6.0) -> np.ndarray:
    step = every_h / 24.0
    n = int(math.floor((t_end - t_start) / step + 1e-9))
    return t_start + step * np.arange(n + 1)


def scatter_detections(truth: FireArrivalField, density: float, schedule, seed: int,
                       confidence: int = 100) -> list[Detection]:
    """Fire detections at randomly chosen burned nodes, reported at the next granule."""
    if not 0 < density <= 1:
        raise ValidationError("density must lie in (0, 1]")
    sched = np.sort(np.asarray(schedule, dtype=float))
    rng = np.random.default_rng(seed)
    vals = truth.values.ravel()
    pick = rng.random(vals.size) < density
    burned = vals < truth.t_end
    k = np.searchsorted(sched, vals, side="left")
    ok = pick & burned & (k < sched.size)
    idx = np.flatnonzero(ok)
    lat, lon = truth.grid.latlon()
    lat, lon = lat.ravel(), lon.ravel()
    return [Detection(GeoPoint(float(lat[i]), float(lon[i])), float(sched[k[i]]), Kind.FIRE, confidence)
            for i in idx]


def scatter_nonfire(truth: FireArrivalField, density: float, schedule, seed: int) -> list[Detection]:
    """Non-fire pixels at (node, granule) pairs where the fire has not arrived yet."""
    if not 0 < density <= 1:
        raise ValidationError("density must lie in (0, 1]")
    sched = np.sort(np.asarray(schedule, dtype=float))
    rng = np.random.default_rng(seed)
    vals = truth.values.ravel()
    draw = rng.random((sched.size, vals.size)) < density
    cond = vals[None, :] > sched[:, None]
    gi, ni = np.nonzero(draw & cond)
    lat, lon = truth.grid.latlon()
    lat, lon = lat.ravel(), lon.ravel()
    return [Detection(GeoPoint(float(lat[i]), float(lon[i])), float(sched[g]), Kind.NONFIRE_LAND, 100)
            for g, i in zip(gi, ni)]


def synth_perimeter(truth: FireArrivalField, t: float, n_points: int) -> list[Detection]:
    """Points along the ``T = t`` contour, evenly spaced by arclength."""
    if n_points < 1:
        raise ValidationError("n_points must be positive")
    vals = truth.values
    if not (vals.min() < t < vals.max()):
        raise ValidationError(f"level set T = {t} is empty")
    contours = measure.find_contours(vals, t)
    if not contours:
        raise ValidationError(f"level set T = {t} is empty")
    c = max(contours, key=len)
    g = truth.grid
    x0, y0 = g.origin
    xy = np.column_stack([x0 + g.spacing * c[:, 1], y0 + g.spacing * c[:, 0]])
    seg = np.hypot(*np.diff(xy, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    closed = np.allclose(xy[0], xy[-1])
    q = np.linspace(0, s[-1], n_points, endpoint=not closed)
    px = np.interp(q, s, xy[:, 0])
    py = np.interp(q, s, xy[:, 1])
    lat, lon = g.domain.unproject(px, py)
    return [Detection(GeoPoint(float(a), float(b)), float(t), Kind.FIRE, 100) for a, b in zip(lat, lon)]


def polygon_area(x, y) -> float:
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass(frozen=True)
class Scenario:
    truth: FireArrivalField
    spec: ConeSpec
    schedule: np.ndarray = field(repr=False)
    detections: list = field(repr=False)
    nonfire: list = field(repr=False)
    seed: int = 0
