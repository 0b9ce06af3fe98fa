"""Fire arrival time estimation and assimilation by iterative interpolation."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import likelihood as lk
from .geo import (SECONDS_PER_DAY, Detection, FireArrivalField, FireDomain, Grid, ValidationError,
                  build_grid, filter_confidence, resample_field, snap_detections)
from .graph import GraphConfig, PathSet, Vertices, build_graph, graph_paths
from .spline import DensifyConfig, PathPoints, densify_path

log = logging.getLogger(__name__)


class AlphaMode(enum.Enum):
    FULL_TRUST = "full_trust"
    LIKELIHOOD = "likelihood"


@dataclass(frozen=True)
class EstimatorConfig:
    alpha_mode: AlphaMode = AlphaMode.FULL_TRUST
    kernel_sigma_cells: float = 1.0
    rd_threshold: float = 1e-3
    max_iter: int = 20
    start_spacing_m: float = 2000.0
    shrink: float = 0.8
    min_spacing_m: float = 250.0
    use_nonfire: bool = True
    fallback_ros: float = 0.05  # m/s, used when the paths carry no edges

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValidationError("multigrid shrink factor must lie in (0, 1)")
        if not 0 < self.min_spacing_m <= self.start_spacing_m:
            raise ValidationError("need 0 < min_spacing_m <= start_spacing_m")
        if not self.kernel_sigma_cells > 0:
            raise ValidationError("kernel_sigma_cells must be positive")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be at least 1")


# ---------------------------------------------------------------- geometry

def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> np.ndarray:
    """Monotone-chain hull, counter-clockwise, without repeated first vertex."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).reshape(-1, 2))))
    if len(pts) < 3:
        raise ValidationError("convex hull needs at least 3 distinct points")
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise ValidationError("convex hull is degenerate (collinear points)")
    return np.array(hull)


def point_in_polygon(points, polygon, tol: float = 1e-9):
    """Even-odd test; points on an edge count as inside. Accepts one point or an (n, 2) array."""
    P = np.asarray(points, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    poly = np.asarray(polygon, dtype=float)
    px, py = P[:, 0:1], P[:, 1:2]
    x1, y1 = poly[:, 0][None, :], poly[:, 1][None, :]
    x2, y2 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    scale = max(1.0, float(np.abs(poly).max()))
    cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    on_line = np.abs(cross) <= tol * scale * np.hypot(x2 - x1, y2 - y1)
    within = ((px >= np.minimum(x1, x2) - tol * scale) & (px <= np.maximum(x1, x2) + tol * scale)
              & (py >= np.minimum(y1, y2) - tol * scale) & (py <= np.maximum(y1, y2) + tol * scale))
    on_edge = np.any(on_line & within, axis=1)
    straddle = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    crossings = np.sum(straddle & (px < xint), axis=1)
    inside = on_edge | (crossings % 2 == 1)
    return bool(inside[0]) if single else inside


# ---------------------------------------------------------------- data bundle

@dataclass(frozen=True, eq=False)
class DataBundle:
    """Grid-independent data for one estimation run (planar meters, days)."""

    domain: FireDomain
    fx: np.ndarray  # fire data points: graph vertices plus inserted path points
    fy: np.ndarray
    ft: np.ndarray
    fn: np.ndarray  # number of shortest paths through each point
    nx_: np.ndarray  # non-fire pixels
    ny_: np.ndarray
    nt: np.ndarray
    hull: Optional[np.ndarray]
    v_ref: float  # median edge rate of spread along the paths, m/s
    paths: Optional[PathSet] = None

    @property
    def n_fire(self) -> int:
        return len(self.ft)


def _edge_points(domain, ps: PathSet, dcfg: DensifyConfig):
    """Inserted points for every tree edge, taken from the densified path of one leaf below it."""
    v = ps.vertices
    counts = ps.path_counts()
    done = set()
    xs, ys, ts, ns = [], [], [], []
    for leaf in ps.leaves():
        seq = ps.path(leaf)
        if len(seq) < 2:
            continue
        pp = PathPoints(v.x[seq], v.y[seq], v.t[seq], np.ones(len(seq), dtype=bool))
        dense = densify_path(domain, pp, dcfg)
        if len(dense) == len(pp):
            continue
        # map inserted points back to the original edge they sit on
        orig_pos = np.flatnonzero(dense.original)
        for a, b in zip(orig_pos[:-1], orig_pos[1:]):
            if b - a <= 1:
                continue
            child = seq[np.searchsorted(orig_pos, b)]
            if child in done:
                continue
            done.add(child)
            xs.append(dense.x[a + 1:b])
            ys.append(dense.y[a + 1:b])
            ts.append(dense.t[a + 1:b])
            ns.append(np.full(b - a - 1, counts[child]))
    if not xs:
        z = np.zeros(0)
        return z, z, z, np.zeros(0, dtype=int)
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ts), np.concatenate(ns)


def prepare_data(detections: list[Detection], grid: Grid, graph_cfg: GraphConfig = GraphConfig(),
                 densify: Optional[DensifyConfig] = DensifyConfig(), use_paths: bool = True) -> DataBundle:
    """Snap detections to the evaluation grid, build the graph and collect the data points.

    With ``use_paths=False`` every fire detection is used once (n = 1) and no
    points are inserted.
    """
    dom = grid.domain
    dets = filter_confidence(detections, graph_cfg.confidence_threshold)
    snapped = snap_detections(grid, dets)
    if snapped.dropped:
        log.warning("%d detections outside the domain were dropped", snapped.dropped)
    fire = snapped.subset(snapped.fire_mask)
    if len(fire) == 0:
        raise ValidationError("no fire detections inside the domain")
    non = snapped.subset(snapped.nonfire_mask)
    vx, vy = grid.node_xy(fire.iy, fire.ix)
    vx, vy = np.asarray(vx, float), np.asarray(vy, float)
    nnx, nny = grid.node_xy(non.iy, non.ix)
    hull = None
    try:
        hull = convex_hull(np.column_stack([vx, vy]))
    except ValidationError:
        log.warning("fire detections do not span a polygon; non-fire pixels will be ignored")

    verts = Vertices.from_snapped(fire)
    g = build_graph(verts, graph_cfg, dom)
    ps = graph_paths(g)
    el = ps.edge_length
    dt = np.array([g.vertices.t[v] - g.vertices.t[ps.pred[v]] if v != ps.source else np.nan
                   for v in range(len(ps.dist))])
    rates = el / (dt * SECONDS_PER_DAY)
    rates = rates[np.isfinite(rates) & (rates > 0)]
    v_ref = float(np.median(rates)) if rates.size else float("nan")

    if use_paths:
        gv = g.vertices
        counts = ps.path_counts()
        fx, fy, ft, fn = gv.x, gv.y, gv.t, counts
        if densify is not None:
            ex, ey, et, en = _edge_points(dom, ps, densify)
            fx, fy, ft, fn = (np.concatenate([fx, ex]), np.concatenate([fy, ey]),
                              np.concatenate([ft, et]), np.concatenate([fn, en]))
    else:
        fx, fy, ft, fn = vx, vy, fire.times, np.ones(len(fire), dtype=int)
    return DataBundle(dom, np.asarray(fx, float), np.asarray(fy, float), np.asarray(ft, float),
                      np.asarray(fn, int), np.asarray(nnx, float), np.asarray(nny, float),
                      non.times, hull, v_ref, ps)


# ---------------------------------------------------------------- elementary steps

def initial_estimate(paths: PathSet, grid: Grid, v_ref: Optional[float] = None,
                     samples: Optional[tuple] = None, fallback_ros: float = 0.05) -> FireArrivalField:
    """Nearest path sample time plus a travel-time ramp at the median path speed."""
    if paths is None or len(paths.reachable) == 0:
        raise ValidationError("initial estimate needs a non-empty path set")
    v = paths.vertices
    if samples is None:
        r = paths.reachable
        sx, sy, st = v.x[r], v.y[r], v.t[r]
    else:
        sx, sy, st = samples
    if v_ref is None or not math.isfinite(v_ref) or v_ref <= 0:
        v_ref = fallback_ros
    X, Y = grid.mesh()
    tree = cKDTree(np.column_stack([sx, sy]))
    d, k = tree.query(np.column_stack([X.ravel(), Y.ravel()]))
    vals = np.asarray(st)[k] + d / (v_ref * SECONDS_PER_DAY)
    return FireArrivalField.clamped(grid, vals.reshape(grid.shape))


def _merge_updates(size, flat, t, a):
    """Per-node composite: factor prod(a) and target time weighted by (1 - a)."""
    a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
    zeros = np.bincount(flat, weights=(a == 0).astype(float), minlength=size)
    with np.errstate(divide="ignore"):
        la = np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), 0.0)
    factor = np.where(zeros > 0, 0.0, np.exp(np.bincount(flat, weights=la, minlength=size)))
    wsum = np.bincount(flat, weights=1 - a, minlength=size)
    tsum = np.bincount(flat, weights=(1 - a) * t, minlength=size)
    nodes = np.flatnonzero(wsum > 0)
    return nodes, factor[nodes], tsum[nodes] / wsum[nodes]


def update_at_detections(fld: FireArrivalField, iy, ix, t_det, alpha, n=1) -> FireArrivalField:
    """Pull detection nodes toward detection times: ``a^n (old - t) + t``.

    Several data on one node are merged into a single pull whose factor is the
    product of their ``a^n`` and whose target is their ``(1 - a^n)``-weighted mean time.
    """
    iy = np.atleast_1d(np.asarray(iy, dtype=int))
    ix = np.atleast_1d(np.asarray(ix, dtype=int))
    t_det = np.broadcast_to(np.asarray(t_det, dtype=float), iy.shape)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), iy.shape)
    n = np.broadcast_to(np.asarray(n, dtype=float), iy.shape)
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValidationError("alpha must lie in [0, 1]")
    a = np.where(n == 0, 1.0, alpha ** n)
    nodes, fac, tgt = _merge_updates(fld.grid.size, iy * fld.grid.nx + ix, t_det, a)
    vals = fld.values.copy().ravel()
    vals[nodes] = fac * (vals[nodes] - tgt) + tgt
    return FireArrivalField.clamped(fld.grid, vals.reshape(fld.grid.shape))


def gaussian_smooth(fld: FireArrivalField, kernel_sigma_cells: float = 1.0) -> FireArrivalField:
    return FireArrivalField.clamped(fld.grid, lk.blur(fld.values, kernel_sigma_cells))


def apply_nonfire(fld: FireArrivalField, iy, ix, hull, alpha=0.0,
                  kernel_sigma_cells: float = 1.0) -> FireArrivalField:
    """Raise non-fire pixels outside the fire hull toward ``t_end``.

    The upward correction is smoothed (not the field itself), so the burned
    area can only shrink.
    """
    if hull is None or len(np.atleast_1d(iy)) == 0:
        if hull is None:
            log.warning("no usable fire hull; non-fire pixels skipped")
        return fld
    grid = fld.grid
    t_end = grid.domain.t_end
    iy = np.asarray(iy, dtype=int)
    ix = np.asarray(ix, dtype=int)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), iy.shape)
    x, y = grid.node_xy(iy, ix)
    outside = ~point_in_polygon(np.column_stack([x, y]), hull)
    if not outside.any():
        return fld
    nodes, fac, tgt = _merge_updates(grid.size, (iy * grid.nx + ix)[outside],
                                     np.full(outside.sum(), t_end), alpha[outside])
    inc = np.zeros(grid.size)
    old = fld.values.ravel()
    inc[nodes] = (fac * (old[nodes] - tgt) + tgt) - old[nodes]
    inc = lk.blur(inc.reshape(grid.shape), kernel_sigma_cells)
    return FireArrivalField.clamped(grid, fld.values + np.maximum(inc, 0.0))


def relative_difference(prev: np.ndarray, new: np.ndarray) -> float:
    den = float(np.linalg.norm(prev))
    if den == 0:
        return 0.0 if not np.any(new) else float("inf")
    return float(np.linalg.norm(prev - new) / den)


# ---------------------------------------------------------------- iteration drivers

AlphaFn = Callable[[FireArrivalField, np.ndarray, np.ndarray, np.ndarray, bool], np.ndarray]


@dataclass(frozen=True, eq=False)
class _LevelData:
    fiy: np.ndarray
    fix: np.ndarray
    ft: np.ndarray
    fn: np.ndarray
    falpha: np.ndarray
    niy: np.ndarray
    nix: np.ndarray
    nalpha: np.ndarray


def _snap_xy(grid: Grid, x, y):
    return grid.nearest_node(x, y)


def _level_data(grid: Grid, data: DataBundle, fire_alpha, nonfire_alpha) -> _LevelData:
    fiy, fix = _snap_xy(grid, data.fx, data.fy)
    niy, nix = _snap_xy(grid, data.nx_, data.ny_)
    fa = np.broadcast_to(np.asarray(fire_alpha, float), fiy.shape)
    na = np.broadcast_to(np.asarray(nonfire_alpha, float), niy.shape)
    return _LevelData(fiy, fix, data.ft, data.fn, fa, niy, nix, na)


def _one_pass(fld, ld: _LevelData, hull, cfg: EstimatorConfig):
    f = update_at_detections(fld, ld.fiy, ld.fix, ld.ft, ld.falpha, ld.fn)
    f = gaussian_smooth(f, cfg.kernel_sigma_cells)
    if cfg.use_nonfire:
        f = apply_nonfire(f, ld.niy, ld.nix, hull, ld.nalpha, cfg.kernel_sigma_cells)
    return f


def iterate(field0: FireArrivalField, data: DataBundle, cfg: EstimatorConfig = EstimatorConfig(),
            fire_alpha=0.0, nonfire_alpha=0.0, max_iter: Optional[int] = None):
    """Repeat update/smooth(/non-fire) until the relative change drops below threshold.

    Returns ``(field, rd_history)``.
    """
    ld = _level_data(field0.grid, data, fire_alpha, nonfire_alpha)
    f = field0
    hist = []
    for _ in range(cfg.max_iter if max_iter is None else max_iter):
        new = _one_pass(f, ld, data.hull, cfg)
        rd = relative_difference(f.values, new.values)
        hist.append(rd)
        f = new
        if rd < cfg.rd_threshold:
            break
    return FireArrivalField.clamped(f.grid, f.values), hist


def multigrid_schedule(cfg: EstimatorConfig) -> list[float]:
    out = [cfg.start_spacing_m]
    while out[-1] > cfg.min_spacing_m:
        out.append(max(cfg.shrink * out[-1], cfg.min_spacing_m))
    return out


def _initial_from_data(data: DataBundle, grid: Grid, cfg: EstimatorConfig) -> FireArrivalField:
    return initial_estimate(data.paths, grid, data.v_ref, (data.fx, data.fy, data.ft), cfg.fallback_ros)


def _mode_alphas(fld: FireArrivalField, data: DataBundle, cfg: EstimatorConfig, params: lk.LikelihoodParams):
    # full trust pins data nodes; likelihood mode weighs the current field by how well it explains each datum
    if cfg.alpha_mode is AlphaMode.FULL_TRUST:
        return 0.0, 0.0
    fiy, fix = _snap_xy(fld.grid, data.fx, data.fy)
    niy, nix = _snap_xy(fld.grid, data.nx_, data.ny_)
    return (likelihood_alphas(fld, fiy, fix, data.ft, params, True),
            likelihood_alphas(fld, niy, nix, data.nt, params, False))


def multigrid_estimate(data: DataBundle, grid: Grid, cfg: EstimatorConfig = EstimatorConfig(),
                       field0: Optional[FireArrivalField] = None,
                       params: lk.LikelihoodParams = lk.LikelihoodParams()):
    """Coarse-to-fine estimation. Returns ``(field, history)`` with (spacing, rd) rows."""
    fine = field0 if field0 is not None else _initial_from_data(data, grid, cfg)
    hist = []
    for spacing in multigrid_schedule(cfg):
        g = grid if math.isclose(spacing, grid.spacing) else build_grid(grid.domain, spacing)
        coarse = resample_field(fine, g)
        ld = _level_data(g, data, *_mode_alphas(coarse, data, cfg, params))
        coarse = _one_pass(coarse, ld, data.hull, cfg)
        new_fine = resample_field(coarse, grid)
        rd = relative_difference(fine.values, new_fine.values)
        hist.append((spacing, rd))
        fine = new_fine
        if rd < cfg.rd_threshold:
            break
    return fine, hist


def single_grid_estimate(data: DataBundle, grid: Grid, cfg: EstimatorConfig = EstimatorConfig(),
                         params: lk.LikelihoodParams = lk.LikelihoodParams()):
    f0 = _initial_from_data(data, grid, cfg)
    f, hist = iterate(f0, data, cfg, *_mode_alphas(f0, data, cfg, params))
    return f, [(grid.spacing, r) for r in hist]


def likelihood_alphas(forecast: FireArrivalField, iy, ix, t, params: lk.LikelihoodParams,
                      fire: bool) -> np.ndarray:
    """Weight of the forecast at each datum: probability of what was observed."""
    if len(np.atleast_1d(t)) == 0:
        return np.zeros(0)
    p = lk.detection_probabilities(forecast, iy, ix, t, params)
    return p if fire else 1.0 - p


def assimilate(forecast: FireArrivalField, data: DataBundle, params: lk.LikelihoodParams = lk.LikelihoodParams(),
               cfg: EstimatorConfig = EstimatorConfig(), alpha_fn: Optional[AlphaFn] = None):
    """Blend detections into ``forecast``; returns ``(analysis, rd_history)``."""
    grid = forecast.grid
    fn = alpha_fn or (lambda f, iy, ix, t, fire: likelihood_alphas(f, iy, ix, t, params, fire))
    fiy, fix = _snap_xy(grid, data.fx, data.fy)
    niy, nix = _snap_xy(grid, data.nx_, data.ny_)
    fa = np.asarray(fn(forecast, fiy, fix, data.ft, True), dtype=float)
    na = np.asarray(fn(forecast, niy, nix, data.nt, False), dtype=float)
    cfg = replace(cfg, alpha_mode=AlphaMode.LIKELIHOOD)
    return iterate(forecast, data, cfg, fa, na)
