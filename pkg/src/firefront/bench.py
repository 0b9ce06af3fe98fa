"""Synthetic-cone battery: generate scenarios, run estimation strategies, score them."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assess import BurnMask, fire_area_series, moe, mean_sorenson, relative_error, rge, sorenson
from .estimator import (DataBundle, EstimatorConfig, multigrid_estimate, prepare_data,
                        single_grid_estimate)
from .geo import FireDomain, GeoPoint, Grid, build_grid
from .graph import GraphConfig
from .spline import DensifyConfig
from .synth import ConeSpec, cone_field, granule_schedule, scatter_detections, scatter_nonfire


@dataclass(frozen=True)
class BatteryConfig:
    n_scenarios: int = 20
    seed: int = 7
    nodes: int = 200
    spacing_m: float = 250.0
    center_lat: float = 40.0
    center_lon: float = -120.0
    t_end: float = 5.0  # days
    granule_h: float = 6.0
    density: float = 0.05
    nonfire_density: float = 0.05
    ros_min: float = 0.02  # m/s, along the lobe heading
    ros_max: float = 0.035
    max_lobes: int = 3
    max_ecc: float = 0.5
    ignition_offset_m: float = 4000.0
    t0_min: float = 0.1
    t0_max: float = 0.4


@dataclass(frozen=True)
class Strategy:
    name: str
    multigrid: bool
    densify: bool
    nonfire: bool


STRATEGIES = (
    Strategy("multi-2000", True, True, True),
    Strategy("multi-np", True, False, True),
    Strategy("single-2000", False, True, True),
    Strategy("single-np", False, False, True),
    Strategy("multi-2000-nofire", True, True, False),
)


def make_grid(cfg: BatteryConfig) -> Grid:
    extent = (cfg.nodes - 1) * cfg.spacing_m
    dom = FireDomain.around(cfg.center_lat, cfg.center_lon, extent, extent, 0.0, cfg.t_end)
    return build_grid(dom, cfg.spacing_m)


@dataclass(frozen=True, eq=False)
class ScenarioData:
    index: int
    spec: ConeSpec
    truth: object
    schedule: np.ndarray
    detections: list = field(repr=False)
    nonfire: list = field(repr=False)


def make_scenario(cfg: BatteryConfig, grid: Grid, index: int, ss: np.random.SeedSequence) -> ScenarioData:
    rng = np.random.default_rng(ss)
    dom = grid.domain
    cx, cy = rng.uniform(-cfg.ignition_offset_m, cfg.ignition_offset_m, 2)
    lat, lon = dom.unproject(cx, cy)
    nl = int(rng.integers(1, cfg.max_lobes + 1))
    ros = rng.uniform(cfg.ros_min, cfg.ros_max, nl)
    ecc = rng.uniform(0.0, cfg.max_ecc, nl)
    # slope chosen so that spread along the heading is exactly ros
    slopes = tuple(float((1 - e) / (r * 86400.0)) for r, e in zip(ros, ecc))
    spec = ConeSpec(GeoPoint(float(lat), float(lon)), float(rng.uniform(cfg.t0_min, cfg.t0_max)),
                    slopes, tuple(float(h) for h in rng.uniform(0, 2 * math.pi, nl)),
                    tuple(float(e) for e in ecc))
    truth = cone_field(spec, grid)
    sched = granule_schedule(dom.t_start, dom.t_end, cfg.granule_h)
    det_seed, non_seed = (int(s) for s in rng.integers(0, 2**31 - 1, 2))
    dets = scatter_detections(truth, cfg.density, sched, det_seed)
    non = scatter_nonfire(truth, cfg.nonfire_density, sched, non_seed)
    return ScenarioData(index, spec, truth, sched, dets, non)


def scenarios(cfg: BatteryConfig, grid: Optional[Grid] = None):
    grid = grid or make_grid(cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_scenarios)
    for i, ss in enumerate(children):
        yield make_scenario(cfg, grid, i, ss)


METRICS = ("mre", "moe_x", "moe_y", "moe_norm", "sorenson", "rge", "sorenson_series")


def score(truth, est, schedule) -> dict:
    """Final-perimeter scores at the last granule before the end of the period."""
    t_f = float(schedule[schedule < truth.t_end][-1])
    a, b = BurnMask.from_field(truth, t_f), BurnMask.from_field(est, t_f)
    m = moe(a, b)
    times = [t for t in schedule[1:] if t < truth.t_end and (truth.values <= t).any()]
    ag = fire_area_series(truth, times)
    ae = fire_area_series(est, times)
    series = mean_sorenson([(BurnMask.from_field(truth, t), BurnMask.from_field(est, t)) for t in times])
    return {"mre": relative_error(truth, est), "moe_x": m.x, "moe_y": m.y, "moe_norm": m.norm,
            "sorenson": sorenson(a, b), "rge": rge(ae, ag), "sorenson_series": series}


def run_strategy(sc: ScenarioData, grid: Grid, st: Strategy, est_cfg: EstimatorConfig,
                 graph_cfg: GraphConfig, dens: DensifyConfig, cache: dict):
    key = (st.densify, st.multigrid or st.densify)
    if key not in cache:
        cache[key] = prepare_data(sc.detections + sc.nonfire, grid, graph_cfg,
                                  dens if st.densify else None, use_paths=key[1])
    data: DataBundle = cache[key]
    cfg = EstimatorConfig(**{**est_cfg.__dict__, "use_nonfire": st.nonfire})
    if st.multigrid:
        est, _ = multigrid_estimate(data, grid, cfg)
    else:
        est, _ = single_grid_estimate(data, grid, cfg)
    return est


@dataclass
class BatteryResult:
    per_scenario: dict  # strategy -> list of metric dicts
    seconds: float

    def mean(self, strategy: str, metric: str) -> float:
        return float(np.mean([r[metric] for r in self.per_scenario[strategy]]))

    def summary(self) -> dict:
        return {s: {m: self.mean(s, m) for m in METRICS} for s in self.per_scenario}

    def rank_sums(self, strategies=None) -> dict:
        """Sum of ranks on MRE (low is good), MOE norm and Sørenson (high is good)."""
        names = list(strategies or self.per_scenario)
        summ = self.summary()
        total = {n: 0.0 for n in names}
        for metric, sign in (("mre", 1.0), ("moe_norm", -1.0), ("sorenson", -1.0)):
            vals = np.array([sign * summ[n][metric] for n in names])
            order = np.argsort(vals, kind="stable")
            ranks = np.empty(len(names))
            ranks[order] = np.arange(1, len(names) + 1)
            for n, r in zip(names, ranks):
                total[n] += r
        return total


def run_battery(cfg: BatteryConfig = BatteryConfig(), strategies=STRATEGIES,
                est_cfg: EstimatorConfig = EstimatorConfig(), graph_cfg: GraphConfig = GraphConfig(),
                dens: DensifyConfig = DensifyConfig(), progress=None) -> BatteryResult:
    start = time.perf_counter()
    grid = make_grid(cfg)
    out = {s.name: [] for s in strategies}
    for sc in scenarios(cfg, grid):
        cache: dict = {}
        for st in strategies:
            est = run_strategy(sc, grid, st, est_cfg, graph_cfg, dens, cache)
            out[st.name].append(score(sc.truth, est, sc.schedule))
        if progress:
            progress(sc.index)
    return BatteryResult(out, time.perf_counter() - start)
