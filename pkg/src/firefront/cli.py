"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .assess import (AssessmentReport, BurnMask, classification_raster, fire_area_series, moe,
                     rasterize_polygon, relative_error, rge, ros_direction_stats, sorenson)
from .bench import STRATEGIES, make_scenario, run_battery
from .config import ConfigError, RunConfig, describe_defaults, dump_config, load_config
from .estimator import assimilate, multigrid_estimate, prepare_data, single_grid_estimate
from .fmc import fmc_adjustment, mean_ros_diff, overlap_mask
from .geo import ValidationError, snap_detections
from .ignition import candidate_grid, grid_search
from .io import read_detections, read_field, write_detections, write_raster, write_rows
from .ros import MOMENTS_HEADER, moments_rows, ros_field
from .synth import ConeSpec, granule_schedule

log = logging.getLogger("firefront")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT = 0, 1, 2


def _out_dir(p) -> Path:
    d = Path(p)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _rd_rows(hist):
    return [(i, float(s), float(r)) for i, (s, r) in enumerate(hist)]


def cmd_generate(cfg: RunConfig, args) -> int:
    out = _out_dir(args.out)
    grid = cfg.grid.grid()
    sc = make_scenario(cfg.synth, grid, 0, np.random.SeedSequence(args.seed))
    write_raster(out / "truth.asc", grid, sc.truth.values)
    write_detections(out / "detections.csv", sc.detections + sc.nonfire)
    manifest = {"seed": args.seed, "spec": sc.spec.to_dict(),
                "schedule": [float(t) for t in sc.schedule],
                "n_fire": len(sc.detections), "n_nonfire": len(sc.nonfire),
                "config": dump_config(cfg)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {out}/truth.asc, detections.csv, manifest.json")
    return EXIT_OK


def _data(cfg: RunConfig, path, grid):
    dets = read_detections(path)
    return prepare_data(dets, grid, cfg.graph, cfg.densify)


def cmd_estimate(cfg: RunConfig, args) -> int:
    out = _out_dir(args.out)
    grid = cfg.grid.grid()
    data = _data(cfg, args.detections, grid)
    run = single_grid_estimate if args.single else multigrid_estimate
    est, hist = run(data, grid, cfg.estimator, params=cfg.likelihood)
    write_raster(out / "estimate.asc", grid, est.values)
    write_rows(out / "rd.csv", ("iter", "spacing_m", "rd"), _rd_rows(hist))
    print(f"wrote {out}/estimate.asc ({len(hist)} passes)")
    return EXIT_OK


def cmd_assimilate(cfg: RunConfig, args) -> int:
    out = _out_dir(args.out)
    grid = cfg.grid.grid()
    forecast = read_field(args.forecast, grid)
    data = _data(cfg, args.detections, grid)
    ana, hist = assimilate(forecast, data, cfg.likelihood, cfg.estimator)
    write_raster(out / "analysis.asc", grid, ana.values)
    write_rows(out / "rd.csv", ("iter", "spacing_m", "rd"), [(i, grid.spacing, r) for i, r in enumerate(hist)])
    print(f"wrote {out}/analysis.asc ({len(hist)} passes)")
    return EXIT_OK


def cmd_ros(cfg: RunConfig, args) -> int:
    out = _out_dir(args.out)
    grid = cfg.grid.grid()
    rf = ros_field(read_field(args.field, grid), cfg.ros.cutoff)
    write_raster(out / "ros.asc", grid, np.nan_to_num(rf.ros), ~rf.valid)
    write_raster(out / "theta.asc", grid, rf.theta, ~rf.valid)
    cases = [(c, l, d, cfg.ros.sigma_m) for c, l in zip(cfg.ros.c_h, cfg.ros.l_h) for d in cfg.ros.d_m]
    write_rows(out / "moments.csv", MOMENTS_HEADER, moments_rows(cases, cfg.ros.mc_samples, args.seed))
    print(f"wrote {out}/ros.asc, theta.asc, moments.csv")
    return EXIT_OK


def _burn(fld, t_ref):
    return BurnMask.from_field(fld, strict=True) if math.isnan(t_ref) else BurnMask.from_field(fld, t_ref)


def cmd_assess(cfg: RunConfig, args) -> int:
    grid = cfg.grid.grid()
    est = read_field(args.field, grid)
    t_ref = cfg.assess.t_ref
    pred = _burn(est, t_ref)
    re_ = rge_ = math.nan
    dirs = (math.nan,) * 4
    if args.truth:
        truth = read_field(args.truth, grid)
        obs = _burn(truth, t_ref)
        re_ = relative_error(truth, est)
        times = granule_schedule(grid.domain.t_start, grid.domain.t_end, cfg.assess.granule_h)[1:]
        a_t = fire_area_series(truth, times)
        if a_t.any():
            rge_ = rge(fire_area_series(est, times), a_t)
        rt, rs = ros_field(truth, cfg.ros.cutoff), ros_field(est, cfg.ros.cutoff)
        joint = overlap_mask(truth, est) & rt.valid & rs.valid
        if joint.any():
            dirs = ros_direction_stats(rt.ros, rt.theta, rs.ros, rs.theta, joint)
    else:
        rows = np.loadtxt(args.perimeter, delimiter=",", skiprows=1, ndmin=2, usecols=(0, 1))
        x, y = grid.domain.project(rows[:, 0], rows[:, 1])
        obs = rasterize_polygon(grid, x, y)
    m = moe(obs, pred)
    rep = AssessmentReport(grid.spacing, m.x, m.y, m.norm, sorenson(obs, pred), rge_, re_, *dirs)
    if args.classes:
        write_raster(args.classes, grid, classification_raster(obs, pred))
    write_rows(args.out, AssessmentReport.HEADER, [rep.row()])
    print(",".join(AssessmentReport.HEADER))
    print(",".join(f"{v:.6g}" for v in rep.row()))
    return EXIT_OK


def cmd_fmc(cfg: RunConfig, args) -> int:
    grid = cfg.grid.grid()
    est = read_field(args.estimate, grid)
    fc = read_field(args.forecast, grid)
    mask = overlap_mask(est, fc)
    re_, rf_ = ros_field(est, cfg.fmc.cutoff), ros_field(fc, cfg.fmc.cutoff)
    me, mf, delta = mean_ros_diff(re_, rf_, mask, cfg.fmc.cutoff)
    ea, fa = BurnMask.from_field(est, strict=True).area, BurnMask.from_field(fc, strict=True).area
    d = fmc_adjustment(ea, fa, me, mf, cfg.fmc.curve(), cfg.fmc.current_fmc, cfg.fmc.max_step)
    print(f"est_area={ea} fcst_area={fa} mean_est_ros={me:.6g} mean_fcst_ros={mf:.6g} delta_ros={delta:.6g}")
    print(f"delta_fmc={d:.6g}")
    return EXIT_OK


def cmd_ignition(cfg: RunConfig, args) -> int:
    out = _out_dir(args.out)
    grid = cfg.grid.grid()
    ic = cfg.ignition
    snapped = snap_detections(grid, read_detections(args.detections))
    cands = candidate_grid(grid.domain, ic.nx, ic.ny, ic.times)
    tmpl = ConeSpec(grid.domain.center, 0.0, (1.0 / (ic.ros_m_s * 86400.0),))
    res = grid_search(cands, snapped, tmpl, cfg.likelihood)
    write_rows(out / "scores.csv", ("lat", "lon", "t0_days", "loglik"), res.rows())
    b = res.best
    print(f"best lat={b.pos.lat:.6f} lon={b.pos.lon:.6f} t0_days={b.t0:.6g} "
          f"loglik={res.scores[b.index]:.6f}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, args) -> int:
    sc = cfg.synth
    sc = replace(sc, n_scenarios=args.scenarios if args.scenarios is not None else sc.n_scenarios,
                 seed=args.seed if args.seed is not None else sc.seed)
    res = run_battery(sc, STRATEGIES, cfg.estimator, cfg.graph, cfg.densify)
    summ = res.summary()
    ranks = res.rank_sums([s.name for s in STRATEGIES if s.nonfire])
    header = ("strategy", "mre", "moe_x", "moe_y", "moe_norm", "sorenson", "rge", "sorenson_series", "rank_sum")
    rows = [[name] + [m[k] for k in header[1:-1]] + [ranks.get(name, math.nan)] for name, m in summ.items()]
    if args.out:
        write_rows(args.out, header, rows)
    print(",".join(header))
    for r in rows:
        print(",".join([r[0]] + [f"{v:.4f}" for v in r[1:]]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    epilog = "configuration keys and defaults (set in --config TOML or with --set section.key=value):\n" \
             + describe_defaults()
    fmt = argparse.RawDescriptionHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="firefront", description="Fire arrival time estimation from satellite detections.",
                                epilog=epilog, formatter_class=fmt)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_, description=help_, epilog=epilog, formatter_class=fmt)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("generate", cmd_generate, "synthetic truth raster, detections and manifest")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("estimate", cmd_estimate, "estimate a fire arrival time raster from detections")
    sp.add_argument("--detections", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--single", action="store_true", help="single-grid iteration instead of multigrid")

    sp = add("assimilate", cmd_assimilate, "blend detections into a forecast raster")
    sp.add_argument("--forecast", required=True)
    sp.add_argument("--detections", required=True)
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("ros", cmd_ros, "rate of spread rasters and uncertainty moments")
    sp.add_argument("--field", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("assess", cmd_assess, "compare an estimate with a truth raster or a perimeter")
    sp.add_argument("--field", required=True)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--truth")
    g.add_argument("--perimeter", help="CSV with lat,lon columns forming a closed polygon")
    sp.add_argument("--out", required=True, help="report CSV")
    sp.add_argument("--classes", help="optional raster: 0 neither, 1 overlap, 2 missed, 3 false alarm")

    sp = add("fmc-adjust", cmd_fmc, "fuel moisture change from estimate and forecast rasters")
    sp.add_argument("--estimate", required=True)
    sp.add_argument("--forecast", required=True)

    sp = add("ignition-search", cmd_ignition, "grid search for ignition point and time")
    sp.add_argument("--detections", required=True)
    sp.add_argument("--out", required=True, help="output directory")

    sp = add("bench", cmd_bench, "run the synthetic battery and print a row per strategy")
    sp.add_argument("--scenarios", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="summary CSV")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set)
        return args.fn(cfg, args)
    except (ValidationError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as e:
        print(f"error: {e.filename}: no such file", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
