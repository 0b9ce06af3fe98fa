"""Rate of spread from arrival-time fields and paths, and its uncertainty."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geo import SECONDS_PER_DAY, FireArrivalField, Grid, ValidationError
from .graph import PathSet

GRADIENT_EPS = 1e-12  # |grad T| below this (time units per meter) counts as flat
SECONDS_PER_HOUR = 3600.0


# ---------------------------------------------------------------- fields

def gradient(fld: FireArrivalField):
    """Central differences inside, one-sided at the edges; time units per meter."""
    g = fld.grid
    if g.nx < 2 or g.ny < 2:
        raise ValidationError("gradient needs at least a 2x2 grid")
    ty, tx = np.gradient(fld.values, g.spacing, g.spacing)
    return tx, ty


@dataclass(frozen=True, eq=False)
class RosField:
    grid: Grid
    t_x: np.ndarray
    t_y: np.ndarray
    ros: np.ndarray  # m/s, NaN where masked
    theta: np.ndarray  # radians counter-clockwise from east
    valid: np.ndarray


def ros_field(fld: FireArrivalField, cutoff: float = 2.0,
              time_unit_seconds: float = SECONDS_PER_DAY) -> RosField:
    tx, ty = gradient(fld)
    mag = np.hypot(tx, ty)
    flat = mag < GRADIENT_EPS
    with np.errstate(divide="ignore"):
        ros = np.where(flat, np.inf, 1.0 / (np.where(flat, 1.0, mag) * time_unit_seconds))
    valid = ~flat & (ros <= cutoff)
    return RosField(fld.grid, tx, ty, np.where(valid, ros, np.nan), np.arctan2(ty, tx), valid)


def path_ros(paths: PathSet) -> np.ndarray:
    """ROS (m/s) of every tree edge, indexed by the child vertex; NaN for the source and unreachable vertices."""
    if paths.edge_length is None:
        raise ValidationError("path set carries no edge lengths")
    t = paths.vertices.t
    out = np.full(len(t), np.nan)
    for v in paths.reachable:
        u = paths.pred[v]
        if u < 0:
            continue
        dt = (t[v] - t[u]) * SECONDS_PER_DAY
        if dt <= 0:
            raise ValidationError(f"edge {u}->{v} has non-positive time difference")
        out[v] = paths.edge_length[v] / dt
    return out


# ---------------------------------------------------------------- closed forms

def _check_cl(c, l, strict_window=True):
    if l < 0 or (strict_window and l == 0):
        raise ValidationError("window length l must be positive")
    if c <= l:
        raise ValidationError("time separation c must exceed the window length l")


def time_diff_pdf(t, t1: float, t2: float, l: float):
    """Triangular density of the arrival-time difference."""
    if l <= 0:
        raise ValidationError("window length l must be positive")
    c = t2 - t1
    t = np.asarray(t, dtype=float)
    out = np.clip((l - np.abs(t - c)) / l**2, 0.0, None)
    return out if out.ndim else float(out)


def recip_cdf(s, t1: float, t2: float, l: float):
    c = t2 - t1
    _check_cl(c, l)
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        u = 1.0 / s
    lo = np.where(s > 0, (u - (c + l)) ** 2 / (2 * l**2), 0.0)
    hi = 1.0 - (u - (c - l)) ** 2 / (2 * l**2)
    out = np.where(s < 1 / (c + l), 0.0,
                   np.where(s <= 1 / c, lo, np.where(s <= 1 / (c - l), hi, 1.0)))
    return out if out.ndim else float(out)


def recip_pdf(s, t1: float, t2: float, l: float):
    c = t2 - t1
    _check_cl(c, l)
    s = np.asarray(s, dtype=float)
    safe = np.where(s > 0, s, 1.0)
    left = ((c + l) - 1 / safe) / (l * safe) ** 2
    right = (1 / safe - (c - l)) / (l * safe) ** 2
    out = np.where((s >= 1 / (c + l)) & (s <= 1 / c), left,
                   np.where((s > 1 / c) & (s <= 1 / (c - l)), right, 0.0))
    return out if out.ndim else float(out)


def expected_s(c: float, l: float) -> float:
    """E[1/T] for the triangular time difference; l = 0 gives 1/c."""
    _check_cl(c, l, strict_window=False)
    if l == 0:
        return 1.0 / c
    r = l / c
    if r < 0.05:
        # (1+r)ln(1+r) + (1-r)ln(1-r) = sum_k r^(2k) / (k (2k-1)); the log form cancels for small r
        return sum(r ** (2 * k - 2) / (k * (2 * k - 1)) for k in range(12, 0, -1)) / c
    return float(((c + l) * math.log1p(r) + (c - l) * math.log1p(-r)) / l**2)


def expected_s2(c: float, l: float) -> float:
    _check_cl(c, l, strict_window=False)
    if l == 0:
        return 1.0 / c**2
    return float(-math.log1p(-(l / c) ** 2) / l**2)


def var_s(c: float, l: float) -> float:
    return max(expected_s2(c, l) - expected_s(c, l) ** 2, 0.0)


def distance_diff_density(z, d: float, sigma1: float, sigma2: float):
    var = sigma1**2 + sigma2**2
    if var <= 0:
        raise ValidationError("at least one geolocation sigma must be positive")
    z = np.asarray(z, dtype=float)
    out = np.exp(-((z - d) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RosUncertaintyInputs:
    """Nominal separation ``d`` (m), geolocation sigmas (m), detection times and window (hours).

    ``l = 0`` and zero sigmas are accepted as the deterministic limit.
    """

    d: float
    sigma1: float
    sigma2: float
    t1: float
    t2: float
    l: float

    def __post_init__(self):
        if self.d < 0:
            raise ValidationError("d must be non-negative")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValidationError("sigmas must be non-negative")
        _check_cl(self.c, self.l, strict_window=False)

    @property
    def c(self) -> float:
        return self.t2 - self.t1


def mean_ros(inp: RosUncertaintyInputs) -> float:
    """E[R] in m/s."""
    return inp.d * expected_s(inp.c, inp.l) / SECONDS_PER_HOUR


def var_ros(inp: RosUncertaintyInputs) -> float:
    """Var[R] in (m/s)^2 with signed Gaussian separation and independent times."""
    # E[D^2] E[S^2] - d^2 E[S]^2, regrouped to avoid cancellation
    v = inp.d**2 * var_s(inp.c, inp.l) + (inp.sigma1**2 + inp.sigma2**2) * expected_s2(inp.c, inp.l)
    return v / SECONDS_PER_HOUR**2


# ---------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class Moments:
    n: int
    mean: float
    m2: float  # sum of squared deviations

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    def merge(self, o: "Moments") -> "Moments":
        if self.n == 0:
            return o
        if o.n == 0:
            return self
        n = self.n + o.n
        delta = o.mean - self.mean
        return Moments(n, self.mean + delta * o.n / n, self.m2 + o.m2 + delta**2 * self.n * o.n / n)

    @classmethod
    def of(cls, x: np.ndarray) -> "Moments":
        if x.size == 0:
            return cls(0, 0.0, 0.0)
        m = float(x.mean())
        return cls(int(x.size), m, float(np.sum((x - m) ** 2)))


@dataclass(frozen=True)
class McResult:
    s: Moments  # 1/T in 1/hours
    r: Moments  # ROS in m/s
    rejected: int


def thread_count() -> int:
    env = os.environ.get("FIREFRONT_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cap))
        except ValueError:
            raise ValidationError("FIREFRONT_THREADS must be an integer") from None
    return cap


def _mc_chunk(inp: RosUncertaintyInputs, n: int, ss: np.random.SeedSequence):
    rng = np.random.default_rng(ss)
    x = rng.uniform(inp.t1 - inp.l, inp.t1, n)
    y = rng.uniform(inp.t2 - inp.l, inp.t2, n)
    t = y - x
    sd = math.hypot(inp.sigma1, inp.sigma2)
    dist = rng.normal(inp.d, sd, n) if sd > 0 else np.full(n, inp.d)
    ok = t > 0
    s = 1.0 / t[ok]
    r = dist[ok] * s / SECONDS_PER_HOUR
    return Moments.of(s), Moments.of(r), int(n - ok.sum())


def mc_ros_sample(inp: RosUncertaintyInputs, n: int, seed: int, chunk: int = 1_000_000,
                  threads: int | None = None) -> McResult:
    """Sample separations and time differences; deterministic for a given seed and chunk size."""
    if n < 1:
        raise ValidationError("n must be positive")
    sizes = [chunk] * (n // chunk) + ([n % chunk] if n % chunk else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    workers = threads or thread_count()
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: _mc_chunk(inp, *a), zip(sizes, seeds)))
    else:
        parts = [_mc_chunk(inp, k, s) for k, s in zip(sizes, seeds)]
    ms, mr, rej = Moments(0, 0.0, 0.0), Moments(0, 0.0, 0.0), 0
    for a, b, c in parts:  # merge in chunk order so the result does not depend on threads
        ms, mr, rej = ms.merge(a), mr.merge(b), rej + c
    return McResult(ms, mr, rej)


MOMENTS_HEADER = ("c_h", "l_h", "d_m", "sigma_m", "mean_analytic", "var_analytic", "mean_mc", "var_mc")


def moments_rows(cases, n: int, seed: int):
    """One row per ``(c, l, d, sigma)`` case; ROS moments in m/s."""
    rows = []
    for i, (c, l, d, sig) in enumerate(cases):
        inp = RosUncertaintyInputs(d, sig, sig, 0.0, c, l)
        mc = mc_ros_sample(inp, n, seed + i)
        rows.append([c, l, d, sig, mean_ros(inp), var_ros(inp), mc.r.mean, mc.r.var])
    return rows
