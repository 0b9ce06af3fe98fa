"""Metrics comparing fire arrival fields and burn masks."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np

from .geo import FireArrivalField, Grid, ValidationError


@dataclass(frozen=True, eq=False)
class BurnMask:
    grid: Grid
    burned: np.ndarray

    @classmethod
    def from_field(cls, fld: FireArrivalField, t_ref: Optional[float] = None, strict: bool = False):
        """Nodes with ``T <= t_ref``; ``strict`` uses ``T < t_ref`` (for ``t_ref = t_end``)."""
        t = fld.t_end if t_ref is None else t_ref
        b = fld.values < t if strict else fld.values <= t
        return cls(fld.grid, b)

    @property
    def area(self) -> int:
        return int(self.burned.sum())


def _check(a: BurnMask, b: BurnMask):
    if a.burned.shape != b.burned.shape:
        raise ValidationError("masks are on different grids")


def fire_area_series(fld: FireArrivalField, times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ValidationError("times must be increasing")
    v = np.sort(fld.values.ravel())
    return np.searchsorted(v, times, side="right")


def rge(a_est, a_truth) -> float:
    a_est = np.asarray(a_est, dtype=float)
    a_truth = np.asarray(a_truth, dtype=float)
    if a_est.shape != a_truth.shape:
        raise ValidationError("area series must have equal length")
    den = np.linalg.norm(a_truth)
    if den == 0:
        raise ValidationError("ground-truth area series has zero norm")
    return float(np.linalg.norm(a_est - a_truth) / den)


@dataclass(frozen=True, eq=False)
class MoeResult:
    x: float
    y: float
    false_negative: np.ndarray
    false_positive: np.ndarray

    @property
    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def __iter__(self):
        return iter((self.x, self.y))


def moe(observed: BurnMask, predicted: BurnMask) -> MoeResult:
    _check(observed, predicted)
    ob, pr = observed.burned, predicted.burned
    a_ob, a_pr = int(ob.sum()), int(pr.sum())
    if a_ob == 0 or a_pr == 0:
        raise ValidationError("MOE needs non-empty observed and predicted areas")
    ov = int((ob & pr).sum())
    return MoeResult(ov / a_ob, ov / a_pr, ob & ~pr, pr & ~ob)


def sorenson(a: BurnMask, b: BurnMask) -> float:
    _check(a, b)
    tot = int(a.burned.sum() + b.burned.sum())
    if tot == 0:
        return 1.0
    return 2.0 * int((a.burned & b.burned).sum()) / tot


def mean_sorenson(pairs: Sequence[tuple]) -> float:
    if not pairs:
        raise ValidationError("no mask pairs")
    return float(np.mean([sorenson(a, b) for a, b in pairs]))


def relative_error(truth: FireArrivalField, est: FireArrivalField) -> float:
    if truth.values.shape != est.values.shape:
        raise ValidationError("fields are on different grids")
    den = np.linalg.norm(truth.values)
    if den == 0:
        raise ValidationError("ground-truth field has zero norm")
    return float(np.linalg.norm(truth.values - est.values) / den)


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    w = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2 * np.pi)
    return w


def ros_direction_stats(ros_t, theta_t, ros_e, theta_e, mask):
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValidationError("empty comparison mask")
    dr = (np.asarray(ros_e) - np.asarray(ros_t))[mask]
    da = wrap_angle(np.asarray(theta_e) - np.asarray(theta_t))[mask]
    return float(dr.mean()), float(dr.std()), float(da.mean()), float(da.std())


def classification_raster(observed: BurnMask, predicted: BurnMask) -> np.ndarray:
    """0 unburned in both, 1 overlap, 2 false negative, 3 false positive."""
    _check(observed, predicted)
    ob, pr = observed.burned, predicted.burned
    out = np.zeros(ob.shape, dtype=int)
    out[ob & pr] = 1
    out[ob & ~pr] = 2
    out[~ob & pr] = 3
    return out


def rasterize_polygon(grid: Grid, x, y) -> BurnMask:
    """Burn mask of nodes inside a planar polygon (boundary inclusive)."""
    from .estimator import point_in_polygon

    X, Y = grid.mesh()
    inside = point_in_polygon(np.column_stack([X.ravel(), Y.ravel()]), np.column_stack([x, y]))
    return BurnMask(grid, inside.reshape(grid.shape))


@dataclass(frozen=True)
class AssessmentReport:
    spacing_m: float
    moe_x: float
    moe_y: float
    moe_norm: float
    sorenson: float
    rge: float
    rel_error: float
    mrd: float = float("nan")
    srd: float = float("nan")
    mdd: float = float("nan")
    sdd: float = float("nan")

    HEADER = ("spacing_m", "moe_x", "moe_y", "moe_norm", "sorenson", "rge", "rel_error",
              "mrd", "srd", "mdd", "sdd")

    def row(self) -> list:
        d = asdict(self)
        return [d[k] for k in self.HEADER]
