"""Fuel moisture adjustment from forecast versus estimated rate of spread."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .geo import FireArrivalField, ValidationError
from .ros import RosField

log = logging.getLogger(__name__)

DEFAULT_FMC = (0.02, 0.05, 0.10, 0.20, 0.30)
DEFAULT_ROS_REL = (1.4, 1.0, 0.6, 0.25, 0.05)


@dataclass(frozen=True, eq=False)
class BurnCurve:
    """Relative ROS as a strictly decreasing function of fuel moisture (fraction)."""

    fmc: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_FMC))
    ros_rel: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_ROS_REL))

    def __post_init__(self):
        f = np.asarray(self.fmc, dtype=float)
        r = np.asarray(self.ros_rel, dtype=float)
        object.__setattr__(self, "fmc", f)
        object.__setattr__(self, "ros_rel", r)
        if f.ndim != 1 or f.shape != r.shape or f.size < 2:
            raise ValidationError("burn curve needs at least two matching points")
        if np.any(np.diff(f) <= 0):
            raise ValidationError("burn curve moisture values must be strictly increasing")
        if np.any(np.diff(r) >= 0):
            raise ValidationError("burn curve ROS must strictly decrease with moisture")
        if np.any(r <= 0) or np.any((f < 0) | (f > 1)):
            raise ValidationError("burn curve ROS must be positive and moisture in [0, 1]")
        object.__setattr__(self, "_interp", PchipInterpolator(f, r, extrapolate=False))

    def __call__(self, fmc):
        fmc = np.asarray(fmc, dtype=float)
        if np.any((fmc < self.fmc[0]) | (fmc > self.fmc[-1])):
            raise ValidationError("moisture outside the burn curve range")
        out = self._interp(fmc)
        return out if out.ndim else float(out)

    @property
    def ros_range(self) -> tuple[float, float]:
        return float(self.ros_rel[-1]), float(self.ros_rel[0])


def invert_burn_curve(curve: BurnCurve, target: float) -> float:
    lo, hi = curve.ros_range
    if not lo <= target <= hi:
        raise ValidationError(f"relative ROS {target} outside curve range [{lo}, {hi}]")
    hit = np.flatnonzero(curve.ros_rel == target)
    if hit.size:
        return float(curve.fmc[hit[0]])
    k = int(np.searchsorted(-curve.ros_rel, -target))  # bracketing segment
    return float(brentq(lambda f: curve(f) - target, curve.fmc[k - 1], curve.fmc[k], xtol=1e-14, rtol=1e-14))


def overlap_mask(a: FireArrivalField, b: FireArrivalField, t_end: float | None = None) -> np.ndarray:
    if not a.grid.same_as(b.grid):
        raise ValidationError("fields are on different grids")
    t = a.t_end if t_end is None else t_end
    return (a.values < t) & (b.values < t)


def mean_ros_diff(est: RosField, fcst: RosField, mask, cutoff: float = 2.0):
    """Mean ROS of each field over the shared valid cells, and ``fcst - est``."""
    use = np.asarray(mask, dtype=bool) & est.valid & fcst.valid
    use &= (np.nan_to_num(est.ros, nan=np.inf) < cutoff) & (np.nan_to_num(fcst.ros, nan=np.inf) < cutoff)
    if not use.any():
        raise ValidationError("no cells to compare ROS on")
    me, mf = float(est.ros[use].mean()), float(fcst.ros[use].mean())
    return me, mf, mf - me


def fmc_adjustment(est_area: float, fcst_area: float, mean_est_ros: float, mean_fcst_ros: float,
                   curve: BurnCurve, current_fmc: float, max_step: float = 0.01) -> float:
    """Moisture change that scales the forecast ROS toward the estimate.

    Returns 0 when area and ROS disagree on whether the forecast is too fast.
    """
    if est_area < 0 or fcst_area < 0:
        raise ValidationError("areas must be non-negative")
    if mean_est_ros <= 0 or mean_fcst_ros <= 0:
        raise ValidationError("mean ROS must be positive")
    if np.sign(fcst_area - est_area) != np.sign(mean_fcst_ros - mean_est_ros):
        return 0.0
    if mean_est_ros == mean_fcst_ros:
        return 0.0
    target = curve(current_fmc) * mean_est_ros / mean_fcst_ros
    lo, hi = curve.ros_range
    if not lo <= target <= hi:
        log.warning("target relative ROS %.4g outside burn curve [%.4g, %.4g]; clamping", target, lo, hi)
        target = min(max(target, lo), hi)
    delta = invert_burn_curve(curve, target) - current_fmc
    return float(np.clip(delta, -max_step, max_step))
