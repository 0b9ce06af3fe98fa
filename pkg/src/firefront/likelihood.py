"""Detection likelihood: heat decay, logistic detection curve, geolocation blur."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import expit

from .geo import FireArrivalField, SnappedDetections, ValidationError

HOURS_PER_DAY = 24.0


def solve_b(p_false: float) -> float:
    if not 0 < p_false < 1:
        raise ValidationError(f"p_false must lie in (0, 1), got {p_false}")
    return math.log((1 - p_false) / p_false)


def solve_a(p_anchor: float, t_anchor: float, b: float, c_decay: float) -> float:
    """Logistic slope giving probability ``p_anchor`` at lag ``t_anchor`` hours.

    Inverts ``p = 1/(1+exp(-a h + b))`` at ``h = exp(-t_anchor/c_decay)``.
    """
    if not 0 < p_anchor < 1:
        raise ValidationError(f"p_anchor must lie in (0, 1), got {p_anchor}")
    if c_decay <= 0:
        raise ValidationError("c_decay must be positive")
    h = math.exp(-t_anchor / c_decay)
    if h <= 0:
        raise ValidationError("anchor lag underflows the heat curve")
    a = (math.log(p_anchor / (1 - p_anchor)) + b) / h
    if not a > 0:
        raise ValidationError(
            f"p_anchor={p_anchor} is not above the false-detection rate; logistic slope a={a:.4g} <= 0")
    return a


@dataclass(frozen=True)
class LikelihoodParams:
    sigma_geo: float = 333.0  # m
    c_decay: float = 10.0  # h
    p_false: float = 0.05
    p_anchor: float = 0.3
    t_anchor: float = 24.0  # h
    l_window: float = 6.0  # h
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        if not self.sigma_geo > 0:
            raise ValidationError("sigma_geo must be positive")
        if not (0 < self.p_false < 0.5):
            raise ValidationError("p_false must lie in (0, 0.5)")
        if not (self.p_false < self.p_anchor < 1):
            raise ValidationError("need p_false < p_anchor < 1")
        for name in ("c_decay", "t_anchor", "l_window"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        b = solve_b(self.p_false)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", solve_a(self.p_anchor, self.t_anchor, b, self.c_decay))


def burn_heat(t_obs, t_arrival, c_decay: float):
    """Heat proxy; times in days, ``c_decay`` in hours."""
    if c_decay <= 0:
        raise ValidationError("c_decay must be positive")
    lag_h = (np.asarray(t_obs, dtype=float) - np.asarray(t_arrival, dtype=float)) * HOURS_PER_DAY
    h = np.where(lag_h >= 0, np.exp(-np.maximum(lag_h, 0.0) / c_decay), 0.0)
    return h if h.ndim else float(h)


def detection_probability(h, a: float, b: float):
    p = expit(a * np.asarray(h, dtype=float) - b)
    return p if np.ndim(p) else float(p)


def geolocation_density(dx, dy, sigma_geo: float):
    if sigma_geo <= 0:
        raise ValidationError("sigma_geo must be positive")
    r2 = np.asarray(dx, dtype=float) ** 2 + np.asarray(dy, dtype=float) ** 2
    d = np.exp(-r2 / (2 * sigma_geo**2)) / (2 * math.pi * sigma_geo**2)
    return d if np.ndim(d) else float(d)


def gaussian_kernel1d(sigma_cells: float) -> np.ndarray:
    """Normalised samples of a Gaussian truncated at 4 sigma."""
    if sigma_cells <= 0:
        raise ValidationError("kernel sigma must be positive")
    r = int(math.ceil(4 * sigma_cells))
    k = np.arange(-r, r + 1, dtype=float)
    w = np.exp(-0.5 * (k / sigma_cells) ** 2)
    return w / w.sum()


def blur(values: np.ndarray, sigma_cells: float) -> np.ndarray:
    """Separable truncated Gaussian with renormalisation over the in-grid support."""
    w = gaussian_kernel1d(sigma_cells)
    ones = np.ones(values.shape)
    num = correlate1d(correlate1d(values, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    den = correlate1d(correlate1d(ones, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    return num / den


def smoothed_heat(fld: FireArrivalField, t_obs: float, params: LikelihoodParams) -> np.ndarray:
    h = burn_heat(t_obs, fld.values, params.c_decay)
    return blur(h, params.sigma_geo / fld.grid.spacing)


def smoothed_detection_likelihood(fld: FireArrivalField, node, t_obs: float,
                                  params: LikelihoodParams) -> float:
    iy, ix = node
    hs = smoothed_heat(fld, t_obs, params)
    return float(detection_probability(hs[iy, ix], params.a, params.b))


def nondetection_likelihood(fld: FireArrivalField, node, t_obs: float,
                            params: LikelihoodParams) -> float:
    return 1.0 - smoothed_detection_likelihood(fld, node, t_obs, params)


def detection_probabilities(fld: FireArrivalField, iy, ix, times, params: LikelihoodParams) -> np.ndarray:
    """Vectorised smoothed detection probability at many (node, time) pairs.

    The blurred heat field is computed once per distinct observation time.
    """
    iy = np.asarray(iy, dtype=int)
    ix = np.asarray(ix, dtype=int)
    times = np.asarray(times, dtype=float)
    out = np.empty(times.shape)
    for t in np.unique(times):
        sel = times == t
        hs = smoothed_heat(fld, float(t), params)
        out[sel] = hs[iy[sel], ix[sel]]
    return detection_probability(out, params.a, params.b)


def dataset_log_likelihood(fld: FireArrivalField, dets: SnappedDetections,
                           params: LikelihoodParams) -> float:
    """Sum of log p(d=1) over fire detections and log p(d=0) over non-fire pixels."""
    if len(dets) == 0:
        return 0.0
    use = dets.fire_mask | dets.nonfire_mask
    if not use.any():
        return 0.0
    p = detection_probabilities(fld, dets.iy[use], dets.ix[use], dets.times[use], params)
    fire = dets.fire_mask[use]
    return float(np.sum(np.log(p[fire])) + np.sum(np.log1p(-p[~fire])))


def laplacian5(e: np.ndarray, spacing: float) -> np.ndarray:
    """Five-point Laplacian with zero values assumed outside the grid."""
    p = np.pad(e, 1)
    lap = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * e
    return lap / spacing**2


def smoothness_penalty(fld: FireArrivalField, reference: FireArrivalField, weight: float) -> float:
    """(weight/2) * e^T A e with A the negated five-point Laplacian, so the result is >= 0."""
    if not fld.grid.same_as(reference.grid):
        raise ValidationError("smoothness_penalty needs fields on the same grid")
    e = fld.values - reference.values
    return float(0.5 * weight * np.sum(-laplacian5(e, fld.grid.spacing) * e))
