"""Cubic smoothing splines along shortest paths and path densification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geo import FireDomain, ValidationError, haversine


@dataclass(frozen=True, eq=False)
class SplineChannel:
    """Natural cubic spline given by knot values ``g`` and second derivatives ``gamma``."""

    s: np.ndarray
    g: np.ndarray
    gamma: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s, g, c = self.s, self.g, self.gamma
        i = np.clip(np.searchsorted(s, x, side="right") - 1, 0, len(s) - 2)
        h = s[i + 1] - s[i]
        a = x - s[i]
        b = s[i + 1] - x
        inside = (x >= s[0]) & (x <= s[-1])
        val = (b * g[i] + a * g[i + 1]) / h - a * b / 6.0 * ((1 + a / h) * c[i + 1] + (1 + b / h) * c[i])
        # natural end conditions: extend linearly past the end knots
        d0 = (g[1] - g[0]) / (s[1] - s[0]) - (s[1] - s[0]) / 6.0 * c[1]
        d1 = (g[-1] - g[-2]) / (s[-1] - s[-2]) + (s[-1] - s[-2]) / 6.0 * c[-2]
        lin = np.where(x < s[0], g[0] + d0 * (x - s[0]), g[-1] + d1 * (x - s[-1]))
        out = np.where(inside, val, lin)
        return out if out.ndim else float(out)

    def roughness(self) -> float:
        """Integral of the squared second derivative."""
        h = np.diff(self.s)
        c = self.gamma
        return float(np.sum(h / 3.0 * (c[:-1] ** 2 + c[:-1] * c[1:] + c[1:] ** 2)))


def _band_matrices(s: np.ndarray):
    h = np.diff(s)
    n = len(s)
    Q = np.zeros((n, n - 2))
    R = np.zeros((n - 2, n - 2))
    for j in range(1, n - 1):
        c = j - 1
        Q[j - 1, c] = 1.0 / h[j - 1]
        Q[j, c] = -1.0 / h[j - 1] - 1.0 / h[j]
        Q[j + 1, c] = 1.0 / h[j]
        R[c, c] = (h[j - 1] + h[j]) / 3.0
        if c + 1 < n - 2:
            R[c, c + 1] = R[c + 1, c] = h[j] / 6.0
    return Q, R


def smoothing_spline(s, y, w=None, p: float = 1.0) -> SplineChannel:
    """Minimise ``p*sum w (y - f)^2 + (1-p)*int f''^2`` over natural cubic splines.

    The system is solved in a form that stays regular at both ``p = 0``
    (weighted least-squares line) and ``p = 1`` (interpolant).
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(s)
    if n < 2 or len(y) != n:
        raise ValidationError("smoothing spline needs at least 2 points and matching lengths")
    if np.any(np.diff(s) <= 0):
        raise ValidationError("knot abscissae must be strictly increasing (no duplicates)")
    if not 0 <= p <= 1:
        raise ValidationError("p must lie in [0, 1]")
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    if n == 2:
        return SplineChannel(s, y.copy(), np.zeros(2))
    Q, R = _band_matrices(s)
    Winv = 1.0 / w
    A = p * R + (1 - p) * (Q.T * Winv) @ Q
    v = np.linalg.solve(A, (1 - p) * (Q.T @ y))
    g = y - Winv * (Q @ v)
    gamma = np.zeros(n)
    gamma[1:-1] = np.linalg.solve(R, Q.T @ g)
    return SplineChannel(s, g, gamma)


def spline_functional(ch: SplineChannel, y, w=None, p: float = 1.0) -> float:
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    return float(p * np.sum(w * (y - ch.g) ** 2) + (1 - p) * ch.roughness())


@dataclass(frozen=True, eq=False)
class PathPoints:
    """An ordered path with planar coordinates, times and an original-vertex flag."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    original: np.ndarray

    def __len__(self):
        return len(self.t)


def path_arclength(domain: FireDomain, x, y) -> np.ndarray:
    lat, lon = domain.unproject(x, y)
    seg = haversine(lat[:-1], lon[:-1], lat[1:], lon[1:])
    return np.concatenate([[0.0], np.cumsum(seg)])


@dataclass(frozen=True)
class DensifyConfig:
    spacing_max: float = 2000.0
    n_insert: int = 3
    p: float = 0.9


def densify_path(domain: FireDomain, path: PathPoints, cfg: DensifyConfig = DensifyConfig()) -> PathPoints:
    """Insert ``n_insert`` spline points into every long gap between adjacent original vertices."""
    if len(path) < 2:
        return path
    s = path_arclength(domain, path.x, path.y)
    gaps = np.flatnonzero(path.original[:-1] & path.original[1:] & (np.diff(s) > cfg.spacing_max))
    if gaps.size == 0:
        return path
    orig = np.flatnonzero(path.original)
    so = s[orig]
    keep = np.concatenate([[True], np.diff(so) > 0])
    knots = orig[keep]
    fx = smoothing_spline(s[knots], path.x[knots], p=cfg.p)
    fy = smoothing_spline(s[knots], path.y[knots], p=cfg.p)
    ft = smoothing_spline(s[knots], path.t[knots], p=cfg.p)
    xs, ys, ts, og = [], [], [], []
    frac = np.arange(1, cfg.n_insert + 1) / (cfg.n_insert + 1)
    gapset = set(gaps.tolist())
    for i in range(len(path)):
        xs.append([path.x[i]])
        ys.append([path.y[i]])
        ts.append([path.t[i]])
        og.append([path.original[i]])
        if i in gapset:
            q = s[i] + frac * (s[i + 1] - s[i])
            tq = np.clip(ft(q), path.t[i], path.t[i + 1])
            xs.append(fx(q))
            ys.append(fy(q))
            ts.append(np.maximum.accumulate(tq))
            og.append(np.zeros(cfg.n_insert, dtype=bool))
    return PathPoints(np.concatenate(xs), np.concatenate(ys), np.concatenate(ts),
                      np.concatenate(og).astype(bool))
