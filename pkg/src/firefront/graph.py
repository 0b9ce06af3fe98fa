"""Time-ordered detection digraph: clustering, distance shortening, filters, Dijkstra."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geo import SECONDS_PER_DAY, SnappedDetections, ValidationError, haversine

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Vertices:
    """Columnar vertex set: positions (degrees and planar meters) and times (days)."""

    lat: np.ndarray
    lon: np.ndarray
    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    synthetic: np.ndarray = None

    def __post_init__(self):
        if self.synthetic is None:
            object.__setattr__(self, "synthetic", np.zeros(len(self.t), dtype=bool))

    def __len__(self):
        return len(self.t)

    def take(self, idx) -> "Vertices":
        idx = np.asarray(idx)
        return Vertices(self.lat[idx], self.lon[idx], self.x[idx], self.y[idx], self.t[idx],
                        self.synthetic[idx])

    def append(self, other: "Vertices") -> "Vertices":
        cat = np.concatenate
        return Vertices(cat([self.lat, other.lat]), cat([self.lon, other.lon]), cat([self.x, other.x]),
                        cat([self.y, other.y]), cat([self.t, other.t]),
                        cat([self.synthetic, other.synthetic]))

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    @classmethod
    def from_snapped(cls, snapped: SnappedDetections) -> "Vertices":
        """Fire detections at their snapped node positions."""
        s = snapped.subset(snapped.fire_mask)
        g = s.grid
        x, y = g.node_xy(s.iy, s.ix)
        lat, lon = g.domain.unproject(x, y)
        return cls(np.atleast_1d(lat), np.atleast_1d(lon), np.atleast_1d(x).astype(float),
                   np.atleast_1d(y).astype(float), s.times.copy())


def distance_matrix(v: Vertices) -> np.ndarray:
    if len(v) < 2:
        raise ValidationError("distance matrix needs at least 2 vertices")
    D = haversine(v.lat[:, None], v.lon[:, None], v.lat[None, :], v.lon[None, :])
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


def euclidean_distance_matrix(points) -> np.ndarray:
    """Planar counterpart of :func:`distance_matrix` for points given as rows."""
    p = np.asarray(points, dtype=float)
    if len(p) < 2:
        raise ValidationError("distance matrix needs at least 2 vertices")
    return np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=2))


def time_matrix(v: Vertices) -> np.ndarray:
    if len(v) < 2:
        raise ValidationError("time matrix needs at least 2 vertices")
    return v.t[None, :] - v.t[:, None]


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    k: int
    labels: np.ndarray
    centroids: np.ndarray
    wcss_history: tuple = ()


def _wcss(points, labels, centroids):
    return float(np.sum((points - centroids[labels]) ** 2))


def _lloyd(pts, cent, max_iter):
    n, k = len(pts), len(cent)
    labels = None
    history = []
    for _ in range(max(1, max_iter)):
        d2 = ((pts[:, None, :] - cent[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        # reseed empty clusters at the point farthest from its centroid
        for c in range(k):
            if not np.any(new == c):
                far = int(np.argmax(d2[np.arange(n), new]))
                cent[c] = pts[far]
                new[far] = c
                d2[far] = ((pts[far] - cent) ** 2).sum(axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            cent[c] = pts[labels == c].mean(axis=0)
        history.append(_wcss(pts, labels, cent))
    return labels, cent, history


def kmeans(points, k: int, max_iter: int = 100, seed: int = 0, n_init: int = 5) -> ClusterAssignment:
    """Lloyd's algorithm from ``k`` distinct random data points.

    ``n_init`` seeded starts are run and the one with the smallest
    within-cluster sum of squares is kept (earliest start on ties).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    if k < 1:
        raise ValidationError("k must be at least 1")
    if k > n:
        raise ValidationError(f"k={k} exceeds the number of points n={n}")
    if n_init < 1:
        raise ValidationError("n_init must be at least 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        cent = pts[rng.choice(n, size=k, replace=False)].copy()
        labels, cent, hist = _lloyd(pts, cent, max_iter)
        if best is None or hist[-1] < best[2][-1]:
            best = (labels, cent, hist)
    return ClusterAssignment(k, best[0], best[1], tuple(best[2]))


def shorten_intra_cluster(D: np.ndarray, labels, m: float = 0.25) -> np.ndarray:
    if not 0 < m <= 1:
        raise ValidationError("shortening multiplier must lie in (0, 1]")
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    return np.where(same, m * D, D)


def apply_speed_limit(D: np.ndarray, Tmat: np.ndarray, r_max: float) -> np.ndarray:
    """Drop pairs implying a spread rate above ``r_max`` m/s (``Tmat`` in days)."""
    if not r_max > 0:
        raise ValidationError("r_max must be positive")
    if np.isinf(r_max):
        return D.copy()
    dt = np.abs(Tmat) * SECONDS_PER_DAY
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(dt > 0, D / dt, 0.0)
    return np.where(rate > r_max, np.inf, D)


def split_secondary_fire(v: Vertices, ratio_threshold: float = 0.1, seed: int = 0):
    """Two-means split; a small far group is treated as a separate fire.

    Returns ``(kept, removed)`` index arrays.
    """
    n = len(v)
    if n < 4:
        raise ValidationError("secondary-fire split needs at least 4 vertices")
    ca = kmeans(v.points, 2, seed=seed)
    counts = np.bincount(ca.labels, minlength=2)
    small = int(np.argmin(counts))
    if counts[small] < ratio_threshold * n:
        removed = np.flatnonzero(ca.labels == small)
        kept = np.flatnonzero(ca.labels != small)
        return kept, removed
    return np.arange(n), np.zeros(0, dtype=int)


def infer_ignition(v: Vertices, backdate_h: float = 6.0, domain=None):
    """Return ``(vertices, ignition_index)``; a synthetic vertex is appended on ties."""
    if len(v) == 0:
        raise ValidationError("no fire vertices to infer an ignition from")
    t0 = v.t.min()
    first = np.flatnonzero(v.t == t0)
    if first.size == 1:
        return v, int(first[0])
    x, y = v.x[first].mean(), v.y[first].mean()
    if domain is not None:
        lat, lon = domain.unproject(x, y)
    else:
        lat, lon = v.lat[first].mean(), v.lon[first].mean()
    syn = Vertices(np.array([float(lat)]), np.array([float(lon)]), np.array([x]), np.array([y]),
                   np.array([t0 - backdate_h / 24.0]), np.array([True]))
    return v.append(syn), len(v)


@dataclass(frozen=True, eq=False)
class DetectionGraph:
    vertices: Vertices
    D: np.ndarray
    Tmat: np.ndarray
    W: np.ndarray  # directed weights, inf where no edge
    ignition: int
    labels: np.ndarray
    removed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def directed_weights(D: np.ndarray, Tmat: np.ndarray) -> np.ndarray:
    W = np.where(Tmat > 0, D, np.inf)
    np.fill_diagonal(W, np.inf)
    return W


@dataclass(frozen=True)
class GraphConfig:
    k: int = 20
    m: float = 0.25
    r_max: float = float("inf")
    secondary_ratio: float = 0.1
    backdate_h: float = 6.0
    confidence_threshold: int = 70
    seed: int = 0
    kmeans_max_iter: int = 100
    kmeans_restarts: int = 5

    def effective_k(self, n: int) -> int:
        if n < 4:
            return 0
        return min(self.k, n // 2) if n < 40 else min(self.k, n)


def build_graph(v: Vertices, cfg: GraphConfig = GraphConfig(), domain=None) -> DetectionGraph:
    removed = np.zeros(0, dtype=int)
    if len(v) >= 4 and cfg.secondary_ratio > 0:
        kept, removed = split_secondary_fire(v, cfg.secondary_ratio, cfg.seed)
        if removed.size:
            log.warning("secondary-fire filter removed %d of %d detections", removed.size, len(v))
        v = v.take(kept)
    v, ign = infer_ignition(v, cfg.backdate_h, domain)
    n = len(v)
    if n == 1:
        z = np.zeros((1, 1))
        return DetectionGraph(v, z, z, np.full((1, 1), np.inf), ign, np.zeros(1, dtype=int), removed)
    D = distance_matrix(v)
    Tm = time_matrix(v)
    labels = np.arange(n)
    real = np.flatnonzero(~v.synthetic)
    k = cfg.effective_k(real.size)
    if k >= 1:
        ca = kmeans(v.points[real], k, cfg.kmeans_max_iter, cfg.seed, cfg.kmeans_restarts)
        labels = np.full(n, -1)
        labels[real] = ca.labels
        # synthetic vertices sit in singleton clusters of their own
        syn = np.flatnonzero(v.synthetic)
        labels[syn] = k + np.arange(syn.size)
        D2 = shorten_intra_cluster(D, labels, cfg.m)
    else:
        D2 = D
    D3 = apply_speed_limit(D2, Tm, cfg.r_max)
    return DetectionGraph(v, D, Tm, directed_weights(D3, Tm), ign, labels, removed)


@dataclass(frozen=True, eq=False)
class PathSet:
    """Shortest-path tree from the ignition vertex."""

    vertices: Vertices
    source: int
    dist: np.ndarray
    hops: np.ndarray
    pred: np.ndarray
    edge_length: np.ndarray = None  # unshortened length of the edge pred->v

    @property
    def reachable(self) -> np.ndarray:
        return np.flatnonzero(np.isfinite(self.dist))

    @property
    def unreachable(self) -> np.ndarray:
        return np.flatnonzero(~np.isfinite(self.dist))

    def path(self, v: int) -> list[int]:
        if not np.isfinite(self.dist[v]):
            raise ValidationError(f"vertex {v} is unreachable")
        seq = [int(v)]
        while seq[-1] != self.source:
            seq.append(int(self.pred[seq[-1]]))
        return seq[::-1]

    def paths(self) -> list[list[int]]:
        return [self.path(v) for v in self.reachable]

    def path_counts(self) -> np.ndarray:
        """Number of shortest paths passing through each vertex (subtree sizes)."""
        n = len(self.dist)
        cnt = np.zeros(n, dtype=int)
        reach = self.reachable
        cnt[reach] = 1
        for v in reach[np.argsort(-self.hops[reach], kind="stable")]:
            if v != self.source:
                cnt[self.pred[v]] += cnt[v]
        return cnt

    def leaves(self) -> list[int]:
        reach = set(int(v) for v in self.reachable)
        parents = {int(self.pred[v]) for v in reach if v != self.source}
        return sorted(reach - parents)


def shortest_paths(W: np.ndarray, source: int, vertices: Vertices = None) -> PathSet:
    """Dense Dijkstra.

    Ties in length go to fewer hops, then to the lower predecessor index.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if not 0 <= source < n:
        raise ValidationError("source vertex out of range")
    if np.any(W < 0):
        raise ValidationError("negative edge weight")
    dist = np.full(n, np.inf)
    hops = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    dist[source] = 0.0
    hops[source] = 0
    for _ in range(n):
        cand = np.flatnonzero(~done & np.isfinite(dist))
        if cand.size == 0:
            break
        dmin = dist[cand].min()
        cand = cand[dist[cand] == dmin]
        if cand.size > 1:
            cand = cand[hops[cand] == hops[cand].min()]
        u = int(cand[0])
        done[u] = True
        nd = dist[u] + W[u]
        nh = hops[u] + 1
        better = (nd < dist) | ((nd == dist) & ((nh < hops) | ((nh == hops) & (u < pred))))
        better &= ~done & np.isfinite(nd)
        dist[better] = nd[better]
        hops[better] = nh
        pred[better] = u
    hops[~np.isfinite(dist)] = -1
    return PathSet(vertices, source, dist, hops, pred)


def graph_paths(g: DetectionGraph) -> PathSet:
    ps = shortest_paths(g.W, g.ignition, g.vertices)
    el = np.full(len(ps.dist), np.nan)
    for v in ps.reachable:
        if v != ps.source:
            el[v] = g.D[ps.pred[v], v]
    return PathSet(ps.vertices, ps.source, ps.dist, ps.hops, ps.pred, el)


def path_set_rows(ps: PathSet):
    """Rows for the path CSV: ``path_id, seq, lat, lon, time_days``."""
    v = ps.vertices
    for pid, target in enumerate(ps.reachable):
        for seq, k in enumerate(ps.path(int(target))):
            yield pid, seq, float(v.lat[k]), float(v.lon[k]), float(v.t[k])


def graph_from_snapped(snapped: SnappedDetections, cfg: GraphConfig = GraphConfig()) -> tuple[DetectionGraph, PathSet]:
    v = Vertices.from_snapped(snapped)
    g = build_graph(v, cfg, snapped.grid.domain)
    return g, graph_paths(g)

