"""Geographic primitives, raster grids and snapping of point observations."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

EARTH_RADIUS_M = 6371008.8
SECONDS_PER_DAY = 86400.0


class ValidationError(ValueError):
    """Raised for inputs that violate a documented precondition."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValidationError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ValidationError(f"longitude out of range: {self.lon}")


class Kind(enum.Enum):
    FIRE = "fire"
    NONFIRE_LAND = "nonfire_land"
    NONFIRE_WATER = "nonfire_water"
    UNKNOWN = "unknown"

    @property
    def is_fire(self) -> bool:
        return self is Kind.FIRE

    @property
    def is_nonfire(self) -> bool:
        return self in (Kind.NONFIRE_LAND, Kind.NONFIRE_WATER)


@dataclass(frozen=True)
class Detection:
    pos: GeoPoint
    time: float
    kind: Kind = Kind.FIRE
    confidence: int = 100

    def __post_init__(self):
        if not math.isfinite(self.time) or self.time < 0:
            raise ValidationError(f"detection time must be finite and >= 0, got {self.time}")
        if not (0 <= int(self.confidence) <= 100):
            raise ValidationError(f"confidence out of range: {self.confidence}")


@dataclass(frozen=True)
class FireDomain:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        if not (self.lat_max > self.lat_min and self.lon_max > self.lon_min):
            raise ValidationError("degenerate bounding box")
        if not self.t_end > self.t_start:
            raise ValidationError("t_end must exceed t_start")
        GeoPoint(self.lat_min, self.lon_min)
        GeoPoint(self.lat_max, self.lon_max)

    @property
    def lat_c(self) -> float:
        return 0.5 * (self.lat_min + self.lat_max)

    @property
    def lon_c(self) -> float:
        return 0.5 * (self.lon_min + self.lon_max)

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(self.lat_c, self.lon_c)

    def project(self, lat, lon):
        """Equirectangular projection about the domain center, in meters."""
        lat = np.asarray(lat, dtype=float)
        lon = np.asarray(lon, dtype=float)
        k = math.radians(1.0) * EARTH_RADIUS_M
        x = k * math.cos(math.radians(self.lat_c)) * (lon - self.lon_c)
        y = k * (lat - self.lat_c)
        return x, y

    def unproject(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        k = math.radians(1.0) * EARTH_RADIUS_M
        lat = self.lat_c + y / k
        lon = self.lon_c + x / (k * math.cos(math.radians(self.lat_c)))
        return lat, lon

    @property
    def extent_m(self) -> tuple[float, float]:
        x0, y0 = self.project(self.lat_min, self.lon_min)
        x1, y1 = self.project(self.lat_max, self.lon_max)
        return float(x1 - x0), float(y1 - y0)

    def contains(self, lat, lon, tol: float = 1e-9):
        """Inside the box, with ``tol`` degrees (about 0.1 mm) of slack for round-tripped edge nodes."""
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return ((lat >= self.lat_min - tol) & (lat <= self.lat_max + tol)
                & (lon >= self.lon_min - tol) & (lon <= self.lon_max + tol))

    @classmethod
    def around(cls, lat: float, lon: float, width_m: float, height_m: float,
               t_start: float = 0.0, t_end: float = 1.0) -> "FireDomain":
        """Domain of the given metric size centered on (lat, lon)."""
        k = math.radians(1.0) * EARTH_RADIUS_M
        dlat = 0.5 * height_m / k
        dlon = 0.5 * width_m / (k * math.cos(math.radians(lat)))
        return cls(lat - dlat, lat + dlat, lon - dlon, lon + dlon, t_start, t_end)


# ceil() tolerance so that extents that are exact multiples of the spacing are not
# bumped by floating round-off from the degree conversion
_CEIL_TOL = 1e-6


@dataclass(frozen=True)
class Grid:
    domain: FireDomain
    spacing: float
    nx: int
    ny: int

    @property
    def origin(self) -> tuple[float, float]:
        x0, y0 = self.domain.project(self.domain.lat_min, self.domain.lon_min)
        return float(x0), float(y0)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Planar node coordinates, arrays of shape (ny, nx); row 0 is the south edge."""
        return np.meshgrid(self.xs, self.ys)

    def latlon(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = self.mesh()
        return self.domain.unproject(X, Y)

    def node_xy(self, iy, ix):
        x0, y0 = self.origin
        return x0 + self.spacing * np.asarray(ix), y0 + self.spacing * np.asarray(iy)

    def node_latlon(self, iy, ix):
        return self.domain.unproject(*self.node_xy(iy, ix))

    def nearest_node(self, x, y):
        x0, y0 = self.origin
        ix = np.clip(np.rint((np.asarray(x) - x0) / self.spacing), 0, self.nx - 1).astype(int)
        iy = np.clip(np.rint((np.asarray(y) - y0) / self.spacing), 0, self.ny - 1).astype(int)
        return iy, ix

    def same_as(self, other: "Grid") -> bool:
        return (self.domain == other.domain and self.nx == other.nx and self.ny == other.ny
                and math.isclose(self.spacing, other.spacing, rel_tol=1e-12))


def great_circle_distance(a: GeoPoint, b: GeoPoint) -> float:
    return float(haversine(a.lat, a.lon, b.lat, b.lon))


def haversine(lat1, lon1, lat2, lon2):
    """Vectorised haversine distance in meters."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def build_grid(domain: FireDomain, spacing: float) -> Grid:
    if not (spacing > 0 and math.isfinite(spacing)):
        raise ValidationError(f"grid spacing must be positive, got {spacing}")
    w, h = domain.extent_m
    if spacing > w or spacing > h:
        raise ValidationError(f"spacing {spacing} m exceeds domain extent {w:.1f} x {h:.1f} m")
    nx = int(math.ceil(w / spacing - _CEIL_TOL)) + 1
    ny = int(math.ceil(h / spacing - _CEIL_TOL)) + 1
    return Grid(domain, float(spacing), nx, ny)


@dataclass(frozen=True, eq=False)
class SnappedDetections:
    """Detections mapped onto grid nodes.

    Arrays are parallel: ``iy[k], ix[k]`` is the node of ``detections[k]``.
    """

    grid: Grid
    detections: tuple
    iy: np.ndarray
    ix: np.ndarray
    displacement: np.ndarray
    dropped: int = 0
    times: np.ndarray = field(init=False, repr=False)
    fire_mask: np.ndarray = field(init=False, repr=False)
    nonfire_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ds = self.detections
        object.__setattr__(self, "times", np.array([d.time for d in ds], dtype=float))
        object.__setattr__(self, "fire_mask", np.array([d.kind.is_fire for d in ds], dtype=bool))
        object.__setattr__(self, "nonfire_mask", np.array([d.kind.is_nonfire for d in ds], dtype=bool))

    def __len__(self):
        return len(self.detections)

    @property
    def flat_index(self) -> np.ndarray:
        return self.iy * self.grid.nx + self.ix

    def subset(self, mask) -> "SnappedDetections":
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(int)
        return SnappedDetections(self.grid, tuple(self.detections[i] for i in idx),
                                 self.iy[idx], self.ix[idx], self.displacement[idx], self.dropped)


def snap_detections(grid: Grid, dets: Sequence[Detection]) -> SnappedDetections:
    dets = list(dets)
    if not dets:
        empty = np.zeros(0, dtype=int)
        return SnappedDetections(grid, (), empty, empty, np.zeros(0), 0)
    lat = np.array([d.pos.lat for d in dets])
    lon = np.array([d.pos.lon for d in dets])
    keep = np.flatnonzero(grid.domain.contains(lat, lon))
    x, y = grid.domain.project(lat[keep], lon[keep])
    iy, ix = grid.nearest_node(x, y)
    nx_, ny_ = grid.node_xy(iy, ix)
    disp = np.hypot(x - nx_, y - ny_)
    return SnappedDetections(grid, tuple(dets[i] for i in keep), iy, ix, disp,
                             int(len(dets) - keep.size))


def filter_confidence(dets: Iterable[Detection], threshold: int) -> list[Detection]:
    return [d for d in dets if not d.kind.is_fire or d.confidence >= threshold]


@dataclass(frozen=True, eq=False)
class FireArrivalField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValidationError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def clamped(cls, grid: Grid, values) -> "FireArrivalField":
        d = grid.domain
        return cls(grid, np.clip(values, d.t_start, d.t_end))

    @property
    def t_end(self) -> float:
        return self.grid.domain.t_end


def resample_field(fld: FireArrivalField, target: Grid) -> FireArrivalField:
    """Bilinear resampling onto ``target``; linear extrapolation past the source edge."""
    if fld.grid.domain != target.domain:
        raise ValidationError("resample_field requires grids over the same domain")
    if fld.grid.same_as(target):
        return FireArrivalField(target, fld.values.copy())
    interp = RegularGridInterpolator((fld.grid.ys, fld.grid.xs), fld.values,
                                     method="linear", bounds_error=False, fill_value=None)
    X, Y = target.mesh()
    pts = np.column_stack([Y.ravel(), X.ravel()])
    return FireArrivalField.clamped(target, interp(pts).reshape(target.shape))
