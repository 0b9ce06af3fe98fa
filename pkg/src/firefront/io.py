"""File formats: detection CSV, ESRI ASCII rasters and small tabular outputs."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geo import Detection, FireArrivalField, GeoPoint, Grid, Kind, ValidationError

DETECTION_HEADER = ("lat", "lon", "time_days", "kind", "confidence")
NODATA = -9999

_KIND_NAMES = {k.value: k for k in Kind}


class FormatError(ValidationError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}: column '{column}': {message}")


def _fmt(v: float) -> str:
    # repr round-trips floats exactly and is stable across runs
    return repr(float(v))


def write_detections(path, dets: Iterable[Detection]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DETECTION_HEADER)
        for d in dets:
            w.writerow([_fmt(d.pos.lat), _fmt(d.pos.lon), _fmt(d.time), d.kind.value, int(d.confidence)])


def read_detections(path) -> list[Detection]:
    path = Path(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "header", "empty file") from None
        if tuple(h.strip() for h in header) != DETECTION_HEADER:
            raise FormatError(path, 1, "header", f"expected {','.join(DETECTION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(DETECTION_HEADER):
                raise FormatError(path, lineno, "row", f"expected 5 fields, got {len(row)}")
            vals = {}
            for col, raw in zip(DETECTION_HEADER, row):
                raw = raw.strip()
                if col == "kind":
                    if raw not in _KIND_NAMES:
                        raise FormatError(path, lineno, col, f"unknown kind {raw!r}")
                    vals[col] = _KIND_NAMES[raw]
                elif col == "confidence":
                    try:
                        vals[col] = int(raw)
                    except ValueError:
                        raise FormatError(path, lineno, col, f"not an integer: {raw!r}") from None
                else:
                    try:
                        v = float(raw)
                    except ValueError:
                        raise FormatError(path, lineno, col, f"not a number: {raw!r}") from None
                    if not math.isfinite(v):
                        raise FormatError(path, lineno, col, "non-finite value")
                    vals[col] = v
            if not -90 <= vals["lat"] <= 90:
                raise FormatError(path, lineno, "lat", "latitude out of range")
            if not -180 <= vals["lon"] <= 180:
                raise FormatError(path, lineno, "lon", "longitude out of range")
            if vals["time_days"] < 0:
                raise FormatError(path, lineno, "time_days", "negative time")
            if not 0 <= vals["confidence"] <= 100:
                raise FormatError(path, lineno, "confidence", "confidence outside [0, 100]")
            out.append(Detection(GeoPoint(vals["lat"], vals["lon"]), vals["time_days"],
                                 vals["kind"], vals["confidence"]))
    return out


def raster_header(grid: Grid) -> dict:
    """Header in local planar meters (cell-registered, so corners sit half a cell out)."""
    x0, y0 = grid.origin
    h = grid.spacing / 2
    return {"ncols": grid.nx, "nrows": grid.ny, "xllcorner": x0 - h,
            "yllcorner": y0 - h, "cellsize": grid.spacing, "NODATA_value": NODATA}


def format_raster(grid: Grid, values: np.ndarray, nodata_mask=None) -> str:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValidationError("raster values do not match grid shape")
    hdr = raster_header(grid)
    buf = io.StringIO()
    for key in ("ncols", "nrows"):
        buf.write(f"{key} {hdr[key]}\n")
    for key in ("xllcorner", "yllcorner", "cellsize"):
        buf.write(f"{key} {hdr[key]:.6f}\n")
    buf.write(f"NODATA_value {NODATA}\n")
    vals = values.copy()
    if nodata_mask is not None:
        vals[np.asarray(nodata_mask)] = NODATA
    for row in vals[::-1]:
        buf.write(" ".join(f"{v:.9g}" for v in row))
        buf.write("\n")
    return buf.getvalue()


def write_raster(path, grid: Grid, values, nodata_mask=None) -> None:
    Path(path).write_text(format_raster(grid, values, nodata_mask), encoding="utf-8")


def read_raster(path) -> tuple[dict, np.ndarray]:
    """Return (header, values) with values south-row-first and NODATA as NaN."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    hdr = {}
    keys = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value")
    for i, key in enumerate(keys):
        if i >= len(lines):
            raise FormatError(path, i + 1, key, "missing header line")
        parts = lines[i].split()
        if len(parts) != 2 or parts[0].lower() != key.lower():
            raise FormatError(path, i + 1, key, f"expected '{key} <value>'")
        try:
            hdr[key] = int(parts[1]) if key in ("ncols", "nrows") else float(parts[1])
        except ValueError:
            raise FormatError(path, i + 1, key, f"bad value {parts[1]!r}") from None
    ncols, nrows = hdr["ncols"], hdr["nrows"]
    rows = [ln for ln in lines[len(keys):] if ln.strip()]
    if len(rows) != nrows:
        raise FormatError(path, len(keys) + 1, "data", f"expected {nrows} rows, got {len(rows)}")
    data = np.empty((nrows, ncols))
    for r, ln in enumerate(rows):
        parts = ln.split()
        lineno = len(keys) + r + 1
        if len(parts) != ncols:
            raise FormatError(path, lineno, "data", f"expected {ncols} values, got {len(parts)}")
        try:
            data[r] = [float(p) for p in parts]
        except ValueError:
            raise FormatError(path, lineno, "data", "non-numeric value") from None
    data = data[::-1].copy()
    data[data == hdr["NODATA_value"]] = np.nan
    return hdr, data


def read_field(path, grid: Grid) -> FireArrivalField:
    """Read a raster and check it against ``grid``."""
    hdr, data = read_raster(path)
    want = raster_header(grid)
    if (hdr["ncols"], hdr["nrows"]) != (want["ncols"], want["nrows"]):
        raise FormatError(path, 1, "ncols", f"raster is {hdr['ncols']}x{hdr['nrows']}, "
                          f"grid is {want['ncols']}x{want['nrows']}")
    for key in ("xllcorner", "yllcorner", "cellsize"):
        if not math.isclose(hdr[key], want[key], rel_tol=1e-6, abs_tol=1e-3):
            line = ("xllcorner", "yllcorner", "cellsize").index(key) + 3
            raise FormatError(path, line, key, f"{hdr[key]} does not match grid value {want[key]:.6f}")
    if np.isnan(data).any():
        raise FormatError(path, 7, "data", "field raster may not contain NODATA cells")
    return FireArrivalField.clamped(grid, data)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
