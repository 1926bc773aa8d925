"""Digital surface model rasters and polygon altitude sampling."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import NoCoverageError, ParseError
from .geometry import LocalFrame, PVPolygon, points_in_ring

LOCAL_METERS = "local-meters"
WGS84_DEGREES = "wgs84-degrees"
CRS_MODES = (LOCAL_METERS, WGS84_DEGREES)

_REQUIRED = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
_DEFAULT_NODATA = -9999.0


class AltitudeSample(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True, eq=False)
class DSMRaster:
    """Georeferenced altitude grid.

    ``values[row, col]`` with row 0 the southernmost row. ``origin`` is the
    lower-left corner of the grid. In ``local-meters`` mode, raster
    coordinates are meters east/north of ``geo_origin`` (lon, lat).
    """

    values: np.ndarray
    origin: tuple[float, float]
    cellsize: float
    nodata: float = _DEFAULT_NODATA
    crs_mode: str = WGS84_DEGREES
    geo_origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.size == 0:
            raise ValueError("values must be a non-empty 2-D grid")
        if not self.cellsize > 0:
            raise ValueError(f"cellsize must be > 0, got {self.cellsize!r}")
        if self.crs_mode not in CRS_MODES:
            raise ValueError(f"crs_mode must be one of {CRS_MODES}, got {self.crs_mode!r}")
        valid = vals != self.nodata
        if not np.all(np.isfinite(vals[valid])):
            raise ValueError("non-nodata altitudes must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def nrows(self):
        return self.values.shape[0]

    @property
    def ncols(self):
        return self.values.shape[1]

    def value(self, col, row):
        return float(self.values[row, col])

    def cell_centers(self):
        """Cell-center coordinates in the raster CRS, shaped like ``values``."""
        xs = self.origin[0] + (np.arange(self.ncols) + 0.5) * self.cellsize
        ys = self.origin[1] + (np.arange(self.nrows) + 0.5) * self.cellsize
        return np.meshgrid(xs, ys)


def load_asc(stream, crs_mode=WGS84_DEGREES, geo_origin=(0.0, 0.0)) -> DSMRaster:
    """Read an ESRI ASCII grid.

    Parameters
    ----------
    stream : path, bytes, str or file object
    crs_mode : {"local-meters", "wgs84-degrees"}
    geo_origin : (lon, lat)
        Geographic position of raster coordinate (0, 0); only used in
        ``local-meters`` mode.
    """
    if isinstance(stream, (bytes, bytearray)):
        text = bytes(stream).decode("utf-8")
    elif isinstance(stream, str) and "\n" in stream:
        text = stream
    elif hasattr(stream, "read"):
        data = stream.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        with open(stream, encoding="utf-8") as fh:
            text = fh.read()

    header = {}
    lines = io.StringIO(text).readlines()
    lineno = 0
    while lineno < len(lines):
        tokens = lines[lineno].split()
        if not tokens:
            lineno += 1
            continue
        if tokens[0][0].isalpha():
            if len(tokens) != 2:
                raise ParseError(f"malformed header entry {lines[lineno].strip()!r}", line=lineno + 1)
            try:
                header[tokens[0].lower()] = float(tokens[1])
            except ValueError:
                raise ParseError(f"non-numeric header value for {tokens[0]!r}", line=lineno + 1) from None
            lineno += 1
        else:
            break

    if "xllcenter" in header and "xllcorner" not in header:
        header["xllcorner"] = header["xllcenter"] - 0.5 * header.get("cellsize", 0.0)
    if "yllcenter" in header and "yllcorner" not in header:
        header["yllcorner"] = header["yllcenter"] - 0.5 * header.get("cellsize", 0.0)
    for key in _REQUIRED:
        if key not in header:
            raise ParseError(f"missing header key {key!r}", line=lineno + 1)
    ncols, nrows = header["ncols"], header["nrows"]
    if ncols != int(ncols) or nrows != int(nrows) or ncols < 1 or nrows < 1:
        raise ParseError("ncols and nrows must be positive integers")
    ncols, nrows = int(ncols), int(nrows)
    if header["cellsize"] <= 0:
        raise ParseError("cellsize must be > 0")
    nodata = header.get("nodata_value", _DEFAULT_NODATA)

    rows = []
    for i in range(lineno, len(lines)):
        tokens = lines[i].split()
        if not tokens:
            continue
        if len(rows) == nrows:
            raise ParseError(f"more than nrows={nrows} data rows", line=i + 1)
        if len(tokens) != ncols:
            raise ParseError(f"expected {ncols} values, found {len(tokens)}", line=i + 1)
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            bad = next(t for t in tokens if not _is_number(t))
            raise ParseError(f"non-numeric cell {bad!r}", line=i + 1) from None
    if len(rows) != nrows:
        raise ParseError(f"expected {nrows} data rows, found {len(rows)}", line=len(lines))

    values = np.asarray(rows[::-1], dtype=float)
    bad = (values != nodata) & ~np.isfinite(values)
    if np.any(bad):
        raise ParseError("non-finite altitude")
    return DSMRaster(
        values=values,
        origin=(header["xllcorner"], header["yllcorner"]),
        cellsize=header["cellsize"],
        nodata=nodata,
        crs_mode=crs_mode,
        geo_origin=tuple(geo_origin),
    )


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def samples_in_polygon(r: DSMRaster, p: PVPolygon, frame: LocalFrame):
    """Altitude samples whose cell center falls inside ``p``.

    Returns an ``(n, 3)`` float array of (x, y, z) with x/y in meters
    relative to ``frame.origin`` (normally the polygon centroid). Raises
    :class:`NoCoverageError` when no valid cell center is inside.
    """
    verts = p.vertices
    if r.crs_mode == WGS84_DEGREES:
        ring_x, ring_y = verts[:, 0], verts[:, 1]
        ox = oy = 0.0
    else:
        # polygon -> raster meters, through the frame's scale anchored at the centroid
        g = LocalFrame(r.geo_origin[0], r.geo_origin[1])
        mlon = frame.meters_per_degree_lon
        ring_x = (verts[:, 0] - g.origin_lon) * mlon
        ring_y = (verts[:, 1] - g.origin_lat) * frame.meters_per_degree_lat
        ox = (frame.origin_lon - g.origin_lon) * mlon
        oy = (frame.origin_lat - g.origin_lat) * frame.meters_per_degree_lat

    cs = r.cellsize
    c0 = max(int(math.floor((ring_x.min() - r.origin[0]) / cs)), 0)
    c1 = min(int(math.ceil((ring_x.max() - r.origin[0]) / cs)), r.ncols)
    r0 = max(int(math.floor((ring_y.min() - r.origin[1]) / cs)), 0)
    r1 = min(int(math.ceil((ring_y.max() - r.origin[1]) / cs)), r.nrows)
    if c0 >= c1 or r0 >= r1:
        raise NoCoverageError()

    cx = r.origin[0] + (np.arange(c0, c1) + 0.5) * cs
    cy = r.origin[1] + (np.arange(r0, r1) + 0.5) * cs
    gx, gy = np.meshgrid(cx, cy)
    z = r.values[r0:r1, c0:c1]
    keep = points_in_ring(gx, gy, np.column_stack([ring_x, ring_y])) & (z != r.nodata)
    if not np.any(keep):
        raise NoCoverageError()

    if r.crs_mode == WGS84_DEGREES:
        x, y = frame.to_local(gx[keep], gy[keep])
    else:
        x, y = gx[keep] - ox, gy[keep] - oy
    return np.column_stack([x, y, z[keep]])
