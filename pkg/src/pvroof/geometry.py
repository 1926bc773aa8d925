"""Polygon geometry on a local equirectangular frame.

Rooftop polygons span a few tens of meters, so every metric computation
(centroid, area, enclosing rectangle, point-in-polygon) is done after
mapping lon/lat degrees to meters with a tangent equirectangular frame
anchored near the polygon.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .exceptions import DegenerateGeometryError, ParseError

logger = logging.getLogger(__name__)

EARTH_RADIUS = 6378137.0
METERS_PER_DEGREE_LAT = EARTH_RADIUS * math.pi / 180.0

# Relative tolerance on |area| / extent**2 under which a ring counts as flat.
_DEGENERATE_RTOL = 1e-10
_TIE_RTOL = 1e-9


def normalize_azimuth(angle):
    """Wrap an angle in degrees to (-180, 180]."""
    a = math.fmod(float(angle), 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def bearing(east, north):
    """Compass bearing (clockwise from North, degrees) of a planar vector."""
    return math.degrees(math.atan2(east, north))


def axial_orientation(east, north):
    """Orientation of an undirected line in [0, 180), clockwise from North."""
    o = bearing(east, north) % 180.0
    if o >= 180.0 - 1e-9:
        o = 0.0
    return o


@dataclass(frozen=True)
class PVPolygon:
    """A geolocalized PV installation outline.

    ``exterior`` is a closed ring of (longitude, latitude) pairs in WGS84
    degrees: the first vertex is repeated at the end.
    """

    id: str
    exterior: tuple[tuple[float, float], ...]
    properties: dict[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def from_coords(cls, id, coords, properties=None, validate=True):
        """Build a polygon from an open or closed vertex sequence.

        Consecutive duplicate vertices are collapsed and the ring is closed.
        With ``validate`` the invariants are checked and a
        :class:`DegenerateGeometryError` is raised on violation.
        """
        ring = []
        for v in coords:
            if len(v) < 2:
                raise DegenerateGeometryError(f"polygon {id!r}: vertex {v!r} has fewer than 2 coordinates")
            pt = (float(v[0]), float(v[1]))
            if not ring or ring[-1] != pt:
                ring.append(pt)
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring.pop()
        if ring:
            ring.append(ring[0])
        poly = cls(str(id), tuple(ring), dict(properties or {}))
        if validate:
            poly.validate()
        return poly

    @property
    def vertices(self):
        """Distinct vertices as an ``(n, 2)`` array (closing vertex dropped)."""
        return np.asarray(self.exterior[:-1], dtype=float).reshape(-1, 2)

    def validate(self):
        pts = self.vertices
        if len(pts) < 3 or len({tuple(p) for p in pts}) < 3:
            raise DegenerateGeometryError(f"polygon {self.id!r}: fewer than 3 distinct vertices")
        if not np.all(np.isfinite(pts)):
            raise DegenerateGeometryError(f"polygon {self.id!r}: non-finite coordinate")
        if np.any(np.abs(pts[:, 0]) > 180.0) or np.any(np.abs(pts[:, 1]) > 90.0):
            raise DegenerateGeometryError(f"polygon {self.id!r}: coordinate outside WGS84 range")
        if ring_self_intersects(pts):
            raise DegenerateGeometryError(f"polygon {self.id!r}: self-intersecting ring")
        return self


class PolygonList(list):
    """List of :class:`PVPolygon` carrying the parser's diagnostics.

    Attributes
    ----------
    skipped : list of (feature id, reason)
    holes_ignored : int
        Number of interior rings discarded.
    """

    def __init__(self, items=(), skipped=None, holes_ignored=0):
        super().__init__(items)
        self.skipped = list(skipped or [])
        self.holes_ignored = holes_ignored


def _decode(document):
    if isinstance(document, (bytes, bytearray)):
        try:
            return bytes(document).decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise ParseError(f"invalid UTF-8: {exc.reason}", offset=exc.start) from exc
    if hasattr(document, "read"):
        return _decode(document.read())
    return str(document)


def parse_polygons(document, keep_invalid=False):
    """Parse a GeoJSON FeatureCollection into PV polygons.

    Parameters
    ----------
    document : bytes, str or binary file object
    keep_invalid : bool
        Keep polygons that fail validation (degenerate, self-intersecting)
        in the list, unvalidated, so downstream code can report them per
        record. They are still listed in ``skipped``.

    Returns
    -------
    PolygonList
        One polygon per Polygon feature and per MultiPolygon part (ids
        suffixed ``#0``, ``#1``, ...). Invalid features are listed in
        ``skipped`` instead of raising.
    """
    text = _decode(document)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", offset=offset) from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("document is not a GeoJSON FeatureCollection")
    features = doc.get("features")
    if not isinstance(features, list):
        raise ParseError("FeatureCollection has no 'features' array")

    out = PolygonList()
    for index, feat in enumerate(features):
        if not isinstance(feat, dict):
            out.skipped.append((f"feat-{index}", "feature is not an object"))
            continue
        props = feat.get("properties") or {}
        if not isinstance(props, dict):
            props = {}
        fid = feat.get("id")
        if fid is None:
            fid = props.get("id")
        fid = f"feat-{index}" if fid is None else str(fid)

        geom = feat.get("geometry") or {}
        gtype = geom.get("type") if isinstance(geom, dict) else None
        coords = geom.get("coordinates") if isinstance(geom, dict) else None
        if gtype == "Polygon":
            parts = [(fid, coords)]
        elif gtype == "MultiPolygon" and isinstance(coords, list):
            parts = [(f"{fid}#{i}", c) for i, c in enumerate(coords)]
        else:
            out.skipped.append((fid, f"unsupported geometry type {gtype!r}"))
            continue

        for pid, rings in parts:
            if not isinstance(rings, list) or not rings:
                out.skipped.append((pid, "polygon has no exterior ring"))
                continue
            out.holes_ignored += len(rings) - 1
            try:
                out.append(PVPolygon.from_coords(pid, rings[0], props))
            except (DegenerateGeometryError, TypeError, ValueError) as exc:
                out.skipped.append((pid, str(exc)))
                if keep_invalid:
                    try:
                        out.append(PVPolygon.from_coords(pid, rings[0], props, validate=False))
                    except (DegenerateGeometryError, TypeError, ValueError):
                        pass
    if out.holes_ignored:
        logger.warning("ignored %d interior ring(s)", out.holes_ignored)
    for pid, reason in out.skipped:
        logger.warning("invalid feature %s: %s", pid, reason)
    return out


@dataclass(frozen=True)
class LocalFrame:
    """Equirectangular tangent frame: meters east/north of ``origin``."""

    origin_lon: float
    origin_lat: float

    @property
    def meters_per_degree_lat(self):
        return METERS_PER_DEGREE_LAT

    @property
    def meters_per_degree_lon(self):
        return METERS_PER_DEGREE_LAT * math.cos(math.radians(self.origin_lat))

    def to_local(self, lon, lat):
        x = (np.asarray(lon, dtype=float) - self.origin_lon) * self.meters_per_degree_lon
        y = (np.asarray(lat, dtype=float) - self.origin_lat) * self.meters_per_degree_lat
        return x, y

    def to_geo(self, x, y):
        lon = self.origin_lon + np.asarray(x, dtype=float) / self.meters_per_degree_lon
        lat = self.origin_lat + np.asarray(y, dtype=float) / self.meters_per_degree_lat
        return lon, lat


def ring_signed_area(xy):
    """Shoelace signed area of an open ring (counter-clockwise positive)."""
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _is_flat(xy, area):
    extent = float(np.max(np.ptp(xy, axis=0))) if len(xy) else 0.0
    return extent == 0.0 or abs(area) <= _DEGENERATE_RTOL * extent * extent


class Centroid(NamedTuple):
    lon: float
    lat: float
    degenerate: bool = False


def centroid(p: PVPolygon) -> Centroid:
    """Area-weighted centroid in degrees; vertex mean for zero-area rings."""
    pts = p.vertices
    mean = pts.mean(axis=0)
    frame = LocalFrame(float(mean[0]), float(mean[1]))
    x, y = frame.to_local(pts[:, 0], pts[:, 1])
    xy = np.column_stack([x, y])
    area = ring_signed_area(xy)
    if _is_flat(xy, area):
        return Centroid(float(mean[0]), float(mean[1]), True)
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    lon, lat = frame.to_geo(cx, cy)
    return Centroid(float(lon), float(lat), False)


def polygon_frame(p: PVPolygon) -> LocalFrame:
    c = centroid(p)
    return LocalFrame(c.lon, c.lat)


def local_ring(p: PVPolygon, frame: LocalFrame | None = None):
    """Distinct vertices of ``p`` in meters (default frame: its centroid)."""
    frame = frame or polygon_frame(p)
    pts = p.vertices
    x, y = frame.to_local(pts[:, 0], pts[:, 1])
    return np.column_stack([x, y])


def is_degenerate(p: PVPolygon) -> bool:
    xy = local_ring(p)
    return _is_flat(xy, ring_signed_area(xy))


def projected_surface(p: PVPolygon) -> float:
    """Planimetric area in m^2, from the shoelace formula in the centroid frame.

    Zero-area rings yield ``0.0``; use :func:`is_degenerate` for the flag.
    """
    xy = local_ring(p)
    area = ring_signed_area(xy)
    if _is_flat(xy, area):
        return 0.0
    return abs(area)


def points_in_ring(px, py, ring):
    """Even-odd point-in-polygon test, vectorized over the query points.

    ``ring`` is an ``(n, 2)`` array of vertices (closed or open).
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    ring = np.asarray(ring, dtype=float)
    inside = np.zeros(np.broadcast(px, py).shape, dtype=bool)
    x0, y0 = ring[:, 0], ring[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for xa, ya, xb, yb in zip(x0, y0, x1, y1):
        if ya == yb:
            continue
        crosses = (ya > py) != (yb > py)
        x_at = xa + (py - ya) * (xb - xa) / (yb - ya)
        inside ^= crosses & (px < x_at)
    return inside


def _orient(ax, ay, bx, by, cx, cy):
    return np.sign((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def ring_self_intersects(pts) -> bool:
    """True if two non-adjacent edges of the open ring ``pts`` touch."""
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    if n < 4:
        return False
    a = pts
    b = np.roll(pts, -1, axis=0)
    for i in range(n - 2):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if not len(j):
            continue
        p, q = a[i], b[i]
        r, s = a[j], b[j]
        o1 = _orient(p[0], p[1], q[0], q[1], r[:, 0], r[:, 1])
        o2 = _orient(p[0], p[1], q[0], q[1], s[:, 0], s[:, 1])
        o3 = _orient(r[:, 0], r[:, 1], s[:, 0], s[:, 1], p[0], p[1])
        o4 = _orient(r[:, 0], r[:, 1], s[:, 0], s[:, 1], q[0], q[1])
        if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
            return True

        def on_seg(ax, ay, bx, by, cx, cy):
            return (np.minimum(ax, bx) <= cx) & (cx <= np.maximum(ax, bx)) & \
                   (np.minimum(ay, by) <= cy) & (cy <= np.maximum(ay, by))

        touch = (
            ((o1 == 0) & on_seg(p[0], p[1], q[0], q[1], r[:, 0], r[:, 1]))
            | ((o2 == 0) & on_seg(p[0], p[1], q[0], q[1], s[:, 0], s[:, 1]))
            | ((o3 == 0) & on_seg(r[:, 0], r[:, 1], s[:, 0], s[:, 1], p[0], p[1]))
            | ((o4 == 0) & on_seg(r[:, 0], r[:, 1], s[:, 0], s[:, 1], q[0], q[1]))
        )
        if np.any(touch):
            return True
    return False


def convex_hull(points):
    """Counter-clockwise convex hull (monotone chain), collinear points dropped."""
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).tolist())))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float).reshape(-1, 2)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for pt in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], pt) <= 0:
            lower.pop()
        lower.append(pt)
    for pt in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], pt) <= 0:
            upper.pop()
        upper.append(pt)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


@dataclass(frozen=True)
class RotatedRect:
    """Minimum-area enclosing rectangle in a local metric frame.

    ``orientation`` is the direction of the long side, degrees clockwise
    from North in [0, 180).
    """

    center: tuple[float, float]
    half_extents: tuple[float, float]
    orientation: float

    @property
    def long_side(self):
        return 2.0 * self.half_extents[0]

    @property
    def short_side(self):
        return 2.0 * self.half_extents[1]

    @property
    def area(self):
        return self.long_side * self.short_side

    @property
    def is_square(self):
        return self.long_side - self.short_side <= 1e-9 * max(self.long_side, 1.0)

    def corners(self):
        t = math.radians(self.orientation)
        u = np.array([math.sin(t), math.cos(t)])
        v = np.array([math.cos(t), -math.sin(t)])
        c = np.asarray(self.center)
        hl, hs = self.half_extents
        return np.array([c + su * hl * u + sv * hs * v for su, sv in ((1, 1), (-1, 1), (-1, -1), (1, -1))])


def min_area_rect(points) -> RotatedRect:
    """Rotating-calipers minimum-area rectangle of planar points (meters)."""
    hull = convex_hull(points)
    if len(hull) < 3 or _is_flat(hull, ring_signed_area(hull)):
        raise DegenerateGeometryError()
    best = None
    for i in range(len(hull)):
        d = hull[(i + 1) % len(hull)] - hull[i]
        u = d / math.hypot(d[0], d[1])
        v = np.array([-u[1], u[0]])
        pu, pv = hull @ u, hull @ v
        wu, wv = float(pu.max() - pu.min()), float(pv.max() - pv.min())
        area = wu * wv
        ou, ov = axial_orientation(u[0], u[1]), axial_orientation(v[0], v[1])
        if abs(wu - wv) <= _TIE_RTOL * max(wu, wv):
            orient = min(ou, ov)
        else:
            orient = ou if wu > wv else ov
        long_, short = max(wu, wv), min(wu, wv)
        mid_u = 0.5 * (pu.max() + pu.min())
        mid_v = 0.5 * (pv.max() + pv.min())
        center = mid_u * u + mid_v * v
        cand = (area, orient, long_, short, center)
        if best is None:
            best = cand
            continue
        if area < best[0] * (1.0 - _TIE_RTOL):
            best = cand
        elif area <= best[0] * (1.0 + _TIE_RTOL) and orient < best[1]:
            best = cand
    _, orient, long_, short, center = best
    return RotatedRect((float(center[0]), float(center[1])), (long_ / 2.0, short / 2.0), orient)


def min_rotated_rect(p: PVPolygon) -> RotatedRect:
    """Minimum rotated rectangle of ``p`` in its centroid frame."""
    return min_area_rect(local_ring(p))
