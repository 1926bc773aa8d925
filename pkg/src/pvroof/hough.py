"""Azimuth (and tilt) from line orientations in the installation mask.

The polygon is rasterized, its edges are extracted with a Canny detector
and thickened by a 5x5 dilation, line segments are found with a
progressive probabilistic Hough transform, and segment lengths are
accumulated per 1-degree orientation bin. The two dominant orientations
(at least 40 degrees apart) are optionally disambiguated with DSM
altitudes.

Pixel grids use image convention: row 0 is the northern edge, columns
grow eastwards. Angles are compass orientations of undirected lines in
[0, 180), clockwise from North.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .exceptions import DegenerateGeometryError, NoLinesError
from .geometry import PVPolygon, axial_orientation, bearing, is_degenerate, local_ring, normalize_azimuth, points_in_ring
from .plane import OrientationEstimate


@dataclass(frozen=True)
class HoughParams:
    pixel_size: float = 0.2
    pad: int = 4
    sigma: float = 1.0
    low_threshold: float = 50.0
    high_threshold: float = 150.0
    dilation: int = 5
    rho: float = 1.0
    theta: float = 1.0
    votes: int = 10
    min_line_length: float = 5.0
    max_line_gap: int = 3
    min_separation: float = 40.0
    bin_window: int = 1
    seed: int = 0
    min_drop: float = 0.05


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean raster. ``origin`` is the local-frame (x, y) of pixel (0, 0)'s center."""

    bits: np.ndarray
    pixel_size: float
    origin: tuple[float, float] = (0.0, 0.0)
    thin: np.ndarray | None = field(default=None, repr=False)

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    def __eq__(self, other):
        return isinstance(other, BinaryMask) and np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class HoughLine:
    angle: float
    length: float
    start: tuple[int, int] = (0, 0)
    end: tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class DominantAngles:
    primary: float
    secondary: float
    secondary_fallback: bool = False
    lines: tuple[HoughLine, ...] = field(default=(), repr=False)
    histogram: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __iter__(self):
        return iter((self.primary, self.secondary))


def ring_mask(ring, pixel_size=0.2, pad=4):
    """Rasterize a metric ring: a pixel is set iff its center is inside."""
    ring = np.asarray(ring, dtype=float)
    xmin, ymin = ring.min(axis=0)
    xmax, ymax = ring.max(axis=0)
    nx = max(int(math.ceil((xmax - xmin) / pixel_size - 1e-9)), 1) + 2 * pad
    ny = max(int(math.ceil((ymax - ymin) / pixel_size - 1e-9)), 1) + 2 * pad
    x0 = xmin - (pad - 0.5) * pixel_size
    y0 = ymax + (pad - 0.5) * pixel_size
    xs = x0 + np.arange(nx) * pixel_size
    ys = y0 - np.arange(ny) * pixel_size
    gx, gy = np.meshgrid(xs, ys)
    bits = points_in_ring(gx, gy, ring)
    return BinaryMask(bits, pixel_size, (float(x0), float(y0)))


def rasterize_mask(p: PVPolygon, pixel_size=0.2, pad=4) -> BinaryMask:
    if is_degenerate(p):
        raise DegenerateGeometryError()
    mask = ring_mask(local_ring(p), pixel_size, pad)
    if not mask.bits.any():
        raise DegenerateGeometryError("polygon rasterizes to an empty mask")
    return mask


def canny(image, sigma=1.0, low=50.0, high=150.0):
    """Canny edge detector on a float image (0-255 scale).

    Gaussian smoothing, Sobel gradients (L2 magnitude, unnormalized),
    non-maximum suppression over four direction sectors, and hysteresis
    with 8-connectivity. Pixels outside the image are treated as 0.
    """
    img = np.asarray(image, dtype=float)
    if sigma > 0:
        img = ndimage.gaussian_filter(img, sigma, mode="constant", cval=0.0)
    gx = ndimage.sobel(img, axis=1, mode="constant", cval=0.0)
    gy = ndimage.sobel(img, axis=0, mode="constant", cval=0.0)
    mag = np.hypot(gx, gy)

    p = np.pad(mag, 1)
    h, w = mag.shape
    c = p[1:-1, 1:-1]

    def at(dy, dx):
        return p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]

    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    sector = (np.floor((ang + 22.5) / 45.0).astype(int)) % 4
    n1 = np.choose(sector, [at(0, 1), at(1, 1), at(1, 0), at(1, -1)])
    n2 = np.choose(sector, [at(0, -1), at(-1, -1), at(-1, 0), at(-1, 1)])
    nms = (c > 0) & (c >= n1) & (c > n2)

    weak = nms & (mag >= low)
    strong = nms & (mag >= high)
    labels, n = ndimage.label(weak, structure=np.ones((3, 3)))
    if n == 0:
        return np.zeros_like(weak)
    keep = np.zeros(n + 1, dtype=bool)
    keep[np.unique(labels[strong])] = True
    keep[0] = False
    return keep[labels]


def edge_map(m: BinaryMask, params: HoughParams = HoughParams()) -> BinaryMask:
    edges = canny(m.bits.astype(float) * 255.0, params.sigma, params.low_threshold, params.high_threshold)
    thin = edges
    if params.dilation > 1:
        edges = ndimage.binary_dilation(thin, structure=np.ones((params.dilation, params.dilation), dtype=bool))
    return BinaryMask(edges, m.pixel_size, m.origin, thin)


def _walk(mask, x0, y0, dx, dy, max_gap):
    """Follow the line from (x0, y0) while gaps stay within ``max_gap``.

    Returns the list of visited set pixels (excluding the start) and the
    last set pixel reached.
    """
    h, w = mask.shape
    end = (x0, y0)
    hits = []
    gap = 0
    k = 1
    while True:
        x = int(round(x0 + k * dx))
        y = int(round(y0 + k * dy))
        if not (0 <= x < w and 0 <= y < h):
            break
        if mask[y, x]:
            gap = 0
            end = (x, y)
            hits.append((x, y))
        else:
            gap += 1
            if gap > max_gap:
                break
        k += 1
    return hits, end


def refine_angle(thin, start, end, half_width, trim=None, iterations=2):
    """Orientation of the thin-edge pixels supporting a segment.

    Pixels of ``thin`` within ``half_width`` of the segment and at least
    ``trim`` pixels from either end (corners carry the adjacent side) are
    fitted with a total-least-squares line; the corridor is then re-centred
    on the fitted line and the fit repeated. Returns ``None`` when fewer
    than 3 pixels qualify.
    """
    trim = half_width if trim is None else trim
    ys, xs = np.nonzero(thin)
    pts = np.column_stack([xs, ys]).astype(float)
    origin = np.asarray(start, dtype=float)
    d = np.asarray(end, dtype=float) - origin
    length = math.hypot(*d)
    if length == 0:
        return None
    u = d / length
    angle = None
    for _ in range(iterations):
        rel = pts - origin
        along = rel @ u
        across = rel @ np.array([-u[1], u[0]])
        sel = (np.abs(across) <= half_width) & (along >= trim) & (along <= length - trim)
        if sel.sum() < 3:
            sel = (np.abs(across) <= half_width) & (along >= 0) & (along <= length)
        if sel.sum() < 3:
            break
        sub = pts[sel]
        centre = sub.mean(axis=0)
        _, _, vt = np.linalg.svd(sub - centre, full_matrices=False)
        v = vt[0] if vt[0] @ u >= 0 else -vt[0]
        angle = axial_orientation(v[0], -v[1])
        # re-centre the corridor on the fitted line, keeping the segment extent
        origin = centre + ((origin - centre) @ v) * v
        u = v
    return angle


def hough_segments(edges, params: HoughParams = HoughParams(), thin=None):
    """Progressive probabilistic Hough transform.

    Edge pixels are visited in a seeded random order; each casts votes in
    the (rho, theta) accumulator. Once a pixel's best bin reaches
    ``votes``, the line through it at that angle is followed in both
    directions (tolerating ``max_line_gap`` missing pixels), its pixels
    are removed and their votes withdrawn, and the segment is kept if its
    extent reaches ``min_line_length``.

    With ``thin`` (the undilated edge map) each segment's angle is refined
    by :func:`refine_angle`; otherwise it is taken from its end points.
    """
    edges = np.asarray(edges, dtype=bool)
    h, w = edges.shape
    thetas = np.radians(np.arange(0.0, 180.0, params.theta))
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    diag = int(math.ceil(math.hypot(h, w) / params.rho))
    accum = np.zeros((2 * diag + 1, len(thetas)), dtype=np.int32)
    cols = np.arange(len(thetas))

    def rho_index(x, y):
        return np.round((x * cos_t + y * sin_t) / params.rho).astype(int) + diag

    ys, xs = np.nonzero(edges)
    order = np.random.default_rng(params.seed).permutation(len(xs))
    mask = edges.copy()
    voted = np.zeros_like(edges)
    segments = []

    for idx in order:
        x, y = int(xs[idx]), int(ys[idx])
        if not mask[y, x]:
            continue
        r = rho_index(x, y)
        accum[r, cols] += 1
        voted[y, x] = True
        votes = accum[r, cols]
        best = int(np.argmax(votes))
        if votes[best] < params.votes:
            continue

        # line direction is perpendicular to the normal (cos t, sin t)
        dx, dy = -sin_t[best], cos_t[best]
        step = max(abs(dx), abs(dy))
        dx, dy = dx / step, dy / step
        fwd, end1 = _walk(mask, x, y, dx, dy, params.max_line_gap)
        bwd, end0 = _walk(mask, x, y, -dx, -dy, params.max_line_gap)
        good = max(abs(end1[0] - end0[0]), abs(end1[1] - end0[1])) >= params.min_line_length

        for px, py in [(x, y)] + fwd + bwd:
            if good and voted[py, px]:
                accum[rho_index(px, py), cols] -= 1
                voted[py, px] = False
            mask[py, px] = False
        if good:
            east, north = end1[0] - end0[0], end0[1] - end1[1]
            angle = None
            if thin is not None:
                angle = refine_angle(thin, end0, end1, params.dilation / 2.0 + 0.5)
            if angle is None:
                angle = axial_orientation(east, north)
            segments.append(HoughLine(angle, math.hypot(east, north), end0, end1))
    return segments


def _circular_gap(a, b, period=180.0):
    d = abs(a - b) % period
    return min(d, period - d)


def dominant_angles(edges: BinaryMask, params: HoughParams = HoughParams()) -> DominantAngles:
    """Two dominant line orientations by cumulated segment length per 1-degree bin."""
    if isinstance(edges, BinaryMask):
        lines = hough_segments(edges.bits, params, edges.thin)
    else:
        lines = hough_segments(np.asarray(edges, dtype=bool), params)
    if not lines:
        raise NoLinesError()
    hist = np.zeros(180)
    for ln in lines:
        hist[int(round(ln.angle)) % 180] += ln.length
    # peaks are picked on a circular window sum so a side whose refined
    # angles straddle two bins is not outvoted by a side that falls in one
    score = sum(np.roll(hist, s) for s in range(-params.bin_window, params.bin_window + 1))
    primary = _peak(score, hist)
    far = np.array([_circular_gap(primary, b) >= params.min_separation for b in range(180)])
    candidates = np.where(far & (hist > 0), score, -1.0)
    if candidates.max() <= 0:
        return DominantAngles(float(primary), float((primary + 90) % 180), True, tuple(lines), hist)
    return DominantAngles(float(primary), float(_peak(candidates, hist)), False, tuple(lines), hist)


def _peak(score, hist):
    # window sums tie across neighbouring bins; the bin holding most length wins
    top = np.flatnonzero(score == score.max())
    return int(top[np.argmax(hist[top])])


def _split(samples, orientation):
    xy, z = samples[:, :2], samples[:, 2]
    t = math.radians(orientation)
    normal = np.array([math.cos(t), -math.sin(t)])
    side = (xy - xy.mean(axis=0)) @ normal
    pos, neg = side > 0, side < 0
    if not pos.any() or not neg.any():
        return 0.0, 0.0, normal, 0.0
    drop = float(z[pos].mean() - z[neg].mean())
    dist = float(np.linalg.norm(xy[pos].mean(axis=0) - xy[neg].mean(axis=0)))
    return abs(drop), drop, normal, dist


def disambiguate_with_dsm(primary, secondary, samples, min_drop=0.05) -> OrientationEstimate:
    """Pick the candidate line whose two sides differ most in mean altitude.

    The panel faces the lower side; the tilt is the arctangent of the
    altitude drop over the distance between the two sides' centroids.
    """
    pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    if len(pts) < 10:
        raise ValueError(f"need at least 10 altitude samples, got {len(pts)}")
    best = None
    for cand in (primary, secondary):
        mag, drop, normal, dist = _split(pts, cand)
        if best is None or mag > best[0]:
            best = (mag, drop, normal, dist, cand)
    mag, drop, normal, dist, cand = best
    tilt = math.degrees(math.atan2(mag, dist)) if dist > 0 else 0.0
    if mag < min_drop:
        return OrientationEstimate(tilt, None, "hough-dsm", ("flat",))
    down = -normal if drop > 0 else normal
    azimuth = normalize_azimuth(bearing(down[0], down[1]))
    return OrientationEstimate(tilt, azimuth, "hough-dsm", (f"line={cand:g}",))


def write_debug(edges: BinaryMask, lines, pgm_path, csv_path=None):
    """Dump the edge map as a binary PGM and the segments as CSV (angle, length)."""
    img = np.where(edges.bits, 255, 0).astype(np.uint8)
    for ln in lines:
        (x0, y0), (x1, y1) = ln.start, ln.end
        n = max(abs(x1 - x0), abs(y1 - y0), 1)
        for k in range(n + 1):
            img[round(y0 + (y1 - y0) * k / n), round(x0 + (x1 - x0) * k / n)] = 128
    with open(pgm_path, "wb") as fh:
        fh.write(f"P5\n{edges.width} {edges.height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["angle", "length"])
            for ln in lines:
                w.writerow([f"{ln.angle:.6f}", f"{ln.length:.6f}"])
