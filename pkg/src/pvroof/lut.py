"""Spatial look-up table of average tilt per (lon cell, lat cell, surface category)."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_columns
from .exceptions import SchemaError
from .registry import AuxRegistry

logger = logging.getLogger(__name__)

DEFAULT_GRID = (50, 50)
DEFAULT_CATEGORIES = 4


class Bounds(NamedTuple):
    w: float
    s: float
    e: float
    n: float

    def contains(self, lon, lat):
        lon, lat = np.asarray(lon), np.asarray(lat)
        return (lon >= self.w) & (lon <= self.e) & (lat >= self.s) & (lat <= self.n)


class LookupResult(NamedTuple):
    tilt: float
    clamped: bool


def surface_category(surface, breakpoints):
    """Index of the half-open bin ``[low, high)`` holding each surface."""
    return np.searchsorted(np.asarray(breakpoints, dtype=float), surface, side="right")


def quantile_breakpoints(surfaces, n_categories):
    """Inner quantile edges at levels t/T (linear interpolation, type 7)."""
    if n_categories == 1:
        return np.empty(0)
    levels = np.arange(1, n_categories) / n_categories
    return np.quantile(np.asarray(surfaces, dtype=float), levels)


@dataclass(frozen=True, eq=False)
class TiltLUT:
    """Gridded tilt table.

    ``cells[k, l, t]`` is the tilt for longitude cell ``k``, latitude cell
    ``l`` and surface category ``t``. ``fill_mask`` is True for cells
    computed from registry samples and False for interpolated ones.
    """

    bounds: Bounds
    breakpoints: np.ndarray
    cells: np.ndarray
    fill_mask: np.ndarray

    def __post_init__(self):
        b = Bounds(*map(float, self.bounds))
        if not (b.w < b.e and b.s < b.n):
            raise ValueError(f"invalid bounds {tuple(b)}: need W < E and S < N")
        cells = np.asarray(self.cells, dtype=float)
        mask = np.asarray(self.fill_mask, dtype=bool)
        bps = np.asarray(self.breakpoints, dtype=float).ravel()
        if cells.ndim != 3 or min(cells.shape) < 1:
            raise ValueError("cells must be a non-empty K x L x T grid")
        if mask.shape != cells.shape:
            raise ValueError("fill_mask shape must match cells")
        if len(bps) != cells.shape[2] - 1:
            raise ValueError(f"expected {cells.shape[2] - 1} breakpoints, got {len(bps)}")
        if np.any(np.diff(bps) <= 0):
            raise ValueError("breakpoints must be strictly ascending")
        if not np.all(np.isfinite(cells)) or np.any((cells < 0) | (cells > 90)):
            raise ValueError("every cell value must lie in [0, 90]")
        for arr in (cells, mask, bps):
            arr.setflags(write=False)
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "fill_mask", mask)
        object.__setattr__(self, "breakpoints", bps)

    @property
    def shape(self):
        return self.cells.shape

    @property
    def k(self):
        return self.cells.shape[0]

    @property
    def l(self):  # noqa: E743
        return self.cells.shape[1]

    @property
    def t(self):
        return self.cells.shape[2]

    @property
    def fallback_categories(self):
        """Categories with no observed cell, filled with the registry mean."""
        return [t for t in range(self.t) if not self.fill_mask[:, :, t].any()]

    def __eq__(self, other):
        if not isinstance(other, TiltLUT):
            return NotImplemented
        return (
            self.bounds == other.bounds
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.cells, other.cells)
            and np.array_equal(self.fill_mask, other.fill_mask)
        )

    __hash__ = None

    def cell_index(self, lon, lat):
        """(k, l, clamped) for arrays of coordinates; out-of-bounds points clamp."""
        b = self.bounds
        fk = (np.asarray(lon, dtype=float) - b.w) / (b.e - b.w) * self.k
        fl = (np.asarray(lat, dtype=float) - b.s) / (b.n - b.s) * self.l
        clamped = (fk < 0) | (fk > self.k) | (fl < 0) | (fl > self.l)
        k = np.clip(np.floor(fk), 0, self.k - 1).astype(np.intp)
        l = np.clip(np.floor(fl), 0, self.l - 1).astype(np.intp)
        return k, l, clamped

    def lookup(self, lon, lat, surface):
        """Vectorized lookup; returns (tilts, clamped flags)."""
        k, l, clamped = self.cell_index(lon, lat)
        t = surface_category(surface, self.breakpoints)
        return self.cells[k, l, t], clamped

    def to_dict(self):
        b = self.bounds
        return {
            "bounds": {"e": b.e, "n": b.n, "w": b.w, "s": b.s},
            "k": self.k,
            "l": self.l,
            "t": self.t,
            "breakpoints": self.breakpoints.tolist(),
            "cells": self.cells.tolist(),
            "fill_mask": self.fill_mask.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise SchemaError("LUT document must be a JSON object")
        for key in ("bounds", "k", "l", "t", "breakpoints", "cells", "fill_mask"):
            if key not in doc:
                raise SchemaError(f"LUT document is missing field {key!r}", key)
        bounds = doc["bounds"]
        if not isinstance(bounds, dict) or any(c not in bounds for c in "enws"):
            raise SchemaError("field 'bounds' must hold e, n, w, s", "bounds")
        dims = {}
        for key in ("k", "l", "t"):
            v = doc[key]
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise SchemaError(f"field {key!r} must be a positive integer", key)
            dims[key] = v
        shape = (dims["k"], dims["l"], dims["t"])
        try:
            cells = np.asarray(doc["cells"], dtype=float)
        except (TypeError, ValueError):
            raise SchemaError("field 'cells' is not a numeric K x L x T array", "cells") from None
        if cells.shape != shape:
            raise SchemaError(f"field 'cells' has shape {cells.shape}, expected {shape}", "cells")
        mask = np.asarray(doc["fill_mask"])
        if mask.shape != shape or mask.dtype != bool:
            raise SchemaError(f"field 'fill_mask' must be a boolean array of shape {shape}", "fill_mask")
        try:
            bps = np.asarray(doc["breakpoints"], dtype=float)
        except (TypeError, ValueError):
            raise SchemaError("field 'breakpoints' must be numeric", "breakpoints") from None
        if bps.shape != (shape[2] - 1,):
            raise SchemaError(f"field 'breakpoints' must hold {shape[2] - 1} values", "breakpoints")
        try:
            return cls(Bounds(bounds["w"], bounds["s"], bounds["e"], bounds["n"]), bps, cells, mask)
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc)) from exc


def save_lut(lut: TiltLUT, fp=None):
    """Serialize to JSON. Returns the text; also writes it to ``fp`` if given."""
    text = json.dumps(lut.to_dict(), separators=(",", ":"), sort_keys=True) + "\n"
    if fp is not None:
        if hasattr(fp, "write"):
            fp.write(text)
        else:
            with open(fp, "w", encoding="utf-8") as fh:
                fh.write(text)
    return text


def load_lut(source) -> TiltLUT:
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (bytes, bytearray)) or (isinstance(source, str) and source.lstrip().startswith("{")):
        text = source
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"LUT is not valid JSON: {exc.msg}") from exc
    return TiltLUT.from_dict(doc)


def fill_grid(grid):
    """Fill NaN cells of a 2-D grid by iterated 4-neighbour averaging.

    Each pass computes the mean of the already-filled neighbours for every
    fillable cell, then commits all of them at once, so the result does
    not depend on traversal order. The grid must hold at least one value.
    """
    g = np.array(grid, dtype=float)
    while True:
        missing = np.isnan(g)
        if not missing.any():
            return g
        known = np.where(missing, 0.0, g)
        have = (~missing).astype(float)
        total = np.zeros_like(g)
        count = np.zeros_like(g)
        total[1:, :] += known[:-1, :]
        count[1:, :] += have[:-1, :]
        total[:-1, :] += known[1:, :]
        count[:-1, :] += have[1:, :]
        total[:, 1:] += known[:, :-1]
        count[:, 1:] += have[:, :-1]
        total[:, :-1] += known[:, 1:]
        count[:, :-1] += have[:, 1:]
        fillable = missing & (count > 0)
        if not fillable.any():
            raise ValueError("grid has no seed value to propagate")
        g[fillable] = total[fillable] / count[fillable]


def _build(lon, lat, surface, tilt, n_lon, n_lat, n_categories, bounds):
    if not len(tilt):
        raise ValueError("registry is empty")
    if min(n_lon, n_lat, n_categories) < 1:
        raise ValueError("grid dimensions K, L, T must be >= 1")
    if bounds is None:
        bounds = Bounds(lon.min(), lat.min(), lon.max(), lat.max())
    bounds = Bounds(*map(float, bounds))
    if not (bounds.w < bounds.e and bounds.s < bounds.n):
        raise ValueError(f"invalid bounds {tuple(bounds)}: need W < E and S < N")
    inside = bounds.contains(lon, lat)
    dropped = int(np.sum(~inside))
    if dropped:
        logger.warning("dropped %d registry row(s) outside the LUT bounds", dropped)
    if not inside.any():
        raise ValueError("no registry rows inside the LUT bounds")
    lon, lat, surface, tilt = lon[inside], lat[inside], surface[inside], tilt[inside]

    breakpoints = quantile_breakpoints(surface, n_categories)
    if np.any(np.diff(breakpoints) <= 0):
        raise ValueError(
            "surface quantile breakpoints are not strictly ascending "
            f"({breakpoints.tolist()}); use fewer surface categories"
        )
    fk = (lon - bounds.w) / (bounds.e - bounds.w) * n_lon
    fl = (lat - bounds.s) / (bounds.n - bounds.s) * n_lat
    k = np.clip(np.floor(fk), 0, n_lon - 1).astype(np.intp)
    l = np.clip(np.floor(fl), 0, n_lat - 1).astype(np.intp)
    t = surface_category(surface, breakpoints)

    shape = (n_lon, n_lat, n_categories)
    flat = np.ravel_multi_index((k, l, t), shape)
    sums = np.bincount(flat, weights=tilt, minlength=np.prod(shape)).reshape(shape)
    counts = np.bincount(flat, minlength=np.prod(shape)).reshape(shape)
    observed = counts > 0
    cells = np.full(shape, np.nan)
    cells[observed] = sums[observed] / counts[observed]

    global_mean = float(np.mean(tilt))
    for c in range(n_categories):
        if observed[:, :, c].any():
            cells[:, :, c] = fill_grid(cells[:, :, c])
        else:
            logger.warning("surface category %d has no samples; using registry mean tilt", c)
            cells[:, :, c] = global_mean
    lut = TiltLUT(bounds, breakpoints, cells, observed)
    logger.info("LUT built: %d observed cells, %d interpolated", observed.sum(), (~observed).sum())
    return lut, dropped


class LUTTiltRegressor(RegressorMixin, BaseEstimator):
    """Tilt regressor backed by a spatial look-up table.

    ``X`` columns are (longitude, latitude, projected surface); ``y`` is
    the tilt in degrees.

    Parameters
    ----------
    n_lon, n_lat : int, default=50
        Number of longitude / latitude intervals.
    n_categories : int, default=4
        Number of surface categories, split at surface quantiles.
    bounds : (W, S, E, N) or None
        Spatial extent in degrees; defaults to the training data extent.
    """

    def __init__(self, n_lon=50, n_lat=50, n_categories=4, bounds=None):
        self.n_lon = n_lon
        self.n_lat = n_lat
        self.n_categories = n_categories
        self.bounds = bounds

    def fit(self, X, y):
        X = check_columns(X, 3)
        y = np.asarray(y, dtype=float).ravel()
        if len(y) != len(X):
            raise ValueError(f"X has {len(X)} rows but y has {len(y)}")
        self.lut_, self.n_dropped_ = _build(
            X[:, 0], X[:, 1], X[:, 2], y, self.n_lon, self.n_lat, self.n_categories, self.bounds
        )
        self.n_features_in_ = 3
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_columns(X, 3)
        return self.lut_.lookup(X[:, 0], X[:, 1], X[:, 2])[0]

    @classmethod
    def from_lut(cls, lut: TiltLUT):
        """Wrap a precomputed table as a fitted estimator."""
        est = cls(n_lon=lut.k, n_lat=lut.l, n_categories=lut.t, bounds=tuple(lut.bounds))
        est.lut_, est.n_dropped_, est.n_features_in_ = lut, 0, 3
        return est


def build_lut(aux: AuxRegistry, K=50, L=50, T=4, bounds=None) -> TiltLUT:
    """Build the tilt table from a registry (see :class:`LUTTiltRegressor`)."""
    return _build(aux.lon, aux.lat, aux.surface, aux.tilt, K, L, T, bounds)[0]


def lookup_tilt(lut: TiltLUT, lon, lat, projected_surface) -> LookupResult:
    tilts, clamped = lut.lookup([lon], [lat], [projected_surface])
    return LookupResult(float(tilts[0]), bool(clamped[0]))
