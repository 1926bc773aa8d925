"""Auxiliary PV registry: a sample of installations with known characteristics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParseError

AUX_COLUMNS = ("id", "lat", "lon", "tilt", "azimuth", "surface", "kwp")
_REQUIRED = ("id", "lat", "lon", "tilt", "surface")


@dataclass(frozen=True, eq=False)
class AuxRegistry:
    """Column-oriented registry. Missing azimuth / kwp values are NaN."""

    ids: tuple[str, ...]
    lat: np.ndarray
    lon: np.ndarray
    tilt: np.ndarray
    surface: np.ndarray
    azimuth: np.ndarray | None = None
    kwp: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.ids)
        for name in ("lat", "lon", "tilt", "surface", "azimuth", "kwp"):
            col = getattr(self, name)
            if col is None:
                col = np.full(n, np.nan)
            col = np.asarray(col, dtype=float).ravel()
            if len(col) != n:
                raise ValueError(f"column {name!r} has {len(col)} rows, expected {n}")
            col.setflags(write=False)
            object.__setattr__(self, name, col)
        if np.any(~np.isfinite(self.lat) | (np.abs(self.lat) > 90)):
            raise ValueError("column 'lat' must hold valid latitudes")
        if np.any(~np.isfinite(self.lon) | (np.abs(self.lon) > 180)):
            raise ValueError("column 'lon' must hold valid longitudes")
        if np.any(~np.isfinite(self.tilt) | (self.tilt < 0) | (self.tilt > 90)):
            raise ValueError("column 'tilt' must lie in [0, 90]")
        if np.any(~np.isfinite(self.surface) | (self.surface <= 0)):
            raise ValueError("column 'surface' must be > 0")

    def __len__(self):
        return len(self.ids)

    @classmethod
    def from_rows(cls, rows):
        """Build from ``(lat, lon, tilt, surface[, kwp])`` tuples; ids are row indices."""
        rows = [tuple(r) for r in rows]
        cols = list(zip(*rows)) if rows else [(), (), (), ()]
        kwp = cols[4] if len(cols) > 4 else None
        return cls(
            ids=tuple(str(i) for i in range(len(rows))),
            lat=cols[0], lon=cols[1], tilt=cols[2], surface=cols[3], kwp=kwp,
        )

    def has_kwp(self):
        return bool(np.any(np.isfinite(self.kwp)))


def _number(value, column, line, optional=False):
    value = value.strip()
    if value == "":
        if optional:
            return math.nan
        raise ParseError(f"empty value in column {column!r}", line=line)
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"non-numeric value {value!r} in column {column!r}", line=line) from None


def read_aux_csv(source, require_kwp=False) -> AuxRegistry:
    """Parse a registry CSV with header ``id,lat,lon,tilt,azimuth,surface,kwp``.

    ``azimuth`` and ``kwp`` cells may be empty; with ``require_kwp`` the
    ``kwp`` column must be present.
    """
    if isinstance(source, (bytes, bytearray)):
        source = bytes(source).decode("utf-8")
    if isinstance(source, str) and "\n" not in source:
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    elif hasattr(source, "read"):
        text = source.read()
        text = text.decode("utf-8") if isinstance(text, bytes) else text
    else:
        text = source

    reader = csv.DictReader(io.StringIO(text))
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    needed = _REQUIRED + (("kwp",) if require_kwp else ())
    for col in needed:
        if col not in header:
            raise ParseError(f"registry is missing column {col!r}", line=1)

    data = {c: [] for c in AUX_COLUMNS}
    for line, row in enumerate(reader, start=2):
        data["id"].append((row.get("id") or "").strip())
        for col in ("lat", "lon", "tilt", "surface"):
            data[col].append(_number(row.get(col) or "", col, line))
        for col in ("azimuth", "kwp"):
            data[col].append(_number(row.get(col) or "", col, line, optional=True))
    try:
        return AuxRegistry(
            ids=tuple(data["id"]),
            lat=data["lat"], lon=data["lon"], tilt=data["tilt"], surface=data["surface"],
            azimuth=data["azimuth"], kwp=data["kwp"],
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def write_aux_csv(aux: AuxRegistry) -> str:
    def fmt(v):
        return "" if math.isnan(v) else repr(float(v))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AUX_COLUMNS)
    for i in range(len(aux)):
        w.writerow([aux.ids[i], fmt(aux.lat[i]), fmt(aux.lon[i]), fmt(aux.tilt[i]),
                    fmt(aux.azimuth[i]), fmt(aux.surface[i]), fmt(aux.kwp[i])])
    return buf.getvalue()
