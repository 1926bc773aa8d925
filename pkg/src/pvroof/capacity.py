"""Real surface from projected surface and tilt, and installed capacity models.

All regressions are through the origin (no intercept): capacity is
``gamma * surface`` with one gamma overall or one per surface cluster.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ImplausibleTiltError, SchemaError
from .registry import AuxRegistry

MAX_TILT = 85.0
DEFAULT_EFFICIENCY = 1.0 / 6.0
KINDS = ("constant", "linear", "clustered")


def real_surface(projected, tilt):
    """Panel area ``projected / cos(tilt)``; tilt in degrees within [0, 85]."""
    if not 0.0 <= tilt <= MAX_TILT:
        raise ImplausibleTiltError(tilt)
    if projected < 0:
        raise ValueError(f"projected surface must be >= 0, got {projected!r}")
    return projected / math.cos(tilt * math.pi / 180.0)


def _through_origin_gamma(surface, kwp):
    den = float(np.dot(surface, surface))
    if den == 0.0:
        raise ValueError("all surfaces are zero; gamma is undefined")
    return float(np.dot(surface, kwp)) / den


@dataclass(frozen=True)
class CapacityModel:
    """Surface-to-capacity conversion (kWp per m^2 of real surface).

    ``clusters`` holds ``(upper_edge, gamma)`` pairs; edges ascend and the
    last is ``inf``. A surface belongs to the first cluster whose edge
    exceeds it.
    """

    kind: str
    efficiency: float | None = None
    gamma: float | None = None
    clusters: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "constant" and not (self.efficiency and self.efficiency > 0):
            raise ValueError("constant model requires efficiency > 0")
        if self.kind == "linear" and not (self.gamma and self.gamma > 0):
            raise ValueError("linear model requires gamma > 0")
        if self.kind == "clustered":
            if not self.clusters:
                raise ValueError("clustered model requires at least one cluster")
            edges = [e for e, _ in self.clusters]
            if edges[-1] != math.inf or any(b <= a for a, b in zip(edges, edges[1:])):
                raise ValueError("cluster edges must ascend strictly and end with inf")
            if any(not g > 0 for _, g in self.clusters):
                raise ValueError("cluster gammas must be > 0")
            object.__setattr__(self, "clusters", tuple((float(e), float(g)) for e, g in self.clusters))

    def gamma_for(self, surface):
        if self.kind == "constant":
            return self.efficiency
        if self.kind == "linear":
            return self.gamma
        for edge, g in self.clusters:
            if surface < edge:
                return g
        return self.clusters[-1][1]

    def to_dict(self):
        doc = {"kind": self.kind}
        if self.kind == "constant":
            doc["efficiency"] = self.efficiency
        elif self.kind == "linear":
            doc["gamma"] = self.gamma
        else:
            doc["clusters"] = [{"edge": None if math.isinf(e) else e, "gamma": g} for e, g in self.clusters]
        return doc

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise SchemaError("model document must be a JSON object")
        kind = doc.get("kind")
        if kind not in KINDS:
            raise SchemaError(f"field 'kind' must be one of {KINDS}", "kind")
        try:
            if kind == "constant":
                return cls(kind, efficiency=_num(doc, "efficiency"))
            if kind == "linear":
                return cls(kind, gamma=_num(doc, "gamma"))
            raw = doc.get("clusters")
            if not isinstance(raw, list) or not raw:
                raise SchemaError("field 'clusters' must be a non-empty list", "clusters")
            clusters = []
            for c in raw:
                if not isinstance(c, dict) or "edge" not in c or "gamma" not in c:
                    raise SchemaError("each cluster needs 'edge' and 'gamma'", "clusters")
                edge = math.inf if c["edge"] is None else float(c["edge"])
                clusters.append((edge, float(c["gamma"])))
            return cls(kind, clusters=tuple(clusters))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(str(exc)) from exc


def _num(doc, key):
    v = doc.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"field {key!r} must be a number", key)
    return float(v)


def save_model(model: CapacityModel, fp=None):
    text = json.dumps(model.to_dict(), sort_keys=True) + "\n"
    if fp is not None:
        if hasattr(fp, "write"):
            fp.write(text)
        else:
            with open(fp, "w", encoding="utf-8") as fh:
                fh.write(text)
    return text


def load_model(source) -> CapacityModel:
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and source.lstrip().startswith("{"):
        text = source
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model is not valid JSON: {exc.msg}") from exc
    return CapacityModel.from_dict(doc)


def _check_surface_kwp(X, y, min_rows):
    s = np.asarray(X, dtype=float)
    if s.ndim == 2:
        if s.shape[1] != 1:
            raise ValueError("X must hold a single surface column")
        s = s[:, 0]
    s = s.ravel()
    c = np.asarray(y, dtype=float).ravel()
    if len(s) != len(c):
        raise ValueError(f"X has {len(s)} rows but y has {len(c)}")
    ok = np.isfinite(s) & np.isfinite(c)
    s, c = s[ok], c[ok]
    if len(s) < min_rows:
        raise ValueError(f"need at least {min_rows} rows with surface and kWp, got {len(s)}")
    if np.any(s < 0):
        raise ValueError("surfaces must be >= 0")
    return s, c


class LinearCapacityRegressor(RegressorMixin, BaseEstimator):
    """Through-origin least squares ``kwp = gamma * surface``."""

    def fit(self, X, y):
        s, c = _check_surface_kwp(X, y, min_rows=2)
        self.gamma_ = _through_origin_gamma(s, c)
        self.model_ = CapacityModel("linear", gamma=self.gamma_)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self)
        return self.gamma_ * np.asarray(X, dtype=float).reshape(-1)


class ClusteredCapacityRegressor(RegressorMixin, BaseEstimator):
    """One through-origin gamma per surface cluster.

    Cluster edges are surface quantiles at levels i / n_clusters, so each
    cluster is a half-open surface interval ``[low, high)``.
    """

    def __init__(self, n_clusters=4):
        self.n_clusters = n_clusters

    def fit(self, X, y):
        n = int(self.n_clusters)
        if n < 1:
            raise ValueError("n_clusters must be >= 1")
        s, c = _check_surface_kwp(X, y, min_rows=max(2 * n, 2))
        inner = np.quantile(s, np.arange(1, n) / n) if n > 1 else np.empty(0)
        if np.any(np.diff(inner) <= 0):
            raise ValueError("duplicate surface quantiles produce an empty cluster; use fewer clusters")
        labels = np.searchsorted(inner, s, side="right")
        clusters = []
        for i, edge in enumerate(list(inner) + [math.inf]):
            sel = labels == i
            if not sel.any():
                raise ValueError(f"cluster {i} is empty (duplicate surfaces); use fewer clusters")
            clusters.append((float(edge), _through_origin_gamma(s[sel], c[sel])))
        self.model_ = CapacityModel("clustered", clusters=tuple(clusters))
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self)
        return np.array([estimate_capacity(self.model_, v) for v in np.asarray(X, dtype=float).reshape(-1)])


def _aux_real_surface(aux: AuxRegistry):
    # registry surfaces are projected; capacity scales with the tilted panel area
    s = aux.surface / np.cos(np.radians(aux.tilt))
    return np.where(aux.tilt <= MAX_TILT, s, np.nan)


def fit_linear(aux: AuxRegistry) -> CapacityModel:
    return LinearCapacityRegressor().fit(_aux_real_surface(aux), aux.kwp).model_


def fit_clustered(aux: AuxRegistry, n_clusters=4) -> CapacityModel:
    return ClusteredCapacityRegressor(n_clusters).fit(_aux_real_surface(aux), aux.kwp).model_


def estimate_capacity(model: CapacityModel, real_surface) -> float:
    if real_surface < 0:
        raise ValueError(f"surface must be >= 0, got {real_surface!r}")
    return model.gamma_for(real_surface) * real_surface
