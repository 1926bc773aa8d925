"""Robust plane fitting on DSM samples and tilt/azimuth from the gradient.

The plane ``z = a*x + b*y + c`` is estimated Theil-Sen style: every
(sampled) triple of points defines an exact plane, and the fit is the
component-wise median of the triple solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_samples, check_xy
from .exceptions import RankDeficientError
from .geometry import bearing, normalize_azimuth

MAX_TRIPLES = 5000
MIN_TRIPLE_AREA = 1e-9
FLAT_GRADIENT = 1e-4


def _all_triples(n):
    return np.fromiter(
        (i for t in combinations(range(n), 3) for i in t), dtype=np.intp, count=3 * comb(n, 3)
    ).reshape(-1, 3)


def _random_triples(n, size, rng):
    """``size`` triples of distinct indices, uniform over ordered draws."""
    out = np.empty((0, 3), dtype=np.intp)
    while len(out) < size:
        draw = rng.integers(0, n, size=(size, 3))
        ok = (draw[:, 0] != draw[:, 1]) & (draw[:, 0] != draw[:, 2]) & (draw[:, 1] != draw[:, 2])
        out = np.concatenate([out, draw[ok]])
    return out[:size]


def triple_planes(points, triples, min_area=MIN_TRIPLE_AREA):
    """Exact plane coefficients through each triple of ``points``.

    Returns an ``(m, 3)`` array of (a, b, c) for the non-degenerate
    triples, i.e. those whose xy-triangle area is at least ``min_area``.
    """
    p1, p2, p3 = points[triples[:, 0]], points[triples[:, 1]], points[triples[:, 2]]
    u, v = p2 - p1, p3 - p1
    normal = np.cross(u, v)
    keep = 0.5 * np.abs(normal[:, 2]) >= min_area
    normal, p1 = normal[keep], p1[keep]
    a = -normal[:, 0] / normal[:, 2]
    b = -normal[:, 1] / normal[:, 2]
    c = p1[:, 2] - a * p1[:, 0] - b * p1[:, 1]
    return np.column_stack([a, b, c])


class TheilSenPlaneRegressor(RegressorMixin, BaseEstimator):
    """Theil-Sen plane regressor ``z = a*x + b*y + c``.

    Parameters
    ----------
    max_triples : int, default=5000
        All triples are used when there are at most this many; otherwise
        this many triples are drawn uniformly at random.
    min_triple_area : float, default=1e-9
        Triples whose xy-triangle is smaller than this (m^2) are rejected
        as degenerate.
    random_state : int, default=0
        Seed of the triple sampler.

    Attributes
    ----------
    coef_ : ndarray of shape (2,)
        Slopes (a, b) along x (east) and y (north).
    intercept_ : float
    n_triples_ : int
        Number of non-degenerate triples the median was taken over.
    """

    def __init__(self, max_triples=MAX_TRIPLES, min_triple_area=MIN_TRIPLE_AREA, random_state=0):
        self.max_triples = max_triples
        self.min_triple_area = min_triple_area
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_xy(X, y, min_samples=3)
        points = np.column_stack([X, y])
        n = len(points)
        if comb(n, 3) <= self.max_triples:
            triples = _all_triples(n)
        else:
            rng = np.random.default_rng(self.random_state)
            triples = _random_triples(n, self.max_triples, rng)
        planes = triple_planes(points, triples, self.min_triple_area)
        if not len(planes):
            raise RankDeficientError()
        a, b, c = np.median(planes, axis=0)
        self.coef_ = np.array([a, b])
        self.intercept_ = float(c)
        self.n_triples_ = len(planes)
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_xy(X)
        return X @ self.coef_ + self.intercept_


@dataclass(frozen=True)
class PlaneFit:
    a: float
    b: float
    c: float
    n_samples: int
    n_triples: int

    @property
    def gradient_norm(self):
        return math.hypot(self.a, self.b)


def theil_sen_fit(samples, seed=0, max_triples=MAX_TRIPLES) -> PlaneFit:
    """Fit a plane to ``(n, 3)`` altitude samples (x, y, z)."""
    pts = check_samples(samples)
    est = TheilSenPlaneRegressor(max_triples=max_triples, random_state=seed).fit(pts[:, :2], pts[:, 2])
    a, b = est.coef_
    return PlaneFit(float(a), float(b), est.intercept_, len(pts), est.n_triples_)


@dataclass(frozen=True)
class OrientationEstimate:
    """Panel orientation.

    ``azimuth`` is the direction the panel faces (steepest descent),
    degrees clockwise from North in (-180, 180], or ``None`` when
    undefined (flat plane). ``tilt`` is ``None`` for methods that only
    estimate the azimuth.
    """

    tilt: float | None
    azimuth: float | None
    method: str
    flags: tuple[str, ...] = ()

    @property
    def flat(self):
        return "flat" in self.flags


def orientation_from_plane(f: PlaneFit, method="theil-sen") -> OrientationEstimate:
    grad = f.gradient_norm
    tilt = math.degrees(math.atan(grad))
    if grad < FLAT_GRADIENT:
        return OrientationEstimate(tilt, None, method, ("flat",))
    return OrientationEstimate(tilt, normalize_azimuth(bearing(-f.a, -f.b)), method)
