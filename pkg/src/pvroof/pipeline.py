"""Per-polygon routing of the estimators and registry assembly.

Each polygon goes through centroid -> projected surface -> tilt ->
azimuth -> real surface -> capacity. DSM-based estimates degrade
per polygon when the DSM does not cover it: azimuth falls back to the
bounding box, tilt to the LUT (if loaded) and then to the constant.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .bbox import bbox_orientation, correct_north, long_side_normal
from .capacity import DEFAULT_EFFICIENCY, MAX_TILT, CapacityModel, estimate_capacity, load_model, real_surface
from .dsm import CRS_MODES, WGS84_DEGREES, DSMRaster, load_asc, samples_in_polygon
from .exceptions import (
    ConfigError,
    DegenerateGeometryError,
    ImplausibleTiltError,
    NoCoverageError,
    NoLinesError,
    RankDeficientError,
)
from .geometry import LocalFrame, PVPolygon, centroid, is_degenerate, min_rotated_rect, projected_surface
from .hough import HoughParams, disambiguate_with_dsm, dominant_angles, edge_map, rasterize_mask
from .lut import TiltLUT, load_lut, lookup_tilt, surface_category
from .plane import orientation_from_plane, theil_sen_fit

logger = logging.getLogger(__name__)

TILT_METHODS = ("constant", "lut", "theil-sen")
AZIMUTH_METHODS = ("bbox", "theil-sen", "hough")
CAPACITY_METHODS = ("constant", "linear", "clustered")
PRESETS = ("aux-only", "dsm-only", "no-data")
DEGRADING_FLAGS = frozenset({"dsm-fallback", "hough-fallback"})
CSV_COLUMNS = ("id", "lat", "lon", "tilt", "azimuth", "projected_surface", "surface", "kwp", "status")


@dataclass
class ExtractionConfig:
    tilt_method: str = "constant"
    azimuth_method: str = "bbox"
    capacity_method: str = "constant"
    default_tilt: float = 30.0
    default_efficiency: float = DEFAULT_EFFICIENCY
    lut_path: str | None = None
    capacity_model_path: str | None = None
    dsm_path: str | None = None
    dsm_crs: str = WGS84_DEGREES
    dsm_origin: tuple[float, float] = (0.0, 0.0)
    seed_policy: str | int = "feature-id"
    max_triples: int = 5000
    hough: HoughParams = field(default_factory=HoughParams)

    @classmethod
    def preset(cls, name, **kwargs):
        """One of the canonical data-availability setups.

        ``aux-only``: LUT tilt, bounding-box azimuth, fitted (clustered)
        capacity. ``dsm-only``: Theil-Sen tilt and azimuth, constant
        efficiency. ``no-data``: constant tilt and efficiency, bounding-box
        azimuth.
        """
        methods = {
            "aux-only": ("lut", "bbox", "clustered"),
            "dsm-only": ("theil-sen", "theil-sen", "constant"),
            "no-data": ("constant", "bbox", "constant"),
        }
        if name not in methods:
            raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}", "preset")
        tilt, azimuth, capacity = methods[name]
        kwargs.setdefault("tilt_method", tilt)
        kwargs.setdefault("azimuth_method", azimuth)
        kwargs.setdefault("capacity_method", capacity)
        return cls(**kwargs)

    def to_dict(self):
        doc = dataclasses.asdict(self)
        doc["dsm_origin"] = list(self.dsm_origin)
        return doc

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc = dict(doc)
        preset = doc.pop("preset", None)
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise ConfigError(f"unknown config field {unknown[0]!r}", unknown[0])
        if isinstance(doc.get("hough"), dict):
            hnames = {f.name for f in dataclasses.fields(HoughParams)}
            bad = sorted(set(doc["hough"]) - hnames)
            if bad:
                raise ConfigError(f"unknown hough parameter {bad[0]!r}", "hough")
            doc["hough"] = HoughParams(**doc["hough"])
        if "dsm_origin" in doc and doc["dsm_origin"] is not None:
            doc["dsm_origin"] = tuple(doc["dsm_origin"])
        if preset is not None:
            return cls.preset(preset, **doc)
        return cls(**doc)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc.msg}") from exc
        return cls.from_dict(doc)


@dataclass(frozen=True)
class Resources:
    """Loaded, read-only inputs shared by every polygon."""

    lut: TiltLUT | None = None
    capacity_model: CapacityModel | None = None
    dsm: DSMRaster | None = None


def _needs(c: ExtractionConfig):
    """(path field, resource attribute, reason) for every required input."""
    out = []
    if c.tilt_method == "lut":
        out.append(("lut_path", "lut", "tilt_method=lut"))
    if c.tilt_method == "theil-sen":
        out.append(("dsm_path", "dsm", "tilt_method=theil-sen"))
    if c.azimuth_method == "theil-sen":
        out.append(("dsm_path", "dsm", "azimuth_method=theil-sen"))
    if c.capacity_method in ("linear", "clustered"):
        out.append(("capacity_model_path", "capacity_model", f"capacity_method={c.capacity_method}"))
    return out


def validate_config(c: ExtractionConfig, resources: Resources | None = None) -> ExtractionConfig:
    """Check method names, numeric ranges and method/input consistency.

    An input is satisfied by its path in the config or, when
    ``resources`` is given, by the loaded object.
    """
    for name, allowed in (("tilt_method", TILT_METHODS), ("azimuth_method", AZIMUTH_METHODS),
                          ("capacity_method", CAPACITY_METHODS)):
        if getattr(c, name) not in allowed:
            raise ConfigError(f"{name} must be one of {allowed}, got {getattr(c, name)!r}", name)
    if not isinstance(c.default_tilt, (int, float)) or not 0 <= c.default_tilt <= MAX_TILT:
        raise ConfigError(f"default_tilt must lie in [0, {MAX_TILT:g}]", "default_tilt")
    if not isinstance(c.default_efficiency, (int, float)) or not c.default_efficiency > 0:
        raise ConfigError("default_efficiency must be > 0", "default_efficiency")
    if c.dsm_crs not in CRS_MODES:
        raise ConfigError(f"dsm_crs must be one of {CRS_MODES}", "dsm_crs")
    if not (c.seed_policy == "feature-id" or (isinstance(c.seed_policy, int) and not isinstance(c.seed_policy, bool))):
        raise ConfigError("seed_policy must be 'feature-id' or an integer", "seed_policy")
    if not isinstance(c.max_triples, int) or c.max_triples < 1:
        raise ConfigError("max_triples must be a positive integer", "max_triples")
    if not isinstance(c.hough, HoughParams):
        raise ConfigError("hough must be a HoughParams mapping", "hough")
    for path_field, attr, reason in _needs(c):
        if getattr(c, path_field):
            continue
        if resources is not None and getattr(resources, attr) is not None:
            continue
        method = reason.split("=")[1]
        raise ConfigError(f"{method} requires {path_field} ({reason})", path_field)
    return c


def load_resources(c: ExtractionConfig) -> Resources:
    lut = load_lut(c.lut_path) if c.lut_path else None
    model = load_model(c.capacity_model_path) if c.capacity_model_path else None
    if model is not None and c.capacity_method in ("linear", "clustered") and model.kind != c.capacity_method:
        raise ConfigError(
            f"capacity model file holds a {model.kind!r} model but capacity_method={c.capacity_method}",
            "capacity_model_path",
        )
    dsm = load_asc(c.dsm_path, c.dsm_crs, c.dsm_origin) if c.dsm_path else None
    return Resources(lut, model, dsm)


@dataclass(frozen=True)
class CharacteristicsRecord:
    id: str
    lat: float | None
    lon: float | None
    tilt: float | None
    azimuth: float | None
    projected_surface: float | None
    surface: float | None
    kwp: float | None
    status: str
    provenance: dict = field(default_factory=dict, compare=False)

    def as_row(self):
        return [self.id] + [_fmt(getattr(self, c)) for c in CSV_COLUMNS[1:-1]] + [self.status]


def _fmt(v):
    return "" if v is None else repr(float(v))


def feature_seed(fid: str) -> int:
    """Stable 63-bit seed derived from a feature id."""
    return int.from_bytes(hashlib.blake2b(fid.encode("utf-8"), digest_size=8).digest(), "little") >> 1


class _DSMState:
    """Lazily computed DSM samples and plane fit for one polygon."""

    def __init__(self, p, frame, config, resources):
        self.p, self.frame, self.config, self.resources = p, frame, config, resources
        self._samples = self._fit = None
        self.error = None

    def samples(self):
        if self._samples is None and self.error is None:
            if self.resources.dsm is None:
                self.error = "no-dsm"
            else:
                try:
                    self._samples = samples_in_polygon(self.resources.dsm, self.p, self.frame)
                except NoCoverageError:
                    self.error = "no-dsm-coverage"
        return self._samples

    def orientation(self):
        if self._fit is None and self.error is None:
            pts = self.samples()
            if pts is None:
                return None
            if len(pts) < 3:
                self.error = "too-few-dsm-samples"
                return None
            seed = feature_seed(self.p.id) if self.config.seed_policy == "feature-id" else int(self.config.seed_policy)
            try:
                fit = theil_sen_fit(pts, seed=seed, max_triples=self.config.max_triples)
            except RankDeficientError:
                self.error = "rank-deficient"
                return None
            est = orientation_from_plane(fit)
            if est.tilt > MAX_TILT:
                self.error = "implausible-tilt"
                return None
            self._fit = est
        return self._fit


def _error_record(p, message, lat=None, lon=None):
    return CharacteristicsRecord(p.id, lat, lon, None, None, None, None, None, "error", {"error": message})


def extract_one(p: PVPolygon, config: ExtractionConfig, resources: Resources) -> CharacteristicsRecord:
    """Characteristics of one polygon; geometry failures yield an error record."""
    flags = []
    prov = {}
    try:
        p.validate()
        c = centroid(p)
    except (DegenerateGeometryError, ValueError) as exc:
        return _error_record(p, str(exc))
    if c.degenerate or is_degenerate(p):
        return _error_record(p, "degenerate geometry", c.lat, c.lon)
    frame = LocalFrame(c.lon, c.lat)
    sproj = projected_surface(p)
    dsm = _DSMState(p, frame, config, resources)

    def lut_tilt():
        res = lookup_tilt(resources.lut, c.lon, c.lat, sproj)
        if res.clamped:
            flags.append("lut-clamped")
        cat = int(surface_category(sproj, resources.lut.breakpoints))
        if cat in resources.lut.fallback_categories:
            flags.append("lut-category-fallback")
        return res.tilt

    # tilt
    if config.tilt_method == "constant":
        tilt, prov["tilt"] = float(config.default_tilt), "constant"
    elif config.tilt_method == "lut":
        tilt, prov["tilt"] = lut_tilt(), "lut"
    else:
        est = dsm.orientation()
        if est is not None:
            tilt, prov["tilt"] = est.tilt, "theil-sen"
        else:
            flags += ["dsm-fallback", dsm.error]
            if resources.lut is not None:
                tilt, prov["tilt"] = lut_tilt(), "lut"
            else:
                tilt, prov["tilt"] = float(config.default_tilt), "constant"

    # azimuth
    def bbox():
        rect = min_rotated_rect(p)
        est = bbox_orientation(rect)
        prov["bbox_side"] = rect.orientation
        prov["bbox_normal"] = long_side_normal(rect.orientation)
        flags.extend(f for f in est.flags if "=" not in f)
        return est.azimuth

    if config.azimuth_method == "bbox":
        azimuth, prov["azimuth"] = bbox(), "bbox"
    elif config.azimuth_method == "theil-sen":
        est = dsm.orientation()
        if est is not None:
            azimuth, prov["azimuth"] = est.azimuth, "theil-sen"
            if est.flat:
                flags.append("flat")
        else:
            flags += ["dsm-fallback", dsm.error]
            azimuth, prov["azimuth"] = bbox(), "bbox"
    else:
        azimuth, prov["azimuth"] = _hough_azimuth(p, config, resources, dsm, flags, bbox)

    try:
        surface = real_surface(sproj, tilt)
    except ImplausibleTiltError as exc:
        return _error_record(p, str(exc), c.lat, c.lon)

    if config.capacity_method == "constant":
        model = CapacityModel("constant", efficiency=float(config.default_efficiency))
    else:
        model = resources.capacity_model
    prov["capacity"] = config.capacity_method
    kwp = estimate_capacity(model, surface)

    flags = list(dict.fromkeys(f for f in flags if f))
    prov["flags"] = flags
    status = "degraded" if DEGRADING_FLAGS.intersection(flags) else "ok"
    return CharacteristicsRecord(p.id, c.lat, c.lon, tilt, azimuth, sproj, surface, kwp, status, prov)


def _hough_azimuth(p, config, resources, dsm, flags, bbox):
    hp = config.hough
    try:
        edges = edge_map(rasterize_mask(p, hp.pixel_size, hp.pad), hp)
        angles = dominant_angles(edges, hp)
    except (NoLinesError, DegenerateGeometryError):
        flags.append("hough-fallback")
        return bbox(), "bbox"
    if angles.secondary_fallback:
        flags.append("hough-secondary-fallback")
    if resources.dsm is not None:
        pts = dsm.samples()
        if pts is not None and len(pts) >= 10:
            est = disambiguate_with_dsm(angles.primary, angles.secondary, pts, hp.min_drop)
            if not est.flat:
                return est.azimuth, "hough-dsm"
            flags += ["flat", "hough-fallback"]
            return bbox(), "bbox"
        flags += ["dsm-fallback", dsm.error or "too-few-dsm-samples"]
    return correct_north(long_side_normal(angles.primary)), "hough"


@dataclass(frozen=True)
class Registry:
    records: tuple[CharacteristicsRecord, ...]
    polygons: tuple[PVPolygon, ...] = field(default=(), repr=False, compare=False)

    @property
    def summary(self):
        counts = {"ok": 0, "degraded": 0, "error": 0}
        for r in self.records:
            counts[r.status] += 1
        return counts

    def summary_line(self):
        s = self.summary
        return f"ok={s['ok']} degraded={s['degraded']} error={s['error']}"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow(r.as_row())
        return buf.getvalue()

    def to_geojson(self):
        feats = []
        for p, r in zip(self.polygons, self.records):
            props = dict(p.properties)
            props.update({
                "lat": r.lat, "lon": r.lon, "tilt": r.tilt, "azimuth": r.azimuth,
                "projected_surface": r.projected_surface, "surface": r.surface, "kwp": r.kwp,
                "status": r.status, "provenance": r.provenance,
            })
            feats.append({
                "type": "Feature",
                "id": r.id,
                "geometry": {"type": "Polygon", "coordinates": [[list(v) for v in p.exterior]]},
                "properties": props,
            })
        return json.dumps({"type": "FeatureCollection", "features": feats}, allow_nan=False) + "\n"


_WORKER = {}


def _init_worker(config, resources):
    _WORKER["args"] = (config, resources)


def _run_one(p):
    config, resources = _WORKER["args"]
    return extract_one(p, config, resources)


def extract_all(polygons, config: ExtractionConfig, resources: Resources, workers=1) -> Registry:
    """Extract every polygon; output order follows input order for any ``workers``."""
    polygons = tuple(polygons)
    if workers <= 1 or len(polygons) <= 1:
        records = [extract_one(p, config, resources) for p in polygons]
    else:
        chunk = max(1, len(polygons) // (4 * workers))
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(config, resources)) as pool:
            records = list(pool.map(_run_one, polygons, chunksize=chunk))
    registry = Registry(tuple(records), polygons)
    logger.info("%s", registry.summary_line())
    return registry


class CharacteristicsExtractor(TransformerMixin, BaseEstimator):
    """Estimator facade over the extraction pipeline.

    ``fit`` validates the configuration and, when an auxiliary registry is
    passed, builds any missing LUT / capacity model from it. ``transform``
    maps a sequence of :class:`PVPolygon` to an array with columns
    ``lat, lon, tilt, azimuth, projected_surface, surface, kwp`` (NaN for
    undefined values).
    """

    columns = CSV_COLUMNS[1:-1]

    def __init__(self, tilt_method="constant", azimuth_method="bbox", capacity_method="constant",
                 default_tilt=30.0, default_efficiency=DEFAULT_EFFICIENCY, lut=None,
                 capacity_model=None, dsm=None, lut_grid=(50, 50, 4), n_clusters=4, n_jobs=1):
        self.tilt_method = tilt_method
        self.azimuth_method = azimuth_method
        self.capacity_method = capacity_method
        self.default_tilt = default_tilt
        self.default_efficiency = default_efficiency
        self.lut = lut
        self.capacity_model = capacity_model
        self.dsm = dsm
        self.lut_grid = lut_grid
        self.n_clusters = n_clusters
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None, aux=None):
        from .capacity import fit_clustered, fit_linear
        from .lut import build_lut

        lut, model = self.lut, self.capacity_model
        if aux is not None:
            if lut is None and self.tilt_method in ("lut", "theil-sen"):
                lut = build_lut(aux, *self.lut_grid)
            if model is None and self.capacity_method == "linear":
                model = fit_linear(aux)
            elif model is None and self.capacity_method == "clustered":
                model = fit_clustered(aux, self.n_clusters)
        self.config_ = ExtractionConfig(
            tilt_method=self.tilt_method, azimuth_method=self.azimuth_method,
            capacity_method=self.capacity_method, default_tilt=self.default_tilt,
            default_efficiency=self.default_efficiency,
        )
        self.resources_ = Resources(lut, model, self.dsm)
        validate_config(self.config_, self.resources_)
        return self

    def extract(self, X) -> Registry:
        check_is_fitted(self)
        return extract_all(X, self.config_, self.resources_, workers=self.n_jobs)

    def transform(self, X):
        reg = self.extract(X)
        out = np.full((len(reg.records), len(self.columns)), np.nan)
        for i, r in enumerate(reg.records):
            for j, name in enumerate(self.columns):
                v = getattr(r, name)
                if v is not None:
                    out[i, j] = v
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.columns, dtype=object)
