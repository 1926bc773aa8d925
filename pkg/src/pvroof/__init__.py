"""Rooftop PV characteristics (location, tilt, azimuth, surface, capacity) from polygons."""

from .bbox import bbox_azimuth, bbox_orientation
from .benchmark import MetricReport, benchmark_report, compute_metrics, timed
from .capacity import (
    CapacityModel,
    ClusteredCapacityRegressor,
    LinearCapacityRegressor,
    estimate_capacity,
    fit_clustered,
    fit_linear,
    load_model,
    real_surface,
    save_model,
)
from .dsm import DSMRaster, load_asc, samples_in_polygon
from .exceptions import (
    ConfigError,
    DegenerateGeometryError,
    ImplausibleTiltError,
    NoCoverageError,
    NoLinesError,
    ParseError,
    PVRoofError,
    RankDeficientError,
    SchemaError,
)
from .geometry import LocalFrame, PVPolygon, centroid, min_rotated_rect, parse_polygons, projected_surface
from .hough import HoughParams, disambiguate_with_dsm, dominant_angles, edge_map, rasterize_mask
from .lut import LUTTiltRegressor, TiltLUT, build_lut, load_lut, lookup_tilt, save_lut
from .pipeline import (
    CharacteristicsExtractor,
    CharacteristicsRecord,
    ExtractionConfig,
    Registry,
    Resources,
    extract_all,
    extract_one,
    load_resources,
    validate_config,
)
from .plane import TheilSenPlaneRegressor, orientation_from_plane, theil_sen_fit
from .registry import AuxRegistry, read_aux_csv, write_aux_csv

__version__ = "0.1.0"
