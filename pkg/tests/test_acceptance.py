"""Acceptance criteria, one test per criterion.

Each test records a ``CRITERION n: PASS|FAIL`` line shown in the pytest
terminal summary, then asserts at the stated tolerance.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, angle_gap, local_polygon, plane_raster, plane_z, rect_corners, rect_polygon
from pvroof.bbox import bbox_azimuth
from pvroof.benchmark import compute_metrics
from pvroof.capacity import ClusteredCapacityRegressor, LinearCapacityRegressor, real_surface
from pvroof.demo import make_demo_aux
from pvroof.geometry import EARTH_RADIUS, PVPolygon, min_rotated_rect, projected_surface
from pvroof.hough import dominant_angles, edge_map, rasterize_mask
from pvroof.lut import Bounds, build_lut, save_lut
from pvroof.pipeline import ExtractionConfig, Resources, extract_all, extract_one
from pvroof.plane import orientation_from_plane, theil_sen_fit
from pvroof.registry import AuxRegistry


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def test_criterion_01_real_surface_consistency():
    rng = np.random.default_rng(1)
    proj = rng.uniform(0.1, 1000.0, 1000)
    tilt = rng.uniform(0.0, 85.0, 1000)
    tilt[:2] = (0.0, 85.0)
    t0 = time.perf_counter()
    surf = np.array([real_surface(p, t) for p, t in zip(proj, tilt)])
    elapsed = time.perf_counter() - t0
    rel = np.max(np.abs(surf * np.cos(np.radians(tilt)) - proj) / proj)
    record(1, rel < 1e-12 and elapsed < 1.0, f"max rel err {rel:.2e} (< 1e-12), {elapsed:.3f}s (< 1s)")


def _plane_samples(rng, tilt, azimuth):
    side = int(rng.integers(5, 21))  # 25..400 samples
    spacing = rng.uniform(0.2, 1.0)
    c = (np.arange(side) - (side - 1) / 2) * spacing
    x, y = (g.ravel() for g in np.meshgrid(c, c))
    return np.column_stack([x, y, plane_z(x, y, tilt, azimuth)])


def _plane_configs(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        tilt = rng.uniform(5.0, 60.0)
        azimuth = 180.0 - rng.uniform(0.0, 360.0)  # (-180, 180]
        yield rng, tilt, azimuth


def test_criterion_02_theil_sen_exact():
    worst_t = worst_a = 0.0
    t0 = time.perf_counter()
    for i, (rng, tilt, azimuth) in enumerate(_plane_configs(2)):
        est = orientation_from_plane(theil_sen_fit(_plane_samples(rng, tilt, azimuth), seed=i))
        worst_t = max(worst_t, abs(est.tilt - tilt))
        worst_a = max(worst_a, angle_gap(est.azimuth, azimuth))
    elapsed = time.perf_counter() - t0
    ok = worst_t <= 0.1 and worst_a <= 0.1 and elapsed < 10.0
    record(2, ok, f"worst tilt err {worst_t:.2e} deg, worst azimuth err {worst_a:.2e} deg (<= 0.1), "
                  f"{elapsed:.2f}s (< 10s)")


def test_criterion_03_theil_sen_robust():
    good = 0
    t0 = time.perf_counter()
    for i, (rng, tilt, azimuth) in enumerate(_plane_configs(3)):
        pts = _plane_samples(rng, tilt, azimuth)
        bad = rng.choice(len(pts), size=int(round(0.2 * len(pts))), replace=False)
        pts[bad, 2] += 50.0
        est = orientation_from_plane(theil_sen_fit(pts, seed=i))
        if abs(est.tilt - tilt) < 1.0 and est.azimuth is not None and angle_gap(est.azimuth, azimuth) < 2.0:
            good += 1
    elapsed = time.perf_counter() - t0
    record(3, good >= 95 and elapsed < 30.0, f"{good}/100 trials within tolerance (>= 95), {elapsed:.2f}s (< 30s)")


def test_criterion_04_projected_surface():
    details, ok = [], True
    d = math.radians(0.001)
    for lat in (0.0, 45.0):
        p = PVPolygon.from_coords("sq", [(2.0, lat), (2.001, lat), (2.001, lat + 0.001), (2.0, lat + 0.001)])
        oracle = (EARTH_RADIUS * d) ** 2 * math.cos(math.radians(lat + 0.0005))
        got = projected_surface(p)
        rel = abs(got - oracle) / oracle
        ok &= rel <= 1e-3
        details.append(f"lat {lat:g}: {got:.1f} m2 vs {oracle:.1f} (rel {rel:.1e})")
    record(4, ok, "; ".join(details))


def _oracle_normal(orientation):
    # the two perpendiculars to the long side; keep the eastward one, due south on a tie
    cands = [(orientation + 90.0) % 360.0, (orientation - 90.0) % 360.0]
    east = [math.sin(math.radians(c)) for c in cands]
    if abs(east[0]) < 1e-12:
        a = 180.0
    else:
        a = cands[0] if east[0] > 0 else cands[1]
    a = (a + 180.0) % 360.0 - 180.0
    if 0.0 < a < 45.0:
        a = 180.0 - a
    return a


def test_criterion_05_bbox_azimuth():
    rng = np.random.default_rng(5)
    worst, inside = 0.0, 0
    for i in range(100):
        width = rng.uniform(2.0, 10.0)
        length = width * rng.uniform(1.5, 4.0)
        orientation = rng.uniform(0.0, 180.0)
        poly = rect_polygon(f"r{i}", length, width, orientation)
        az = bbox_azimuth(min_rotated_rect(poly))
        worst = max(worst, angle_gap(az, _oracle_normal(orientation)))
        inside += -45.0 < az < 45.0
    record(5, worst <= 1.0 and inside == 0, f"worst err {worst:.2e} deg (<= 1), {inside} inside (-45, 45)")


def test_criterion_06_lut():
    rng = np.random.default_rng(6)
    bounds = Bounds(0.0, 40.0, 10.0, 50.0)
    K = L = 10
    observed = rng.random((K, L)) < 0.4
    f = rng.integers(0, 160, (K, L)) / 4.0  # dyadic, so means are exact
    rows = []
    for k, l in zip(*np.nonzero(observed)):
        for surface in (10.0, 10.0, 30.0, 30.0):
            lon = k + rng.uniform(0.05, 0.95)
            lat = 40.0 + l + rng.uniform(0.05, 0.95)
            rows.append((lat, lon, f[k, l], surface))
    lat, lon, tilt, surf = map(np.array, zip(*rows))
    reg = AuxRegistry(tuple(f"r{i}" for i in range(len(rows))), lat, lon, tilt, surf)
    lut = build_lut(reg, K, L, 2, bounds=bounds)

    got, _ = lut.lookup(lon, lat, surf)
    exact = bool(np.array_equal(got, tilt))
    filled = bool(np.all(np.isfinite(lut.cells)))
    bounded = True
    for t in range(lut.t):
        obs = lut.cells[:, :, t][lut.fill_mask[:, :, t]]
        interp = lut.cells[:, :, t][~lut.fill_mask[:, :, t]]
        bounded &= bool(np.all((interp >= obs.min()) & (interp <= obs.max())))
    same = save_lut(build_lut(reg, K, L, 2, bounds=bounds)) == save_lut(lut)
    ok = exact and filled and bounded and same and int(lut.fill_mask.sum()) == 2 * int(observed.sum())
    record(6, ok, f"exact on observed={exact}, all filled={filled}, interpolated bounded={bounded}, "
                  f"byte-identical rebuild={same}")


def test_criterion_07_capacity_regression():
    rng = np.random.default_rng(7)
    s = rng.uniform(5.0, 80.0, 200)
    lin = LinearCapacityRegressor().fit(s, 0.17 * s).gamma_
    lin_err = abs(lin - 0.17) / 0.17
    s2 = np.concatenate([np.linspace(5, 19, 20), np.linspace(20, 60, 20)])
    c2 = np.where(s2 < 20, 0.3 * s2, 0.1 * s2)
    gammas = [g for _, g in ClusteredCapacityRegressor(2).fit(s2, c2).model_.clusters]
    clu_err = max(abs(gammas[0] - 0.3) / 0.3, abs(gammas[1] - 0.1) / 0.1)
    one = ClusteredCapacityRegressor(1).fit(s2, c2).model_.clusters[0][1]
    bitwise = one == LinearCapacityRegressor().fit(s2, c2).gamma_
    ok = lin_err <= 1e-12 and clu_err <= 1e-9 and bitwise
    record(7, ok, f"linear rel err {lin_err:.1e} (<= 1e-12), clustered rel err {clu_err:.1e} (<= 1e-9), "
                  f"one-cluster bitwise={bitwise}")


def test_criterion_08_hough():
    worst = 0.0
    for rot in range(0, 180, 15):
        d = dominant_angles(edge_map(rasterize_mask(rect_polygon(f"h{rot}", 10.0, 5.0, float(rot)))))
        worst = max(worst, angle_gap(d.primary, float(rot), 180.0))

    dsm_worst = 0.0
    hough_cfg = ExtractionConfig(tilt_method="theil-sen", azimuth_method="hough", dsm_path="synthetic")
    ts_cfg = ExtractionConfig(tilt_method="theil-sen", azimuth_method="theil-sen", dsm_path="synthetic")
    for rot, facing, tilt in ((90.0, 180.0, 25.0), (30.0, 120.0, 35.0), (150.0, -120.0, 20.0), (0.0, 90.0, 15.0)):
        poly = rect_polygon("p", 10.0, 5.0, rot)
        res = Resources(dsm=plane_raster(tilt, facing))
        h = extract_one(poly, hough_cfg, res)
        ts = extract_one(poly, ts_cfg, res)
        assert h.provenance["azimuth"] == "hough-dsm"
        dsm_worst = max(dsm_worst, angle_gap(h.azimuth, ts.azimuth))
    record(8, worst <= 2.0 and dsm_worst <= 5.0,
           f"worst primary err {worst:g} deg over 12 rotations (<= 2), "
           f"worst hough-dsm vs theil-sen gap {dsm_worst:.2f} deg (<= 5)")


def test_criterion_09_metric_identities():
    rng = np.random.default_rng(9)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 20))
        m = compute_metrics(rng.normal(0, 10, n), rng.normal(0, 10, n))
        violations += not (m.mae <= m.rmse + 1e-12 and abs(m.me) <= m.mae + 1e-12)
    m = compute_metrics([1, 2, 3], [1, 1, 1], mape=True)
    fixture = (m.me == 1.0 and m.mae == 1.0 and abs(m.rmse - 1.2910) <= 1e-4 and m.mape == pytest.approx(100.0))
    record(9, violations == 0 and fixture,
           f"{violations} identity violations in 10000 draws; fixture ME={m.me:g} MAE={m.mae:g} "
           f"RMSE={m.rmse:.4f} MAPE={m.mape:g}%")


def _fixture_50():
    polys = []
    rng = np.random.default_rng(10)
    for i in range(49):
        length = rng.uniform(5.0, 12.0)
        corners = rect_corners(length, length / rng.uniform(1.5, 2.5), rng.uniform(0, 180), ((i - 24) * 12.0, 0.0))
        polys.append(local_polygon(f"b{i:02d}", corners))
    polys.insert(17, PVPolygon.from_coords("bad", [(2, 45), (2.0001, 45), (2.0002, 45)], validate=False))
    return polys


def test_criterion_10_determinism():
    polys = _fixture_50()
    aux = make_demo_aux()
    res = Resources(lut=build_lut(aux, 50, 50, 4), dsm=plane_raster(25.0, 160.0, half=150.0))
    cfg = ExtractionConfig(tilt_method="theil-sen", azimuth_method="hough", dsm_path="synthetic")
    outs = {}
    for workers in (1, 4, 8):
        reg = extract_all(polys, cfg, res, workers=workers)
        outs[workers] = (reg.to_csv(), reg.to_geojson())
    same = outs[1] == outs[4] == outs[8]
    provs = {r.provenance["tilt"] for r in extract_all(polys, cfg, res).records if r.status != "error"}
    record(10, same and len(polys) == 50 and {"theil-sen", "lut"} <= provs,
           f"50 polygons, workers 1/4/8 byte-identical={same}, tilt sources {sorted(provs)}")


@pytest.mark.skip(reason="optional: requires the external BDAPPV registry")
def test_criterion_11_bdappv_orders_of_magnitude():
    pass
