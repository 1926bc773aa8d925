import math

import numpy as np
import pytest

from pvroof.dsm import DSMRaster
from pvroof.geometry import LocalFrame, PVPolygon

ORIGIN = (2.0, 45.0)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rect_corners(length, width, orientation, center=(0.0, 0.0)):
    """Local-meter corners of a rectangle whose long side points at ``orientation``."""
    t = math.radians(orientation)
    u = np.array([math.sin(t), math.cos(t)])
    v = np.array([math.cos(t), -math.sin(t)])
    c = np.asarray(center, dtype=float)
    return [c + su * length / 2 * u + sv * width / 2 * v for su, sv in ((1, 1), (-1, 1), (-1, -1), (1, -1))]


def local_polygon(pid, corners, origin=ORIGIN, properties=None):
    f = LocalFrame(*origin)
    coords = [tuple(float(v) for v in f.to_geo(x, y)) for x, y in corners]
    return PVPolygon.from_coords(pid, coords, properties or {})


def rect_polygon(pid, length, width, orientation, center=(0.0, 0.0), origin=ORIGIN):
    return local_polygon(pid, rect_corners(length, width, orientation, center), origin)


def plane_z(x, y, tilt, azimuth, base=100.0):
    """Altitude of a plane facing ``azimuth`` (downhill direction) with ``tilt``."""
    a = math.radians(azimuth)
    return base - math.tan(math.radians(tilt)) * (np.asarray(x) * math.sin(a) + np.asarray(y) * math.cos(a))


def plane_raster(tilt, azimuth, half=30.0, cell=0.5, origin=ORIGIN):
    """Local-meters DSM of a single plane, centred on ``origin``."""
    n = int(round(2 * half / cell))
    c = -half + (np.arange(n) + 0.5) * cell
    gx, gy = np.meshgrid(c, c)
    return DSMRaster(plane_z(gx, gy, tilt, azimuth), (-half, -half), cell,
                     crs_mode="local-meters", geo_origin=origin)


def angle_gap(a, b, period=360.0):
    d = abs(a - b) % period
    return min(d, period - d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
