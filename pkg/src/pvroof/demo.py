"""Seeded synthetic registry shipped as demo data."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .registry import AuxRegistry

FRANCE = (-4.5, 42.5, 8.0, 51.0)


def make_demo_aux(n=100, seed=0, bounds=FRANCE) -> AuxRegistry:
    """Plausible residential installations scattered over ``bounds`` (W, S, E, N)."""
    rng = np.random.default_rng(seed)
    w, s, e, nb = bounds
    lon = np.round(rng.uniform(w, e, n), 5)
    lat = np.round(rng.uniform(s, nb, n), 5)
    tilt = np.round(np.clip(rng.normal(30.0, 8.0, n), 2.0, 60.0), 1)
    azimuth = np.round(np.clip(rng.normal(180.0, 35.0, n), 60.0, 300.0), 1)
    azimuth = np.where(azimuth > 180.0, azimuth - 360.0, azimuth)
    surface = np.round(np.exp(rng.normal(np.log(20.0), 0.45, n)), 2)
    real = surface / np.cos(np.radians(tilt))
    kwp = np.round(real * rng.normal(0.17, 0.015, n), 3)
    return AuxRegistry(
        ids=tuple(f"demo-{i:03d}" for i in range(n)),
        lat=lat, lon=lon, tilt=tilt, surface=surface, azimuth=azimuth, kwp=kwp,
    )


def demo_path(name="demo_aux.csv"):
    """Filesystem path of a bundled demo file (``demo_aux.csv``, ``demo_lut.json``)."""
    return str(resources.files("pvroof") / "data" / name)
