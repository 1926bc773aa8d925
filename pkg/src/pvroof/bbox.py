"""Azimuth from the polygon's minimum rotated rectangle.

Panels are assumed wider than high, so they face a normal of the long
side. Of the two normals the one in (0, 180] is kept, and headings inside
the northern band (-45, 45) are mirrored across the east-west axis.
"""

from .geometry import RotatedRect, normalize_azimuth
from .plane import OrientationEstimate

NORTH_BAND = 45.0


def long_side_normal(orientation):
    """Normal of a line at ``orientation`` (deg from North), chosen in (0, 180]."""
    n = (orientation + 90.0) % 180.0
    return 180.0 if n == 0.0 else n


def correct_north(azimuth):
    """Mirror headings in (-45, 45) to 180 - azimuth; result in (-180, 180]."""
    a = normalize_azimuth(azimuth)
    if -NORTH_BAND < a < NORTH_BAND:
        a = normalize_azimuth(180.0 - a)
    return a


def bbox_azimuth(rect: RotatedRect) -> float:
    return correct_north(long_side_normal(rect.orientation))


def bbox_orientation(rect: RotatedRect) -> OrientationEstimate:
    """Azimuth-only estimate with provenance flags."""
    raw = long_side_normal(rect.orientation)
    az = correct_north(raw)
    flags = [f"side={rect.orientation:.6g}", f"normal={raw:.6g}"]
    if az != raw:
        flags.append("north-corrected")
    if rect.is_square:
        flags.append("low-confidence")
    return OrientationEstimate(None, az, "bbox", tuple(flags))
