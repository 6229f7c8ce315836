"""Unit constants. Distances are carried in miles, planar geometry in feet."""

import math

METERS_PER_MILE = 1609.344
FEET_PER_MILE = 5280.0
FEET_PER_METER = 1.0 / 0.3048
EARTH_RADIUS_FT = 20_902_231.0
EARTH_RADIUS_MI = EARTH_RADIUS_FT / FEET_PER_MILE

# length of one mile in each supported unit
_PER_MILE = {
    "m": METERS_PER_MILE,
    "km": METERS_PER_MILE / 1000.0,
    "mi": 1.0,
    "ft": FEET_PER_MILE,
}


def _per_mile(unit):
    try:
        return _PER_MILE[unit]
    except KeyError:
        raise ValueError(f"unknown distance unit {unit!r}; expected one of {sorted(_PER_MILE)}") from None


def to_miles(value, unit):
    return float(value) / _per_mile(unit)


def from_miles(value, unit):
    return float(value) * _per_mile(unit)


def haversine_miles(lat1, lon1, lat2, lon2):
    """Great-circle distance in miles on a sphere of radius ``EARTH_RADIUS_MI``."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2.0 * EARTH_RADIUS_MI * math.asin(min(1.0, math.sqrt(a)))
