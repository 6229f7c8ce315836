"""Census-area geometry, the stop buffer test and ridership-weighted aggregation.

Geometry is planar, in feet, from a local equirectangular projection about
the network's region origin.  The buffer around an area is never built:
a stop belongs to an area when its distance to the area (zero inside) is at
most the buffer radius, which is the same set for point stops.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .demographics import PURPOSES, classify_income
from .errors import IngestionError, ValidationError
from .journeys import ConvenienceMetrics, Reject
from .units import EARTH_RADIUS_FT

__all__ = [
    "LEVELS",
    "CensusArea",
    "AreaProfile",
    "project",
    "unproject",
    "point_polygon_distance",
    "points_polygon_distance",
    "stops_within_buffer",
    "aggregate_area",
    "aggregate_areas",
    "rollup_profiles",
    "area_from_rings",
    "load_areas",
]

LEVELS = ("block", "block_group", "tract")

# geoid prefix length of each level (state 2 + county 3 + tract 6 + block 4)
GEOID_PREFIX = {"tract": 11, "block_group": 12, "block": 15}

DEG = math.pi / 180.0


def _check_latlon(lat, lon):
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0) or math.isnan(lat) or math.isnan(lon):
        raise ValidationError(f"invalid coordinate lat={lat}, lon={lon}")


def project(lat, lon, origin):
    """Equirectangular projection to planar feet about ``origin`` = (lat0, lon0).

    Accurate to well under a metre within about a degree of the origin.
    """
    lat0, lon0 = origin
    _check_latlon(lat, lon)
    _check_latlon(lat0, lon0)
    x = (lon - lon0) * DEG * math.cos(lat0 * DEG) * EARTH_RADIUS_FT
    y = (lat - lat0) * DEG * EARTH_RADIUS_FT
    return x, y


def unproject(x, y, origin):
    lat0, lon0 = origin
    _check_latlon(lat0, lon0)
    lat = lat0 + y / (DEG * EARTH_RADIUS_FT)
    lon = lon0 + x / (DEG * math.cos(lat0 * DEG) * EARTH_RADIUS_FT)
    return lat, lon


# ---------------------------------------------------------------------------
# polygons


def _ring_array(ring):
    arr = np.asarray(ring, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("ring must be a sequence of (x, y) points")
    if len(arr) < 4:
        raise ValidationError("ring needs at least 4 points (closed triangle)")
    if not np.array_equal(arr[0], arr[-1]):
        raise ValidationError("ring is not closed")
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
    return arr[keep]


def _signed_area(ring):
    x, y = ring[:-1, 0], ring[:-1, 1]
    x2, y2 = ring[1:, 0], ring[1:, 1]
    return 0.5 * float(np.sum(x * y2 - x2 * y))


def _ring_centroid(ring):
    x, y = ring[:-1, 0], ring[:-1, 1]
    x2, y2 = ring[1:, 0], ring[1:, 1]
    cross = x * y2 - x2 * y
    a = 0.5 * np.sum(cross)
    return np.sum((x + x2) * cross) / (6 * a), np.sum((y + y2) * cross) / (6 * a)


def _self_intersects(ring, chunk=256):
    a, b = ring[:-1], ring[1:]
    m = len(a)
    if m < 3:
        return True
    idx = np.arange(m)
    for start in range(0, m, chunk):
        i = idx[start : start + chunk, None]
        p, q = a[i[:, 0]][:, None, :], b[i[:, 0]][:, None, :]
        r, s = a[None, :, :], b[None, :, :]

        def orient(u, v, w):
            return (v[..., 0] - u[..., 0]) * (w[..., 1] - u[..., 1]) - (v[..., 1] - u[..., 1]) * (w[..., 0] - u[..., 0])

        o1, o2 = orient(p, q, r), orient(p, q, s)
        o3, o4 = orient(r, s, p), orient(r, s, q)
        hit = (np.sign(o1) * np.sign(o2) <= 0) & (np.sign(o3) * np.sign(o4) <= 0)
        # collinear pairs only touch when their extents overlap
        collinear = (o1 == 0) & (o2 == 0)
        lo_pq, hi_pq = np.minimum(p, q), np.maximum(p, q)
        lo_rs, hi_rs = np.minimum(r, s), np.maximum(r, s)
        overlap = np.all((lo_pq <= hi_rs) & (lo_rs <= hi_pq), axis=-1)
        hit &= ~collinear | overlap
        j = idx[None, :]
        adjacent = (np.abs(i - j) <= 1) | ((i == 0) & (j == m - 1)) | ((i == m - 1) & (j == 0))
        if np.any(hit & ~adjacent & (j > i)):
            return True
    return False


@dataclass(frozen=True, eq=False)
class CensusArea:
    """A census polygon (possibly multi-part, possibly with holes) in feet.

    ``polygons`` is a tuple of polygons, each a tuple of rings with the
    outer ring first.  Construct through :func:`area_from_rings` or
    :func:`load_areas` to get validation.
    """

    geoid: str
    level: str
    polygons: tuple
    centroid: tuple = (0.0, 0.0)
    area_sqft: float = 0.0
    geometry: dict | None = field(default=None, repr=False)  # original GeoJSON geometry
    _segments: np.ndarray = field(default=None, repr=False)

    def bounds(self):
        s = self._segments
        return (
            float(min(s[:, 0].min(), s[:, 2].min())),
            float(min(s[:, 1].min(), s[:, 3].min())),
            float(max(s[:, 0].max(), s[:, 2].max())),
            float(max(s[:, 1].max(), s[:, 3].max())),
        )


def area_from_rings(geoid, level, polygons, geometry=None, check_simple=True):
    """Validate rings and build a :class:`CensusArea`.

    ``polygons`` is a list of polygons, each a list of closed rings
    (outer first, then holes), coordinates in feet.
    """
    if level not in LEVELS:
        raise ValidationError(f"area {geoid}: unknown level {level!r}")
    if not polygons:
        raise ValidationError(f"area {geoid}: no polygons")
    clean, segs = [], []
    total, cx, cy = 0.0, 0.0, 0.0
    for poly in polygons:
        if not poly:
            raise ValidationError(f"area {geoid}: empty polygon")
        rings = []
        for k, raw in enumerate(poly):
            try:
                ring = _ring_array(raw)
            except ValidationError as exc:
                raise ValidationError(f"area {geoid}: {exc}") from None
            if check_simple and _self_intersects(ring):
                raise ValidationError(f"area {geoid}: ring {k} self-intersects")
            a = abs(_signed_area(ring))
            if a == 0.0:
                raise ValidationError(f"area {geoid}: ring {k} has zero area")
            sign = 1.0 if k == 0 else -1.0
            rx, ry = _ring_centroid(ring)
            total += sign * a
            cx += sign * a * rx
            cy += sign * a * ry
            rings.append(ring)
            segs.append(np.hstack([ring[:-1], ring[1:]]))
        clean.append(tuple(rings))
    if not total > 0.0:
        raise ValidationError(f"area {geoid}: non-positive area")
    return CensusArea(
        geoid=geoid,
        level=level,
        polygons=tuple(clean),
        centroid=(float(cx / total), float(cy / total)),
        area_sqft=float(total),
        geometry=geometry,
        _segments=np.vstack(segs),
    )


def points_polygon_distance(points, area):
    """Vectorised :func:`point_polygon_distance` for an (n, 2) array."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0)
    s = area._segments
    x1, y1, x2, y2 = (s[:, k][None, :] for k in range(4))
    px, py = pts[:, 0:1], pts[:, 1:2]

    # even-odd crossing count over every ring, holes included
    straddle = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
    inside = (np.count_nonzero(straddle & (px < xint), axis=1) % 2) == 1

    dx, dy = x2 - x1, y2 - y1
    len2 = dx * dx + dy * dy
    ax, ay = px - x1, py - y1
    dot = ax * dx + ay * dy
    # interior foot: |cross| / |edge| is exactly 0 for a point on the edge line,
    # which the foot-point difference x1 + t*dx is not after rounding
    with np.errstate(divide="ignore", invalid="ignore"):
        perp = np.abs(ax * dy - ay * dx) / np.sqrt(len2)
    d = np.where(
        (dot <= 0) | (len2 == 0),
        np.hypot(ax, ay),
        np.where(dot >= len2, np.hypot(px - x2, py - y2), perp),
    ).min(axis=1)
    return np.where(inside, 0.0, d)


def point_polygon_distance(p, area):
    """Distance in feet from ``p`` to ``area``; 0 inside or on the boundary."""
    return float(points_polygon_distance([p], area)[0])


def stops_within_buffer(area, stops, radius=500.0):
    """Ids of stops at most ``radius`` feet from the area (inside counts).

    ``stops`` maps stop id to a planar (x, y) point.
    """
    if radius < 0:
        raise ValueError("buffer radius must be non-negative")
    if not stops:
        return set()
    ids = list(stops)
    pts = np.asarray([stops[k] for k in ids], dtype=float)
    x0, y0, x1, y1 = area.bounds()
    near = (
        (pts[:, 0] >= x0 - radius)
        & (pts[:, 0] <= x1 + radius)
        & (pts[:, 1] >= y0 - radius)
        & (pts[:, 1] <= y1 + radius)
    )
    cand = np.flatnonzero(near)
    if len(cand) == 0:
        return set()
    d = points_polygon_distance(pts[cand], area)
    return {ids[i] for i, di in zip(cand, d) if di <= radius}


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class AreaProfile:
    geoid: str
    level: str
    ridership: int
    metrics: ConvenienceMetrics
    low_income_share: float
    purpose_shares: dict
    income_class: str
    assigned_stops: tuple

    def __hash__(self):
        return hash((self.geoid, self.level, self.ridership))

    def value(self, name):
        """Look up a metric or share by column name."""
        if name == "low_income_share":
            return self.low_income_share
        if name.startswith("p_") and name[2:] in self.purpose_shares:
            return self.purpose_shares[name[2:]]
        if name in self.purpose_shares:
            return self.purpose_shares[name]
        return getattr(self.metrics, name)


def _weighted(values, shares):
    return math.fsum(p * v for p, v in zip(shares, values))


def _combine(geoid, level, members, low_cut, high_cut):
    """Ridership-weighted combination of (weight, metrics, low, purposes, stops) tuples."""
    weights = [m[0] for m in members]
    total = math.fsum(weights)
    shares = [w / total for w in weights]
    low = _weighted([m[2] for m in members], shares)
    return AreaProfile(
        geoid=geoid,
        level=level,
        ridership=int(round(total)),
        metrics=ConvenienceMetrics.weighted_mean([m[1] for m in members], weights),
        low_income_share=low,
        purpose_shares={k: _weighted([m[3][k] for m in members], shares) for k in PURPOSES},
        income_class=classify_income(low, low_cut, high_cut),
        assigned_stops=tuple(sorted({s for m in members for s in m[4]})),
    )


def aggregate_area(area, profiles, stop_points, radius=500.0, low_cut=0.25, high_cut=0.50):
    """Ridership-weighted profile of the stops within ``radius`` of ``area``.

    Only stops with a profile carrying demographics take part.  Returns
    None when no such stop is in range.
    """
    eligible = {
        sid: stop_points[sid]
        for sid, prof in profiles.items()
        if prof.demographics is not None and sid in stop_points
    }
    chosen = sorted(stops_within_buffer(area, eligible, radius))
    if not chosen:
        return None
    members = [
        (
            profiles[s].ridership,
            profiles[s].metrics,
            profiles[s].demographics.low_income_share,
            profiles[s].demographics.purpose_shares,
            (s,),
        )
        for s in chosen
    ]
    return _combine(area.geoid, area.level, members, low_cut, high_cut)


def aggregate_areas(areas, profiles, stop_points, radius=500.0, low_cut=0.25, high_cut=0.50):
    """Aggregate every area; returns ``(profiles, uncovered_geoids)``."""
    out, uncovered = [], []
    for area in areas:
        prof = aggregate_area(area, profiles, stop_points, radius, low_cut, high_cut)
        if prof is None:
            uncovered.append(area.geoid)
        else:
            out.append(prof)
    return out, uncovered


def rollup_profiles(profiles, level="tract", low_cut=0.25, high_cut=0.50):
    """Display aggregation of finer area profiles to a coarser level.

    Groups by geoid prefix and applies the same ridership-weighted mean.
    """
    n = GEOID_PREFIX[level]
    groups = defaultdict(list)
    for p in profiles:
        groups[p.geoid[:n]].append(
            (p.ridership, p.metrics, p.low_income_share, p.purpose_shares, p.assigned_stops)
        )
    return [_combine(g, level, members, low_cut, high_cut) for g, members in sorted(groups.items())]


# ---------------------------------------------------------------------------
# GeoJSON


def load_areas(path, origin, level=None):
    """Read census areas from a GeoJSON FeatureCollection (WGS84 degrees).

    Features need ``geoid`` and ``level`` properties and a Polygon or
    MultiPolygon geometry.  Returns ``(areas, rejects)``; invalid geometry
    is rejected with the geoid rather than repaired.  ``level`` filters to
    one census level.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read areas file: {exc}", path=path) from exc
    if doc.get("type") != "FeatureCollection":
        raise IngestionError("areas file is not a GeoJSON FeatureCollection", path=path)
    areas, rejects = [], []
    for feat in doc.get("features", []):
        props = feat.get("properties") or {}
        geoid = str(props.get("geoid", ""))
        lvl = props.get("level")
        if level is not None and lvl != level:
            continue
        geom = feat.get("geometry") or {}
        if geom.get("type") == "Polygon":
            raw = [geom["coordinates"]]
        elif geom.get("type") == "MultiPolygon":
            raw = geom["coordinates"]
        else:
            rejects.append(Reject(geoid, "geometry_type", str(geom.get("type"))))
            continue
        try:
            polys = [[[project(lat, lon, origin) for lon, lat, *_ in ring] for ring in poly] for poly in raw]
            areas.append(area_from_rings(geoid, lvl, polys, geometry=geom))
        except (ValidationError, ValueError, TypeError) as exc:
            rejects.append(Reject(geoid, "invalid_geometry", str(exc)))
    return areas, rejects
