import json
import math
import random

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from journey_equity.demographics import PURPOSES, DemographicShares
from journey_equity.errors import ValidationError
from journey_equity.journeys import ConvenienceMetrics, StopProfile
from journey_equity.spatial import (
    aggregate_area,
    aggregate_areas,
    area_from_rings,
    load_areas,
    point_polygon_distance,
    points_polygon_distance,
    project,
    rollup_profiles,
    stops_within_buffer,
    unproject,
)
from journey_equity.units import EARTH_RADIUS_FT

from conftest import grid_blocks, rect_distance, rect_ring

ORIGIN = (42.36, -71.06)


def square(x0=0.0, y0=0.0, side=1000.0, geoid="sq"):
    return area_from_rings(geoid, "block", [[rect_ring(x0, y0, x0 + side, y0 + side)]])


def profile(sid, ridership, tpm=5.0, low=0.3, demographics=True):
    m = ConvenienceMetrics(tpm, 0.1 * tpm, 2.0, 3.0, 0.25, 0.5)
    d = DemographicShares(low, dict(zip(PURPOSES, [0.2] * 5)), 10) if demographics else None
    return StopProfile(sid, ridership, m, d)


def test_projection_examples():
    assert project(*ORIGIN, ORIGIN) == (0.0, 0.0)
    x, y = project(ORIGIN[0] + 0.01, ORIGIN[1], ORIGIN)
    assert x == 0.0
    assert y == pytest.approx(0.01 * math.pi / 180 * 20_902_231, rel=1e-12)
    assert round(y) == 3648
    with pytest.raises(ValidationError):
        project(95.0, -71.0, ORIGIN)
    with pytest.raises(ValidationError):
        project(42.0, 181.0, ORIGIN)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_projection_roundtrip(dlat, dlon):
    lat, lon = ORIGIN[0] + dlat, ORIGIN[1] + dlon
    x, y = project(lat, lon, ORIGIN)
    x2, y2 = project(*unproject(x, y, ORIGIN), ORIGIN)
    assert abs(x2 - x) < 1e-6 and abs(y2 - y) < 1e-6


def test_projection_scale_against_great_circle():
    # a short east-west hop at the origin latitude: equirectangular and arc agree closely
    x, _ = project(ORIGIN[0], ORIGIN[1] + 0.001, ORIGIN)
    expected = math.cos(math.radians(ORIGIN[0])) * math.radians(0.001) * EARTH_RADIUS_FT
    assert x == pytest.approx(expected, rel=1e-9)  # lon - lon0 rounding


def test_distance_hand_values():
    sq = square()
    assert point_polygon_distance(sq.centroid, sq) == 0.0
    assert point_polygon_distance((1300.0, 500.0), sq) == pytest.approx(300.0)
    assert point_polygon_distance((0.0, 0.0), sq) == 0.0
    assert point_polygon_distance((500.0, 1000.0), sq) == 0.0
    assert point_polygon_distance((1300.0, 1400.0), sq) == pytest.approx(500.0)


def test_points_on_edges_are_exactly_zero():
    # off-grid coordinates along shared block edges must not pick up rounding
    sq = square(2000.0, 500.0, 500.0)
    ys = np.random.default_rng(0).uniform(500, 1000, 200)
    pts = np.column_stack([np.full(200, 2500.0), ys])
    assert np.all(points_polygon_distance(pts, sq) == 0.0)
    assert stops_within_buffer(sq, {"e": (2500.0, 882.5627916470027)}, 0.0) == {"e"}


def test_hole():
    donut = area_from_rings(
        "d", "block", [[rect_ring(0, 0, 1000, 1000), rect_ring(400, 400, 600, 600)[::-1]]]
    )
    assert donut.area_sqft == pytest.approx(1e6 - 4e4)
    assert point_polygon_distance((500.0, 500.0), donut) == pytest.approx(100.0)
    assert point_polygon_distance((450.0, 500.0), donut) == pytest.approx(50.0)
    assert point_polygon_distance((400.0, 500.0), donut) == 0.0
    assert point_polygon_distance((200.0, 500.0), donut) == 0.0


def test_invalid_rings():
    with pytest.raises(ValidationError, match="self-intersects"):
        area_from_rings("bow", "block", [[[(0, 0), (10, 10), (10, 0), (0, 10), (0, 0)]]])
    with pytest.raises(ValidationError):
        area_from_rings("open", "block", [[[(0, 0), (10, 0), (10, 10)]]])
    with pytest.raises(ValidationError):
        area_from_rings("flat", "block", [[[(0, 0), (10, 0), (20, 0), (0, 0)]]])
    with pytest.raises(ValidationError):
        area_from_rings("lvl", "county", [[rect_ring(0, 0, 1, 1)]])


# ten-plus constructed polygons, each checked against shapely
POLYGONS = [
    [[rect_ring(0, 0, 1000, 1000)]],
    [[[(0, 0), (800, 0), (400, 700), (0, 0)]]],
    [[[(0, 0), (1000, 0), (1000, 1000), (500, 400), (0, 1000), (0, 0)]]],  # concave
    [[rect_ring(0, 0, 1000, 1000), rect_ring(300, 300, 700, 700)[::-1]]],  # hole
    [[rect_ring(0, 0, 300, 300)], [rect_ring(600, 600, 900, 900)]],  # multipolygon
    [[[(0, 0), (600, -200), (1200, 0), (1000, 900), (300, 1100), (-200, 500), (0, 0)]]],
    [[[(0, 0), (1000, 0), (1000, 200), (200, 200), (200, 800), (1000, 800), (1000, 1000), (0, 1000), (0, 0)]]],
    [[[(500 + 400 * math.cos(a), 500 + 400 * math.sin(a)) for a in np.linspace(0, 2 * math.pi, 33)[:-1]]
      + [(900.0, 500.0)]]],
    [[rect_ring(-500, -500, 500, 500), rect_ring(-400, -400, -100, -100)[::-1], rect_ring(100, 100, 400, 400)[::-1]]],
    [[[(0, 0), (50, 0), (50, 2000), (0, 2000), (0, 0)]]],
    [[[(0, 0), (1000, 1), (0, 2), (0, 0)]]],  # sliver
]


@pytest.mark.parametrize("k", range(len(POLYGONS)))
def test_distance_matches_shapely(k):
    polys = POLYGONS[k]
    area = area_from_rings(f"p{k}", "block", polys)
    ref = shapely.MultiPolygon([(p[0], p[1:]) for p in polys])
    rng = np.random.default_rng(k)
    pts = rng.uniform(-1500, 2500, size=(400, 2))
    # include every vertex and a few edge midpoints
    verts = np.array([v for p in polys for ring in p for v in ring])
    pts = np.vstack([pts, verts, (verts[:-1] + verts[1:]) / 2])
    got = points_polygon_distance(pts, area)
    want = shapely.distance(shapely.points(pts), ref)
    np.testing.assert_allclose(got, want, atol=1e-7)
    assert area.area_sqft == pytest.approx(ref.area, rel=1e-12)
    assert np.allclose(area.centroid, (ref.centroid.x, ref.centroid.y), atol=1e-6)


def test_buffer_examples():
    sq = square()
    stops = {"in": (500.0, 500.0), "out600": (1600.0, 500.0)}
    assert stops_within_buffer(sq, stops, 0) == {"in"}
    assert stops_within_buffer(sq, stops, 500) == {"in"}
    assert stops_within_buffer(sq, stops, 1000) == {"in", "out600"}
    assert stops_within_buffer(sq, {}, 500) == set()
    with pytest.raises(ValueError):
        stops_within_buffer(sq, stops, -1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 1500), st.floats(0, 1500))
def test_buffer_brute_force_and_monotone(seed, r1, r2):
    rng = random.Random(seed)
    blocks = grid_blocks(rng.randint(1, 10), rng.randint(1, 10), 500.0)
    stops = {f"s{i}": (rng.uniform(-800, 5800), rng.uniform(-800, 5800)) for i in range(rng.randint(0, 50))}
    lo, hi = sorted((r1, r2))
    for geoid, rect in blocks:
        area = area_from_rings(geoid, "block", [[rect_ring(*rect)]])
        got_lo = stops_within_buffer(area, stops, lo)
        got_hi = stops_within_buffer(area, stops, hi)
        assert got_lo == {s for s, p in stops.items() if rect_distance(p, rect) <= lo}
        assert got_lo <= got_hi


def test_aggregate_weighted_example():
    sq = square()
    profiles = {"a": profile("a", 100, tpm=6.0, low=0.1), "b": profile("b", 300, tpm=10.0, low=0.6)}
    pts = {"a": (100.0, 100.0), "b": (900.0, 900.0)}
    ap = aggregate_area(sq, profiles, pts, 500)
    assert ap.metrics.time_per_mile == 9.0
    assert ap.low_income_share == pytest.approx(0.475, abs=1e-15)
    assert ap.ridership == 400 and ap.assigned_stops == ("a", "b")
    assert ap.income_class == "middle"


def test_aggregate_singleton_and_none():
    sq = square()
    one = aggregate_area(sq, {"a": profile("a", 7, tpm=4.0, low=0.6)}, {"a": (5.0, 5.0)}, 500)
    assert one.metrics == profile("a", 7, tpm=4.0).metrics
    assert one.low_income_share == 0.6 and one.income_class == "low_income"
    assert aggregate_area(sq, {"a": profile("a", 7, demographics=False)}, {"a": (5.0, 5.0)}, 500) is None
    assert aggregate_area(sq, {"a": profile("a", 7)}, {"a": (5000.0, 5.0)}, 500) is None


def test_aggregate_order_invariant_and_bounded():
    rng = random.Random(3)
    sq = square()
    items = [(f"s{i}", profile(f"s{i}", rng.randint(1, 50), rng.uniform(2, 12), rng.random())) for i in range(20)]
    pts = {sid: (rng.uniform(-400, 1400), rng.uniform(-400, 1400)) for sid, _ in items}
    a = aggregate_area(sq, dict(items), pts, 500)
    b = aggregate_area(sq, dict(items[::-1]), pts, 500)
    assert a == b and a.metrics == b.metrics
    vals = [p.metrics.time_per_mile for s, p in items if s in a.assigned_stops]
    assert min(vals) <= a.metrics.time_per_mile <= max(vals)


def test_aggregate_areas_and_rollup():
    sqs = [square(0, 0, 1000, "250250100001000"), square(1000, 0, 1000, "250250100001001"),
           square(5000, 0, 1000, "250250200001000")]
    profiles = {"a": profile("a", 10, 4.0, 0.2), "b": profile("b", 30, 8.0, 0.6)}
    pts = {"a": (500.0, 500.0), "b": (1500.0, 500.0)}
    out, uncovered = aggregate_areas(sqs, profiles, pts, 0)
    assert uncovered == ["250250200001000"] and len(out) == 2
    (tract,) = rollup_profiles(out, "tract")
    assert tract.geoid == "25025010000" and tract.ridership == 40
    assert tract.metrics.time_per_mile == pytest.approx(7.0)


def test_load_areas(tmp_path):
    def feature(geoid, geom):
        return {"type": "Feature", "properties": {"geoid": geoid, "level": "block"}, "geometry": geom}

    lat, lon = ORIGIN
    sq = [[lon, lat], [lon + 0.001, lat], [lon + 0.001, lat + 0.001], [lon, lat + 0.001], [lon, lat]]
    bow = [[lon, lat], [lon + 0.001, lat + 0.001], [lon + 0.001, lat], [lon, lat + 0.001], [lon, lat]]
    doc = {"type": "FeatureCollection", "features": [
        feature("ok", {"type": "Polygon", "coordinates": [sq]}),
        feature("multi", {"type": "MultiPolygon", "coordinates": [[sq]]}),
        feature("bow", {"type": "Polygon", "coordinates": [bow]}),
        feature("pt", {"type": "Point", "coordinates": [lon, lat]}),
    ]}
    p = tmp_path / "a.geojson"
    p.write_text(json.dumps(doc))
    areas, rejects = load_areas(str(p), ORIGIN)
    assert [a.geoid for a in areas] == ["ok", "multi"]
    assert [(r.journey_id, r.reason) for r in rejects] == [("bow", "invalid_geometry"), ("pt", "geometry_type")]
    x0, y0, x1, y1 = areas[0].bounds()
    assert (x0, y0) == (0.0, 0.0) and y1 == pytest.approx(0.001 * math.pi / 180 * EARTH_RADIUS_FT)
