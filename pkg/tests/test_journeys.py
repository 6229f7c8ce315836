import math
import random
from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from journey_equity.errors import IngestionError, LookupFailure, OrderingError, ZeroDistanceError
from journey_equity.gtfs import Route, Stop, StopTime, TransitNetwork, Trip
from journey_equity.journeys import (
    LEG_COLUMNS,
    ConvenienceMetrics,
    RideLeg,
    compute_metrics,
    journey_metrics,
    link_journeys,
    load_legs,
    profiles_from_metrics,
    stop_profiles,
)

from conftest import write_csv


def line_network():
    """P -rail 2.0 mi- Q -bus 1.0- R -bus 1.0- S, plus a zero-length bus hop S-S2."""
    stops = {s: Stop(s, s, 42.0, -71.0) for s in ("P", "Q", "R", "S", "S2")}
    routes = {"RL": Route("RL", "Red", "rail", 1), "B1": Route("B1", "1", "bus", 3), "B2": Route("B2", "2", "bus", 3)}
    trips = {
        "TR": Trip("TR", "RL", (StopTime("P", 0.0), StopTime("Q", 2.0))),
        "TB1": Trip("TB1", "B1", (StopTime("Q", 0.0), StopTime("R", 1.0))),
        "TB2": Trip("TB2", "B2", (StopTime("R", 0.0), StopTime("S", 1.0), StopTime("S2", 1.0))),
        "TL": Trip("TL", "B1", (StopTime("P", 0.0), StopTime("Q", 0.5), StopTime("R", 2.0))),
    }
    return TransitNetwork(stops, routes, trips, (42.0, -71.0))


def t(hhmm):
    h, m = map(int, hhmm.split(":"))
    return datetime(2019, 1, 15, h, m)


def leg(jid, trip, route, mode, b, a, tb, ta, pid="p1"):
    return RideLeg(pid, jid, trip, route, mode, b, a, t(tb), t(ta))


THREE_LEGS = [
    leg("J1", "TR", "RL", "rail", "P", "Q", "8:00", "8:10"),
    leg("J1", "TB1", "B1", "bus", "Q", "R", "8:15", "8:30"),
    leg("J1", "TB2", "B2", "bus", "R", "S", "8:33", "8:40"),
]


def rows_for(legs):
    return [
        [l.passenger_id, l.journey_id, l.trip_id, l.route_id, l.mode, l.board_stop, l.alight_stop,
         l.board_time.isoformat(), l.alight_time.isoformat()]
        for l in legs
    ]


def test_link_three_legs():
    (j,), rej = link_journeys(THREE_LEGS[::-1])
    assert rej == []
    assert j.n_transfers == 2
    assert j.in_vehicle_minutes == 32
    assert j.transfer_wait_minutes == 8
    assert [l.board_stop for l in j.legs] == ["P", "Q", "R"]


def test_single_leg_journey():
    (j,), _ = link_journeys([THREE_LEGS[0]])
    assert j.n_transfers == 0 and j.transfer_wait_minutes == 0


def test_overlap_rejected():
    legs = [
        leg("J2", "TR", "RL", "rail", "P", "Q", "8:00", "8:10"),
        leg("J2", "TB1", "B1", "bus", "Q", "R", "8:05", "8:20"),
    ]
    js, rej = link_journeys(legs)
    assert js == [] and [r.reason for r in rej] == ["leg_overlap"]


def test_passenger_mismatch_rejected():
    legs = [THREE_LEGS[0], leg("J1", "TB1", "B1", "bus", "Q", "R", "8:15", "8:30", pid="p2")]
    js, rej = link_journeys(legs)
    assert js == [] and rej[0].reason == "passenger_mismatch"


def test_metrics_three_legs():
    (j,), _ = link_journeys(THREE_LEGS)
    m = journey_metrics(j, line_network())
    assert (m.time_per_mile, m.transfers_per_mile, m.transfer_wait_minutes, m.network_miles, m.rail_share) == (
        8.0, 0.5, 8.0, 4.0, 0.5)
    assert m.transfer_wait_per_mile == 2.0


def test_metrics_single_leg():
    (j,), _ = link_journeys([leg("J", "TL", "B1", "bus", "P", "R", "9:00", "9:10")])
    m = journey_metrics(j, line_network())
    assert (m.time_per_mile, m.transfers_per_mile, m.transfer_wait_minutes, m.network_miles, m.rail_share) == (
        5.0, 0.0, 0.0, 2.0, 0.0)


def test_metrics_stop_not_on_trip():
    (j,), _ = link_journeys([leg("J", "TR", "RL", "rail", "P", "S", "9:00", "9:10")])
    with pytest.raises(LookupFailure):
        journey_metrics(j, line_network())


def test_zero_distance_is_degenerate():
    (j,), _ = link_journeys([leg("J", "TB2", "B2", "bus", "S", "S2", "9:00", "9:01")])
    with pytest.raises(ZeroDistanceError):
        journey_metrics(j, line_network())
    assert issubclass(ZeroDistanceError, OrderingError)
    ok, rej = compute_metrics([j], line_network())
    assert ok == [] and rej[0].reason == "zero_distance"


def test_load_legs_happy(tmp_path):
    p = tmp_path / "legs.csv"
    write_csv(p, LEG_COLUMNS, rows_for(THREE_LEGS[:2]))
    legs, rej = load_legs(str(p))
    assert len(legs) == 2 and rej == []
    assert legs[0] == THREE_LEGS[0]


def test_load_legs_time_order(tmp_path):
    p = tmp_path / "legs.csv"
    rows = rows_for([THREE_LEGS[0]])
    rows[0][7], rows[0][8] = rows[0][8], rows[0][7]
    write_csv(p, LEG_COLUMNS, rows)
    legs, rej = load_legs(str(p))
    assert legs == [] and [r.reason for r in rej] == ["time_order"]


def test_load_legs_header_only(tmp_path):
    p = tmp_path / "legs.csv"
    write_csv(p, LEG_COLUMNS, [])
    assert load_legs(str(p)) == ([], [])


def test_load_legs_bad_header(tmp_path):
    p = tmp_path / "legs.csv"
    write_csv(p, LEG_COLUMNS[:-1], [])
    with pytest.raises(IngestionError, match="alight_time"):
        load_legs(str(p))


@pytest.mark.parametrize(
    "col,value,reason",
    [(7, "yesterday", "bad_timestamp"), (4, "ferry", "bad_mode"), (2, "", "missing_field"), (6, "P", "same_stop")],
)
def test_row_level_rejects(tmp_path, col, value, reason):
    p = tmp_path / "legs.csv"
    rows = rows_for([THREE_LEGS[0]])
    rows[0][col] = value
    write_csv(p, LEG_COLUMNS, rows)
    legs, rej = load_legs(str(p))
    assert legs == [] and rej[0].reason == reason and rej[0].journey_id == "J1"


def test_utc_offsets_normalised(tmp_path):
    p = tmp_path / "legs.csv"
    rows = rows_for([THREE_LEGS[0]])
    rows[0][7] = "2019-01-15T13:00:00+05:00"
    rows[0][8] = "2019-01-15T08:10:00Z"
    write_csv(p, LEG_COLUMNS, rows)
    (l,), _ = load_legs(str(p))
    assert l.minutes == 10


def test_stop_profiles_mean():
    net = line_network()
    # TL from P: 12 min over 2 mi -> 6; 20 min -> 10
    js, _ = link_journeys([
        leg("A", "TL", "B1", "bus", "P", "R", "9:00", "9:12"),
        leg("B", "TL", "B1", "bus", "P", "R", "9:00", "9:20"),
    ])
    prof = stop_profiles(js, net)
    assert prof["P"].ridership == 2 and prof["P"].metrics.time_per_mile == 8.0
    assert stop_profiles([], net) == {}
    single = stop_profiles(js[:1], net)["P"]
    assert single.ridership == 1 and single.metrics == journey_metrics(js[0], net)


def test_weighted_mean_rejects_empty():
    with pytest.raises(ValueError):
        ConvenienceMetrics.weighted_mean([])


def random_journeys(rng, n):
    """Journeys on the TL trip (P, Q, R) with random times and transfers."""
    hops = [("P", "Q"), ("P", "R"), ("Q", "R")]
    legs = []
    for k in range(n):
        clock = datetime(2019, 1, 15, 6) + timedelta(minutes=rng.randrange(600))
        for _ in range(rng.randint(1, 3)):
            b, a = rng.choice(hops)
            ride = timedelta(minutes=rng.randint(1, 30), seconds=rng.randrange(60))
            legs.append(RideLeg(f"p{k}", f"J{k:03d}", "TL", "B1", "bus", b, a, clock, clock + ride))
            clock += ride + timedelta(minutes=rng.randint(0, 15))
    return legs


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_properties(seed, n):
    rng = random.Random(seed)
    net = line_network()
    legs = random_journeys(rng, n)
    js, rej = link_journeys(legs)
    assert rej == [] and len(js) == n
    pairs, mrej = compute_metrics(js, net)
    assert len(pairs) + len(mrej) == n
    for j, m in pairs:
        assert j.in_vehicle_minutes + j.transfer_wait_minutes <= j.elapsed_minutes + 1e-9
        assert m.transfers_per_mile * m.network_miles == pytest.approx(j.n_transfers, abs=1e-12)
        assert 0.0 <= m.rail_share <= 1.0
        assert all(math.isfinite(v) and v >= 0 for v in m.as_dict().values())
    profiles = profiles_from_metrics(pairs)
    assert sum(p.ridership for p in profiles.values()) == len(pairs)
    # permutation invariance
    shuffled = legs[:]
    rng.shuffle(shuffled)
    js2, _ = link_journeys(shuffled)
    assert profiles_from_metrics(compute_metrics(js2, net)[0]) == profiles
