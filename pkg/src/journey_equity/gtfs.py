"""GTFS static feed ingestion and in-network distance lookup.

Only the four core files are read (``stops``, ``routes``, ``trips``,
``stop_times``).  Distances along a trip come from ``shape_dist_traveled``
when every stop time of the trip carries it; otherwise they are chained
great-circle distances between consecutive stops.  Everything is held in
miles internally.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .errors import IngestionError, LookupFailure, OrderingError, ValidationError, ZeroDistanceError
from .units import from_miles, haversine_miles, to_miles

__all__ = [
    "Stop",
    "Route",
    "StopTime",
    "Trip",
    "TransitNetwork",
    "parse_feed",
    "write_feed",
    "leg_distance",
    "feed_summary",
    "mode_for_route_type",
]

REQUIRED_FILES = ("stops", "routes", "trips", "stop_times")

REQUIRED_COLUMNS = {
    "stops": ("stop_id", "stop_lat", "stop_lon"),
    "routes": ("route_id", "route_type"),
    "trips": ("route_id", "trip_id"),
    "stop_times": ("trip_id", "stop_id", "stop_sequence"),
}

BUS_ROUTE_TYPES = frozenset({3})
RAIL_ROUTE_TYPES = frozenset({0, 1, 2})


def mode_for_route_type(route_type):
    """Map a GTFS ``route_type`` to ``"bus"`` or ``"rail"``.

    Any other type (ferry, cable car, ...) is outside the analysed network
    and raises :class:`ValidationError`.
    """
    rt = int(route_type)
    if rt in BUS_ROUTE_TYPES:
        return "bus"
    if rt in RAIL_ROUTE_TYPES:
        return "rail"
    raise ValidationError(f"unsupported route_type {rt}; only 3 (bus) and 0/1/2 (rail) are analysed")


@dataclass(frozen=True)
class Stop:
    stop_id: str
    name: str
    lat: float
    lon: float
    mode: str | None = None  # "rail" if any rail route serves the stop, None if unserved


@dataclass(frozen=True)
class Route:
    route_id: str
    short_name: str
    mode: str
    route_type: int


@dataclass(frozen=True)
class StopTime:
    stop_id: str
    cum_miles: float
    arrival: int | None = None  # seconds past midnight, may exceed 86400
    departure: int | None = None


@dataclass(frozen=True)
class Trip:
    trip_id: str
    route_id: str
    stop_times: tuple[StopTime, ...] = ()

    def position(self, stop_id, start=0):
        """Index of the first visit to ``stop_id`` at or after ``start``."""
        for i in range(start, len(self.stop_times)):
            if self.stop_times[i].stop_id == stop_id:
                return i
        raise LookupFailure(f"stop {stop_id!r} is not served by trip {self.trip_id!r}")


@dataclass(frozen=True)
class TransitNetwork:
    """Immutable stops/routes/trips bundle.

    Mappings are wrapped read-only on construction and every reference is
    validated, so a constructed network is always internally consistent.
    """

    stops: Mapping[str, Stop]
    routes: Mapping[str, Route]
    trips: Mapping[str, Trip]
    region_origin: tuple[float, float] = (0.0, 0.0)
    _stop_routes: Mapping[str, frozenset] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stops", MappingProxyType(dict(self.stops)))
        object.__setattr__(self, "routes", MappingProxyType(dict(self.routes)))
        object.__setattr__(self, "trips", MappingProxyType(dict(self.trips)))
        object.__setattr__(self, "region_origin", tuple(float(v) for v in self.region_origin))
        index: dict[str, set] = {}
        for trip in self.trips.values():
            if trip.route_id not in self.routes:
                raise ValidationError(f"trip {trip.trip_id!r} references unknown route {trip.route_id!r}")
            dangling = sorted({st.stop_id for st in trip.stop_times} - self.stops.keys())
            if dangling:
                raise ValidationError(f"trip {trip.trip_id!r} references unknown stops {dangling}")
            prev = 0.0
            for k, st in enumerate(trip.stop_times):
                if k == 0 and st.cum_miles != 0.0:
                    raise ValidationError(f"trip {trip.trip_id!r} cumulative distance does not start at 0")
                if st.cum_miles < prev:
                    raise ValidationError(f"trip {trip.trip_id!r} has decreasing cumulative distance")
                prev = st.cum_miles
                index.setdefault(st.stop_id, set()).add(trip.route_id)
        object.__setattr__(
            self, "_stop_routes", MappingProxyType({k: frozenset(v) for k, v in index.items()})
        )

    def routes_serving(self, stop_id):
        """Route ids with at least one trip stopping at ``stop_id``."""
        return self._stop_routes.get(stop_id, frozenset())

    def trip(self, trip_id):
        try:
            return self.trips[trip_id]
        except KeyError:
            raise LookupFailure(f"unknown trip {trip_id!r}") from None


def leg_distance(network, trip_id, board_stop, alight_stop):
    """Network miles ridden on ``trip_id`` between two of its stops.

    The first visit to ``board_stop`` is used, then the first visit to
    ``alight_stop`` strictly after it.  Raises :class:`LookupFailure` when a
    stop is not on the trip and :class:`OrderingError` when the alighting
    stop is not downstream of the boarding stop, or
    :class:`~journey_equity.errors.ZeroDistanceError` (an ordering error) when
    both sit at the same cumulative distance.
    """
    trip = network.trip(trip_id)
    i = trip.position(board_stop)
    try:
        j = trip.position(alight_stop, i + 1)
    except LookupFailure:
        # distinguish "not on trip at all" from "only upstream / same stop"
        trip.position(alight_stop)
        raise OrderingError(
            f"on trip {trip_id!r}, {alight_stop!r} does not come after {board_stop!r}"
        ) from None
    dist = trip.stop_times[j].cum_miles - trip.stop_times[i].cum_miles
    if dist <= 0.0:
        raise ZeroDistanceError(f"zero distance between {board_stop!r} and {alight_stop!r} on {trip_id!r}")
    return dist


# ---------------------------------------------------------------------------
# parsing


def _read_table(directory, name, required):
    path = os.path.join(directory, f"{name}.txt")
    if not os.path.isfile(path):
        if required:
            raise IngestionError(f"GTFS feed is missing {name}.txt", path=path)
        return None
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in REQUIRED_COLUMNS.get(name, ()) if c not in header]
        if missing:
            raise IngestionError(f"{name}.txt lacks columns {missing}", path=path)
        reader.fieldnames = header
        return [{k: (v or "").strip() for k, v in row.items() if k is not None} for row in reader]


def _parse_clock(text):
    if not text:
        return None
    try:
        h, m, s = text.split(":")
        return int(h) * 3600 + int(m) * 60 + int(s)
    except ValueError:
        raise ValidationError(f"bad GTFS time {text!r}") from None


def _format_clock(seconds):
    if seconds is None:
        return ""
    h, rem = divmod(int(seconds), 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"


def parse_feed(directory, distance_unit="m"):
    """Parse a GTFS directory into a :class:`TransitNetwork`.

    ``distance_unit`` states the unit of ``shape_dist_traveled`` in the feed
    (GTFS leaves it to the producer).  A trip's distances are rebased so the
    first stop sits at 0.
    """
    tables = {name: _read_table(directory, name, True) for name in REQUIRED_FILES}

    routes = {}
    for row in tables["routes"]:
        try:
            rt = int(row["route_type"])
        except ValueError:
            raise ValidationError(f"route {row['route_id']!r} has non-integer route_type") from None
        routes[row["route_id"]] = Route(
            route_id=row["route_id"],
            short_name=row.get("route_short_name", "") or row.get("route_long_name", ""),
            mode=mode_for_route_type(rt),
            route_type=rt,
        )

    trip_routes = {row["trip_id"]: row["route_id"] for row in tables["trips"]}

    by_trip: dict[str, list] = {tid: [] for tid in trip_routes}
    for row in tables["stop_times"]:
        tid = row["trip_id"]
        if tid not in by_trip:
            raise ValidationError(f"stop_times references unknown trip {tid!r}")
        by_trip[tid].append(row)

    raw_stops = {}
    for row in tables["stops"]:
        try:
            lat, lon = float(row["stop_lat"]), float(row["stop_lon"])
        except ValueError:
            raise ValidationError(f"stop {row['stop_id']!r} has unparseable coordinates") from None
        raw_stops[row["stop_id"]] = (row.get("stop_name", ""), lat, lon)

    trips = {}
    for tid, rows in by_trip.items():
        rows.sort(key=lambda r: int(r["stop_sequence"]))
        dangling = sorted({r["stop_id"] for r in rows} - raw_stops.keys())
        if dangling:
            raise ValidationError(f"trip {tid!r} references stops missing from stops.txt: {dangling}")
        trips[tid] = Trip(tid, trip_routes[tid], _trip_stop_times(tid, rows, raw_stops, distance_unit))

    rail_stops = set()
    served = set()
    for trip in trips.values():
        route = routes.get(trip.route_id)
        if route is None:
            raise ValidationError(f"trip {trip.trip_id!r} references unknown route {trip.route_id!r}")
        for st in trip.stop_times:
            served.add(st.stop_id)
            if route.mode == "rail":
                rail_stops.add(st.stop_id)

    stops = {}
    for sid, (name, lat, lon) in raw_stops.items():
        mode = "rail" if sid in rail_stops else ("bus" if sid in served else None)
        stops[sid] = Stop(sid, name, lat, lon, mode)

    if stops:
        origin = (
            sum(s.lat for s in stops.values()) / len(stops),
            sum(s.lon for s in stops.values()) / len(stops),
        )
    else:
        origin = (0.0, 0.0)
    return TransitNetwork(stops, routes, trips, origin)


def _trip_stop_times(tid, rows, raw_stops, unit):
    have_dist = bool(rows) and all(r.get("shape_dist_traveled", "") != "" for r in rows)
    if have_dist:
        raw = [to_miles(r["shape_dist_traveled"], unit) for r in rows]
        for a, b in zip(raw, raw[1:]):
            if b < a:
                raise ValidationError(f"trip {tid!r} has non-monotone shape_dist_traveled")
        cum = [d - raw[0] for d in raw]
    else:
        cum = [0.0]
        for prev, cur in zip(rows, rows[1:]):
            _, lat1, lon1 = raw_stops[prev["stop_id"]]
            _, lat2, lon2 = raw_stops[cur["stop_id"]]
            cum.append(cum[-1] + haversine_miles(lat1, lon1, lat2, lon2))
    return tuple(
        StopTime(
            stop_id=r["stop_id"],
            cum_miles=c,
            arrival=_parse_clock(r.get("arrival_time", "")),
            departure=_parse_clock(r.get("departure_time", "")),
        )
        for r, c in zip(rows, cum)
    )


def write_feed(network, directory, distance_unit="mi"):
    """Serialize ``network`` as a GTFS directory readable by :func:`parse_feed`.

    Floats are written with ``repr`` so a parse with the same
    ``distance_unit`` reproduces the network exactly.
    """
    os.makedirs(directory, exist_ok=True)

    def dump(name, header, rows):
        with open(os.path.join(directory, f"{name}.txt"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    dump(
        "stops",
        ["stop_id", "stop_name", "stop_lat", "stop_lon"],
        [[s.stop_id, s.name, repr(s.lat), repr(s.lon)] for s in network.stops.values()],
    )
    dump(
        "routes",
        ["route_id", "route_short_name", "route_type"],
        [[r.route_id, r.short_name, r.route_type] for r in network.routes.values()],
    )
    dump(
        "trips",
        ["route_id", "service_id", "trip_id"],
        [[t.route_id, "all", t.trip_id] for t in network.trips.values()],
    )
    dump(
        "stop_times",
        ["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence", "shape_dist_traveled"],
        [
            [
                t.trip_id,
                _format_clock(st.arrival),
                _format_clock(st.departure),
                st.stop_id,
                k + 1,
                repr(from_miles(st.cum_miles, distance_unit)),
            ]
            for t in network.trips.values()
            for k, st in enumerate(t.stop_times)
        ],
    )


def feed_summary(network):
    """Count summary used by the ``validate`` diagnostic."""
    modes = [r.mode for r in network.routes.values()]
    return {
        "stops": len(network.stops),
        "routes": len(network.routes),
        "bus_routes": modes.count("bus"),
        "rail_routes": modes.count("rail"),
        "trips": len(network.trips),
        "stop_times": sum(len(t.stop_times) for t in network.trips.values()),
        "network_miles": round(sum(t.stop_times[-1].cum_miles for t in network.trips.values() if t.stop_times), 6),
    }
