"""Ride-leg ingestion, journey linking and per-journey convenience metrics.

A ride leg is one boarding-to-alighting segment as produced by an upstream
origin/destination/transfer inference.  Legs sharing a journey id form a
journey; its convenience metrics are normalised by the distance actually
ridden through the network (sum of leg distances).

Nothing in here raises on dirty data: bad rows and bad journeys are
returned as :class:`Reject` records with a machine-readable reason.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, fields
from datetime import datetime, timezone

from .errors import (
    DegenerateJourneyError,
    IngestionError,
    LookupFailure,
    OrderingError,
    ZeroDistanceError,
)
from .gtfs import leg_distance

__all__ = [
    "LEG_COLUMNS",
    "RideLeg",
    "Journey",
    "ConvenienceMetrics",
    "StopProfile",
    "Reject",
    "load_legs",
    "link_journeys",
    "journey_metrics",
    "compute_metrics",
    "stop_profiles",
    "profiles_from_metrics",
    "write_rejects",
]

LEG_COLUMNS = (
    "passenger_id",
    "journey_id",
    "trip_id",
    "route_id",
    "mode",
    "board_stop",
    "alight_stop",
    "board_time",
    "alight_time",
)

MODES = ("bus", "rail")


@dataclass(frozen=True)
class Reject:
    journey_id: str
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class RideLeg:
    passenger_id: str
    journey_id: str
    trip_id: str
    route_id: str
    mode: str
    board_stop: str
    alight_stop: str
    board_time: datetime
    alight_time: datetime

    @property
    def minutes(self):
        return (self.alight_time - self.board_time).total_seconds() / 60.0


@dataclass(frozen=True)
class Journey:
    journey_id: str
    passenger_id: str
    legs: tuple[RideLeg, ...]

    @property
    def n_transfers(self):
        return len(self.legs) - 1

    @property
    def origin_stop(self):
        return self.legs[0].board_stop

    @property
    def in_vehicle_minutes(self):
        return math.fsum(leg.minutes for leg in self.legs)

    @property
    def transfer_wait_minutes(self):
        return math.fsum(
            (nxt.board_time - prev.alight_time).total_seconds() / 60.0
            for prev, nxt in zip(self.legs, self.legs[1:])
        )

    @property
    def elapsed_minutes(self):
        return (self.legs[-1].alight_time - self.legs[0].board_time).total_seconds() / 60.0

    def leg_miles(self, network):
        return [leg_distance(network, leg.trip_id, leg.board_stop, leg.alight_stop) for leg in self.legs]


@dataclass(frozen=True)
class ConvenienceMetrics:
    """Distance-normalised convenience of one journey (or a mean of many).

    ``transfer_wait_minutes`` is per journey, not per mile;
    ``transfer_wait_per_mile`` carries the normalised variant for runs that
    want it.
    """

    time_per_mile: float
    transfers_per_mile: float
    transfer_wait_minutes: float
    network_miles: float
    rail_share: float
    transfer_wait_per_mile: float = 0.0

    @classmethod
    def names(cls):
        return tuple(f.name for f in fields(cls))

    def as_dict(self):
        return {name: getattr(self, name) for name in self.names()}

    @classmethod
    def weighted_mean(cls, items, weights=None):
        """Field-wise weighted mean; equal weights when ``weights`` is None."""
        items = list(items)
        if not items:
            raise ValueError("cannot average zero metric records")
        if weights is None:
            weights = [1.0] * len(items)
        total = math.fsum(weights)
        shares = [w / total for w in weights]
        return cls(
            **{
                name: math.fsum(p * getattr(m, name) for p, m in zip(shares, items))
                for name in cls.names()
            }
        )


@dataclass(frozen=True)
class StopProfile:
    stop_id: str
    ridership: int
    metrics: ConvenienceMetrics
    demographics: object = None  # DemographicShares once joined


# ---------------------------------------------------------------------------
# ingestion


def _parse_time(text):
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts


def _leg_from_row(row):
    """Build a leg from a CSV row, or return the reject reason."""
    jid = row.get("journey_id", "")
    for col in LEG_COLUMNS:
        if not row.get(col):
            return Reject(jid, "missing_field", col)
    if row["mode"] not in MODES:
        return Reject(jid, "bad_mode", row["mode"])
    try:
        board = _parse_time(row["board_time"])
        alight = _parse_time(row["alight_time"])
    except ValueError as exc:
        return Reject(jid, "bad_timestamp", str(exc))
    if alight < board:
        return Reject(jid, "time_order", f"{row['board_time']} > {row['alight_time']}")
    if row["board_stop"] == row["alight_stop"]:
        return Reject(jid, "same_stop", row["board_stop"])
    return RideLeg(
        passenger_id=row["passenger_id"],
        journey_id=jid,
        trip_id=row["trip_id"],
        route_id=row["route_id"],
        mode=row["mode"],
        board_stop=row["board_stop"],
        alight_stop=row["alight_stop"],
        board_time=board,
        alight_time=alight,
    )


def load_legs(path):
    """Read a ride-leg CSV.

    Returns ``(legs, rejects)``.  A header lacking any of
    :data:`LEG_COLUMNS` raises :class:`IngestionError`; row-level problems
    become rejects tagged ``missing_field``, ``bad_mode``,
    ``bad_timestamp``, ``time_order`` or ``same_stop``.
    """
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise IngestionError(f"cannot open legs file: {exc}", path=path) from exc
    with fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in LEG_COLUMNS if c not in header]
        if missing:
            raise IngestionError(f"legs file header lacks {missing}", path=path)
        reader.fieldnames = header
        legs, rejects = [], []
        for row in reader:
            row = {k: (v or "").strip() for k, v in row.items() if k is not None}
            out = _leg_from_row(row)
            (rejects if isinstance(out, Reject) else legs).append(out)
    return legs, rejects


def link_journeys(legs):
    """Group legs by journey id into time-ordered journeys.

    Returns ``(journeys, rejects)`` with journeys sorted by id.  A journey
    is rejected as ``leg_overlap`` when a leg boards before the previous one
    alights, and as ``passenger_mismatch`` when its legs disagree on the
    passenger id.
    """
    groups = defaultdict(list)
    for leg in legs:
        groups[leg.journey_id].append(leg)
    journeys, rejects = [], []
    for jid in sorted(groups):
        ordered = sorted(
            groups[jid],
            key=lambda l: (l.board_time, l.alight_time, l.trip_id, l.board_stop, l.alight_stop),
        )
        passengers = {l.passenger_id for l in ordered}
        if len(passengers) > 1:
            rejects.append(Reject(jid, "passenger_mismatch", ";".join(sorted(passengers))))
            continue
        overlap = next(
            (k for k in range(1, len(ordered)) if ordered[k].board_time < ordered[k - 1].alight_time),
            None,
        )
        if overlap is not None:
            rejects.append(Reject(jid, "leg_overlap", f"leg {overlap + 1}"))
            continue
        journeys.append(Journey(jid, ordered[0].passenger_id, tuple(ordered)))
    return journeys, rejects


def journey_metrics(journey, network):
    """Convenience metrics of one journey against ``network``.

    Lookup and ordering errors from :func:`~journey_equity.gtfs.leg_distance`
    propagate unchanged.
    """
    miles = journey.leg_miles(network)
    total = math.fsum(miles)
    if not total > 0.0:
        raise DegenerateJourneyError(f"journey {journey.journey_id!r} has zero network distance")
    rail = math.fsum(m for m, leg in zip(miles, journey.legs) if leg.mode == "rail")
    wait = journey.transfer_wait_minutes
    return ConvenienceMetrics(
        time_per_mile=journey.in_vehicle_minutes / total,
        transfers_per_mile=journey.n_transfers / total,
        transfer_wait_minutes=wait,
        network_miles=total,
        rail_share=rail / total,
        transfer_wait_per_mile=wait / total,
    )


def compute_metrics(journeys, network):
    """Metrics for every journey; failures become rejects.

    Returns ``(accepted, rejects)`` where ``accepted`` is a list of
    ``(journey, metrics)`` pairs.
    """
    accepted, rejects = [], []
    for j in journeys:
        unknown = next((leg.trip_id for leg in j.legs if leg.trip_id not in network.trips), None)
        if unknown is not None:
            rejects.append(Reject(j.journey_id, "unknown_trip", unknown))
            continue
        try:
            accepted.append((j, journey_metrics(j, network)))
        except LookupFailure as exc:
            rejects.append(Reject(j.journey_id, "stop_not_on_trip", str(exc)))
        except (DegenerateJourneyError, ZeroDistanceError) as exc:
            rejects.append(Reject(j.journey_id, "zero_distance", str(exc)))
        except OrderingError as exc:
            rejects.append(Reject(j.journey_id, "stop_order", str(exc)))
    return accepted, rejects


def profiles_from_metrics(pairs):
    """Per-origin-stop profiles from ``(journey, metrics)`` pairs.

    Every journey counts once; the stop metric is the plain mean.
    """
    by_stop = defaultdict(list)
    for journey, metrics in pairs:
        by_stop[journey.origin_stop].append(metrics)
    return {
        sid: StopProfile(sid, len(ms), ConvenienceMetrics.weighted_mean(ms))
        for sid, ms in sorted(by_stop.items())
    }


def stop_profiles(journeys, network):
    return profiles_from_metrics((j, journey_metrics(j, network)) for j in journeys)


def write_rejects(rejects, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["journey_id", "reason"])
        for r in rejects:
            w.writerow([r.journey_id, r.reason])
