"""Deterministic synthetic grid city with planted equity relationships.

The generator writes a complete input bundle (GTFS feed, ride legs, rail and
bus survey files, census GeoJSON) plus ``ground_truth.json``.  All
randomness comes from numpy's PCG64 bit generator seeded with
``ScenarioConfig.seed``, so a seed reproduces the bundle byte for byte on
any platform.

Geometry: ``rows x cols`` square blocks of ``block_feet``; stops sit on a
lattice every ``stop_spacing_blocks`` blocks, shifted ``stop_offset_feet``
from the block corner (15 ft: kerbside at an intersection; half a block:
one stop at each block centre); routes run straight along lattice lines,
east-west and north-south in proportion to the grid, so crossing routes share a stop where
riders can transfer.

Each stop's low-income share is planted from the mean metrics of the
journeys that start there::

    share = intercept + sum(slope[m] * mean_metric[m]) + N(0, noise_sigma)

clamped to [0, 1].  The intercept puts the midpoint of the planted range
at ``base_share``.  The metrics are computed here from the generated legs
with plain arithmetic, independently of :mod:`journey_equity.journeys`.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .demographics import PURPOSE_COLUMNS, PURPOSES
from .journeys import LEG_COLUMNS
from .spatial import unproject
from .units import FEET_PER_MILE

__all__ = ["ScenarioConfig", "GroundTruth", "generate", "METRIC_NAMES", "BUNDLE_FILES"]

METRIC_NAMES = (
    "time_per_mile",
    "transfers_per_mile",
    "transfer_wait_minutes",
    "network_miles",
    "rail_share",
    "transfer_wait_per_mile",
)

BUNDLE_FILES = {
    "gtfs_dir": "gtfs",
    "legs": "legs.csv",
    "survey_rail": "survey_rail.csv",
    "survey_bus": "survey_bus.csv",
    "areas": "areas.geojson",
}

MIN_TRANSFER_S = 60
TRACT_TILE = 5  # blocks per tract side


@dataclass
class ScenarioConfig:
    seed: int = 7
    grid: tuple = (20, 25)
    block_feet: float = 500.0
    stop_spacing_blocks: int = 2
    stop_offset_feet: float = 15.0
    n_routes: int = 12
    n_rail_routes: int = 2
    n_journeys: int = 5000
    transfer_probability: float = 0.35
    max_legs: int = 3
    max_ride_stops: int = 8
    planted_effects: dict = field(default_factory=dict)
    base_share: float = 0.45
    noise_sigma: float = 0.0
    bus_minutes_per_mile: tuple = (3.2, 3.8)
    rail_minutes_per_mile: tuple = (2.6, 3.2)
    headway_minutes: tuple = (6, 20)
    service_hours: tuple = (5, 24)
    journey_start_hours: tuple = (6, 20)
    origin: tuple = (42.3601, -71.0589)
    service_date: str = "2019-01-15"
    buffer_feet: float = 500.0
    stop_level_survey: bool = True

    def __post_init__(self):
        self.grid = tuple(int(v) for v in self.grid)
        counts = {
            "grid rows": self.grid[0],
            "grid cols": self.grid[1],
            "stop_spacing_blocks": self.stop_spacing_blocks,
            "n_routes": self.n_routes,
            "n_journeys": self.n_journeys,
            "max_legs": self.max_legs,
            "max_ride_stops": self.max_ride_stops,
        }
        for name, v in counts.items():
            if int(v) < 1:
                raise ValueError(f"{name} must be >= 1, got {v}")
        if not 0 <= self.n_rail_routes <= self.n_routes:
            raise ValueError("n_rail_routes must lie in [0, n_routes]")
        if not 0.0 <= self.transfer_probability <= 1.0:
            raise ValueError("transfer_probability must lie in [0, 1]")
        if self.noise_sigma < 0 or self.block_feet <= 0:
            raise ValueError("noise_sigma must be >= 0 and block_feet > 0")
        unknown = set(self.planted_effects) - set(METRIC_NAMES)
        if unknown:
            raise ValueError(f"unknown planted effects {sorted(unknown)}")

    @classmethod
    def centred_stops(cls, **overrides):
        """One stop at the centre of every block, blocks wider than twice the buffer.

        Each block then draws on its own stop only, so block-level errors are
        independent and OLS standard errors are honest.  Overlapping buffers
        (the default kerbside layout) share stops between neighbouring
        blocks and make OLS understate the sampling spread.
        """
        preset = dict(
            block_feet=1200.0,
            stop_spacing_blocks=1,
            stop_offset_feet=600.0,
            n_routes=45,
            n_rail_routes=4,
            headway_minutes=(10, 20),
            bus_minutes_per_mile=(3.3, 3.7),
            rail_minutes_per_mile=(2.9, 3.3),
        )
        preset.update(overrides)
        return cls(**preset)

    @property
    def stops_per_route(self):
        """Stops on an east-west route (north-south routes have rows//spacing + 1)."""
        return self.grid[1] // self.stop_spacing_blocks + 1


@dataclass
class GroundTruth:
    seed: int
    intercept: float
    planted_effects: dict
    stop_shares: dict  # stop id -> {"low_income_share", "respondents", purposes...}
    stop_ridership: dict
    journey_metrics: dict  # journey id -> metric name -> value
    covered_areas: dict  # level -> sorted geoids with an origin stop within buffer_feet
    buffer_feet: float
    clamped_stops: int

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# network layout


@dataclass
class _Route:
    route_id: str
    mode: str
    pattern: list  # stop ids, forward direction
    minutes_per_mile: float
    headway_s: int
    trips: dict = field(default_factory=dict)  # direction -> list of (trip_id, [seconds per stop])


def _spread(n_pick, n_lines):
    if n_pick <= 0:
        return []
    if n_pick >= n_lines:
        return list(range(n_lines))
    picks = np.unique(np.round(np.linspace(0, n_lines - 1, n_pick + 2)[1:-1]).astype(int))
    return [int(p) for p in picks]


def _layout(cfg, rng):
    rows, cols = cfg.grid
    s = cfg.stop_spacing_blocks
    spacing_ft = s * cfg.block_feet
    off = cfg.stop_offset_feet
    # lattice lines whose stops fall inside the grid
    n_row_lines = int((rows * cfg.block_feet - off) // spacing_ft) + 1
    n_col_lines = int((cols * cfg.block_feet - off) // spacing_ft) + 1
    # split routes between directions in proportion to available lines
    n_h = min(n_row_lines, round(cfg.n_routes * n_row_lines / (n_row_lines + n_col_lines)))
    n_v = min(n_col_lines, cfg.n_routes - n_h)
    h_lines = _spread(n_h, n_row_lines)
    v_lines = _spread(n_v, n_col_lines)

    lines = [("h", i) for i in h_lines] + [("v", j) for j in v_lines]
    rail_idx = set(rng.choice(len(lines), size=min(cfg.n_rail_routes, len(lines)), replace=False).tolist())

    def stop_id(i, j):
        return f"S{i:03d}_{j:03d}"

    stop_xy = {}
    routes = []
    for r, (kind, line) in enumerate(lines):
        if kind == "h":
            cells = [(line, j) for j in range(n_col_lines)]
        else:
            cells = [(i, line) for i in range(n_row_lines)]
        pattern = []
        for i, j in cells:
            sid = stop_id(i, j)
            stop_xy[sid] = (j * spacing_ft + off, i * spacing_ft + off)
            pattern.append(sid)
        mode = "rail" if r in rail_idx else "bus"
        lo, hi = cfg.rail_minutes_per_mile if mode == "rail" else cfg.bus_minutes_per_mile
        routes.append(
            _Route(
                route_id=f"R{r + 1:02d}",
                mode=mode,
                pattern=pattern,
                minutes_per_mile=float(rng.uniform(lo, hi)),
                headway_s=60 * int(rng.integers(cfg.headway_minutes[0], cfg.headway_minutes[1] + 1)),
            )
        )

    # schedules: both directions, evenly spaced departures across the service day
    miles_per_hop = spacing_ft / FEET_PER_MILE
    start, end = (3600 * h for h in cfg.service_hours)
    for route in routes:
        hops = len(route.pattern) - 1
        offsets = [round(k * miles_per_hop * route.minutes_per_mile * 60) for k in range(hops + 1)]
        for d in (0, 1):
            route.trips[d] = [
                (f"{route.route_id}_{d}_{n:03d}", [dep + off for off in offsets])
                for n, dep in enumerate(range(start, end, route.headway_s))
            ]
    return routes, stop_xy, miles_per_hop


# ---------------------------------------------------------------------------
# journeys


def _first_trip(trips, k, earliest):
    for trip_id, times in trips:
        if times[k] >= earliest:
            return trip_id, times
    return None


def _journey(cfg, rng, origin, routes, serving, start_s):
    """Legs for one journey as dicts, each with ride length in hops."""
    legs = []
    cur, prev_route, t = origin, None, start_s
    for leg_no in range(cfg.max_legs):
        options = []
        for r in serving[cur]:
            if r is prev_route:
                continue
            for d in (0, 1):
                pattern = r.pattern if d == 0 else r.pattern[::-1]
                k = pattern.index(cur)
                if k < len(pattern) - 1:
                    options.append((r, d, pattern, k))
        if not options:
            break
        route, d, pattern, k = options[int(rng.integers(len(options)))]
        want_transfer = leg_no < cfg.max_legs - 1 and rng.random() < cfg.transfer_probability
        downstream = list(range(k + 1, min(len(pattern), k + 1 + cfg.max_ride_stops)))
        if want_transfer:
            crossing = [m for m in downstream if len(serving[pattern[m]]) > 1]
            if crossing:
                downstream = crossing
            else:
                want_transfer = False
        m = downstream[int(rng.integers(len(downstream)))]
        found = _first_trip(route.trips[d], k, t)
        if found is None:
            break
        trip_id, times = found
        legs.append(
            {
                "trip_id": trip_id,
                "route": route,
                "board_stop": pattern[k],
                "alight_stop": pattern[m],
                "board_s": times[k],
                "alight_s": times[m],
                "hops": m - k,
            }
        )
        cur, prev_route, t = pattern[m], route, times[m] + MIN_TRANSFER_S
        if not want_transfer:
            break
    return legs


def _metrics(legs, miles_per_hop):
    miles = [leg["hops"] * miles_per_hop for leg in legs]
    total = sum(miles)
    rail = sum(mi for mi, leg in zip(miles, legs) if leg["route"].mode == "rail")
    in_vehicle = sum(leg["alight_s"] - leg["board_s"] for leg in legs) / 60.0
    wait = sum(b["board_s"] - a["alight_s"] for a, b in zip(legs, legs[1:])) / 60.0
    return {
        "time_per_mile": in_vehicle / total,
        "transfers_per_mile": (len(legs) - 1) / total,
        "transfer_wait_minutes": wait,
        "network_miles": total,
        "rail_share": rail / total,
        "transfer_wait_per_mile": wait / total,
    }


# ---------------------------------------------------------------------------
# geography


def _geoid(cfg, i, j):
    tracts_per_row = -(-cfg.grid[1] // TRACT_TILE)
    tract = (i // TRACT_TILE) * tracts_per_row + j // TRACT_TILE
    bg = i % TRACT_TILE + 1
    return f"25025{100 + tract:04d}00{bg}{j % TRACT_TILE:03d}"


def _areas(cfg):
    """Rectangles per level: geoid -> (level, x0, y0, x1, y1) in feet."""
    rows, cols = cfg.grid
    b = cfg.block_feet
    rects = {}
    for i in range(rows):
        for j in range(cols):
            rects[_geoid(cfg, i, j)] = ("block", j * b, i * b, (j + 1) * b, (i + 1) * b)
    for level, n in (("block_group", 12), ("tract", 11)):
        groups = {}
        for gid, (_, x0, y0, x1, y1) in list(rects.items()):
            if len(gid) != 15:
                continue
            g = groups.setdefault(gid[:n], [x0, y0, x1, y1])
            g[0], g[1] = min(g[0], x0), min(g[1], y0)
            g[2], g[3] = max(g[2], x1), max(g[3], y1)
        for gid, (x0, y0, x1, y1) in groups.items():
            rects[gid] = (level, x0, y0, x1, y1)
    return rects


def _rect_distance(x, y, rect):
    _, x0, y0, x1, y1 = rect
    dx = max(x0 - x, 0.0, x - x1)
    dy = max(y0 - y, 0.0, y - y1)
    return math.hypot(dx, dy)


# ---------------------------------------------------------------------------
# writers


def _csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _clock(seconds):
    h, rem = divmod(int(seconds), 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"


def _write_gtfs(out, cfg, routes, stop_xy):
    os.makedirs(out, exist_ok=True)
    spacing_m = cfg.stop_spacing_blocks * cfg.block_feet * 0.3048
    _csv(os.path.join(out, "agency.txt"), ["agency_id", "agency_name", "agency_url", "agency_timezone"],
         [["SYN", "Synthetic Transit", "https://example.invalid", "America/New_York"]])
    stops = []
    for sid in sorted(stop_xy):
        lat, lon = unproject(*stop_xy[sid], cfg.origin)
        stops.append([sid, f"Stop {sid}", repr(lat), repr(lon)])
    _csv(os.path.join(out, "stops.txt"), ["stop_id", "stop_name", "stop_lat", "stop_lon"], stops)
    _csv(
        os.path.join(out, "routes.txt"),
        ["route_id", "agency_id", "route_short_name", "route_type"],
        [[r.route_id, "SYN", r.route_id, 1 if r.mode == "rail" else 3] for r in routes],
    )
    trips, stop_times = [], []
    for r in routes:
        for d in (0, 1):
            pattern = r.pattern if d == 0 else r.pattern[::-1]
            for trip_id, times in r.trips[d]:
                trips.append([r.route_id, "WKDY", trip_id, d])
                for k, (sid, ts) in enumerate(zip(pattern, times)):
                    stop_times.append([trip_id, _clock(ts), _clock(ts), sid, k + 1, repr(k * spacing_m)])
    _csv(os.path.join(out, "trips.txt"), ["route_id", "service_id", "trip_id", "direction_id"], trips)
    _csv(
        os.path.join(out, "stop_times.txt"),
        ["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence", "shape_dist_traveled"],
        stop_times,
    )


def _survey_rows(entries):
    rows = []
    for key, e in entries:
        rows.append(
            [key, e["respondents"], repr(e["low_income_share"])]
            + [repr(e[k]) for k in PURPOSES]
        )
    return rows


def _pool(entries):
    total = sum(e["respondents"] for e in entries)
    pooled = {"respondents": total}
    for k in ("low_income_share",) + PURPOSES:
        pooled[k] = sum(e["respondents"] * e[k] for e in entries) / total
    return pooled


def _write_geojson(path, cfg, rects):
    features = []
    for gid in sorted(rects, key=lambda g: (len(g), g)):
        level, x0, y0, x1, y1 = rects[gid]
        ring = []
        for x, y in ((x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)):
            lat, lon = unproject(x, y, cfg.origin)
            ring.append([lon, lat])
        features.append(
            {
                "type": "Feature",
                "properties": {"geoid": gid, "level": level},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, separators=(",", ":"))
        fh.write("\n")


def write_run_config(path, extra=None):
    lines = [f"{k} = {v}" for k, v in BUNDLE_FILES.items()]
    lines.append("output_dir = out")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# synthetic bundle run configuration; paths relative to this file\n")
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------


def generate(config, out_dir):
    """Write a synthetic bundle to ``out_dir`` and return its :class:`GroundTruth`."""
    cfg = config
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    os.makedirs(out_dir, exist_ok=True)

    routes, stop_xy, miles_per_hop = _layout(cfg, rng)
    serving = {sid: [] for sid in stop_xy}
    for r in routes:
        for sid in r.pattern:
            serving[sid].append(r)

    stop_ids = sorted(stop_xy)
    popularity = rng.lognormal(0.0, 0.8, size=len(stop_ids))
    popularity /= popularity.sum()

    base = datetime.fromisoformat(cfg.service_date)
    t0, t1 = (3600 * h for h in cfg.journey_start_hours)
    leg_rows, journey_metrics, origins = [], {}, {}
    n = 0
    attempts = 0
    while n < cfg.n_journeys:
        attempts += 1
        if attempts > 20 * cfg.n_journeys:
            raise RuntimeError("could not generate enough journeys; check the network configuration")
        origin = stop_ids[int(rng.choice(len(stop_ids), p=popularity))]
        start = int(rng.integers(t0, t1))
        legs = _journey(cfg, rng, origin, routes, serving, start)
        if not legs:
            continue
        n += 1
        jid, pid = f"J{n:06d}", f"P{n:06d}"
        for leg in legs:
            leg_rows.append(
                [
                    pid,
                    jid,
                    leg["trip_id"],
                    leg["route"].route_id,
                    leg["route"].mode,
                    leg["board_stop"],
                    leg["alight_stop"],
                    (base + timedelta(seconds=leg["board_s"])).isoformat(),
                    (base + timedelta(seconds=leg["alight_s"])).isoformat(),
                ]
            )
        journey_metrics[jid] = _metrics(legs, miles_per_hop)
        origins.setdefault(origin, []).append(jid)

    # planted demographics per origin stop
    stop_means = {
        sid: {m: float(np.mean([journey_metrics[j][m] for j in jids])) for m in METRIC_NAMES}
        for sid, jids in sorted(origins.items())
    }
    effects = {k: float(v) for k, v in cfg.planted_effects.items()}
    linear = [sum(effects[m] * sm[m] for m in effects) for sm in stop_means.values()]
    # centre the planted range (not the mean) on base_share to keep clear of the [0, 1] clamp
    intercept = cfg.base_share - (0.5 * (min(linear) + max(linear)) if linear else 0.0)
    noise = rng.normal(0.0, cfg.noise_sigma, size=len(stop_means)) if cfg.noise_sigma > 0 else np.zeros(len(stop_means))
    alpha = np.array([4.0, 3.0, 2.0, 1.0, 1.5])
    shares, clamped = {}, 0
    for (sid, sm), eps in zip(stop_means.items(), noise):
        raw = intercept + sum(effects[m] * sm[m] for m in effects) + float(eps)
        low = min(1.0, max(0.0, raw))
        clamped += low != raw
        purposes = rng.dirichlet(alpha)
        entry = {"low_income_share": low, "respondents": int(rng.integers(10, 201))}
        entry.update({k: float(p) for k, p in zip(PURPOSES, purposes)})
        shares[sid] = entry

    # survey files: station-level rows, route-level rows
    rail_stops = {sid for r in routes if r.mode == "rail" for sid in r.pattern}
    direct = shares if cfg.stop_level_survey else {s: e for s, e in shares.items() if s in rail_stops}
    bus_rows = []
    for r in routes:
        if r.mode != "bus":
            continue
        members = [shares[s] for s in r.pattern if s in shares]
        if not members:
            members = [dict({"low_income_share": cfg.base_share, "respondents": 1},
                            **{k: a / alpha.sum() for k, a in zip(PURPOSES, alpha)})]
        bus_rows.append((r.route_id, _pool(members)))
    bus_by_route = dict(bus_rows)

    effective = {}
    for sid in shares:
        if sid in direct:
            effective[sid] = shares[sid]
        else:
            effective[sid] = _pool([bus_by_route[r.route_id] for r in serving[sid] if r.route_id in bus_by_route])

    # coverage oracle on exact rectangles
    rects = _areas(cfg)
    covered = {}
    for gid, rect in rects.items():
        if any(_rect_distance(*stop_xy[s], rect) <= cfg.buffer_feet for s in origins):
            covered.setdefault(rect[0], []).append(gid)

    # files
    _write_gtfs(os.path.join(out_dir, BUNDLE_FILES["gtfs_dir"]), cfg, routes, stop_xy)
    _csv(os.path.join(out_dir, BUNDLE_FILES["legs"]), list(LEG_COLUMNS), leg_rows)
    survey_header = ["respondents", "low_income_share", *PURPOSE_COLUMNS.values()]
    _csv(os.path.join(out_dir, BUNDLE_FILES["survey_rail"]), ["stop_id", *survey_header],
         _survey_rows(sorted(direct.items())))
    _csv(os.path.join(out_dir, BUNDLE_FILES["survey_bus"]), ["route_id", *survey_header],
         _survey_rows(bus_rows))
    _write_geojson(os.path.join(out_dir, BUNDLE_FILES["areas"]), cfg, rects)
    write_run_config(os.path.join(out_dir, "run.cfg"), {"buffer_feet": cfg.buffer_feet})

    truth = GroundTruth(
        seed=cfg.seed,
        intercept=intercept,
        planted_effects=effects,
        stop_shares=effective,
        stop_ridership={sid: len(j) for sid, j in sorted(origins.items())},
        journey_metrics=journey_metrics,
        covered_areas={lvl: sorted(g) for lvl, g in sorted(covered.items())},
        buffer_feet=cfg.buffer_feet,
        clamped_stops=int(clamped),
    )
    with open(os.path.join(out_dir, "ground_truth.json"), "w", encoding="utf-8") as fh:
        fh.write(truth.to_json())
    return truth
