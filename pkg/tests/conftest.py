import csv
import os

import pytest

from journey_equity.gtfs import parse_feed

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# stop coordinates around Boston; distances along trips given in metres
TINY_STOPS = [
    ("A", "Alpha", 42.3500, -71.0600),
    ("B", "Bravo", 42.3550, -71.0600),
    ("C", "Charlie", 42.3600, -71.0600),
    ("D", "Delta", 42.3650, -71.0600),
    ("E", "Echo", 42.3650, -71.0500),
    ("F", "Foxtrot", 42.3700, -71.0500),
    ("Z", "Unserved", 42.3800, -71.0800),
]


def write_tiny_feed(directory, with_dist=True):
    """Bus route R1: T1 A-B-C-D (0, 1000, 2500, 4000 m); rail route R2: T2 D-E-F."""
    os.makedirs(directory, exist_ok=True)
    write_csv(os.path.join(directory, "stops.txt"), ["stop_id", "stop_name", "stop_lat", "stop_lon"], TINY_STOPS)
    write_csv(
        os.path.join(directory, "routes.txt"),
        ["route_id", "route_short_name", "route_type"],
        [["R1", "1", 3], ["R2", "Red", 1], ["R3", "3", 3]],
    )
    write_csv(
        os.path.join(directory, "trips.txt"),
        ["route_id", "service_id", "trip_id"],
        [["R1", "wk", "T1"], ["R2", "wk", "T2"], ["R3", "wk", "T3"]],
    )
    d = (lambda v: v) if with_dist else (lambda v: "")
    write_csv(
        os.path.join(directory, "stop_times.txt"),
        ["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence", "shape_dist_traveled"],
        [
            ["T1", "08:00:00", "08:00:00", "A", 1, d(0)],
            ["T1", "08:04:00", "08:04:00", "B", 2, d(1000)],
            ["T1", "08:10:00", "08:10:00", "C", 3, d(2500)],
            ["T1", "08:15:00", "08:15:00", "D", 4, d(4000)],
            ["T2", "08:20:00", "08:20:00", "D", 1, d(0)],
            ["T2", "08:25:00", "08:25:00", "E", 2, d(3218.688)],
            ["T2", "08:30:00", "08:30:00", "F", 3, d(6437.376)],
            ["T3", "09:00:00", "09:00:00", "B", 1, d(0)],
            ["T3", "09:06:00", "09:06:00", "E", 2, d(2000)],
        ],
    )
    return directory


@pytest.fixture
def tiny_feed(tmp_path):
    return write_tiny_feed(str(tmp_path / "gtfs"))


@pytest.fixture
def tiny_network(tiny_feed):
    return parse_feed(tiny_feed)


@pytest.fixture(scope="session")
def synth_bundle(tmp_path_factory):
    """Centred-stop city with planted slopes and noise; generated once."""
    from journey_equity.synth import ScenarioConfig, generate

    out = str(tmp_path_factory.mktemp("bundle"))
    cfg = ScenarioConfig.centred_stops(
        seed=11,
        planted_effects={"time_per_mile": 0.68, "transfers_per_mile": 0.04},
        noise_sigma=0.02,
    )
    truth = generate(cfg, out)
    return out, cfg, truth


def rect_ring(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]


def grid_blocks(rows, cols, side=500.0):
    """Square blocks in a rows x cols grid; returns [(geoid, (x0, y0, x1, y1))]."""
    return [
        (f"b{r:02d}{c:02d}", (c * side, r * side, (c + 1) * side, (r + 1) * side))
        for r in range(rows)
        for c in range(cols)
    ]


def rect_distance(p, rect):
    # closed form: distance from a point to an axis-aligned rectangle
    x0, y0, x1, y1 = rect
    dx = max(x0 - p[0], 0.0, p[0] - x1)
    dy = max(y0 - p[1], 0.0, p[1] - y1)
    return (dx * dx + dy * dy) ** 0.5


@pytest.fixture(scope="session")
def kerbside_bundle(tmp_path_factory):
    """Default toy city (seed 7), no planted effects."""
    from journey_equity.synth import ScenarioConfig, generate

    out = str(tmp_path_factory.mktemp("kerbside"))
    truth = generate(ScenarioConfig(seed=7), out)
    return out, truth


def run_bundle(bundle_dir, output_dir, **overrides):
    from journey_equity.report import load_config, run_pipeline

    cfg = load_config(os.path.join(bundle_dir, "run.cfg"), output_dir=str(output_dir), **overrides)
    return run_pipeline(cfg)
