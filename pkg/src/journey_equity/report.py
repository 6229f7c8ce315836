"""Pipeline orchestration, output files and comparisons.

``run_pipeline`` chains ingest -> link -> metrics -> demographics ->
area aggregation -> regressions and writes every artefact atomically into
the output directory.  Reported numbers are rendered with 6 significant
digits so identical inputs give byte-identical CSV files.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field, fields, replace

from . import stats
from .demographics import PURPOSE_COLUMNS, PURPOSES, load_survey, materialize_stop_shares
from .errors import ConfigError, IngestionError, RankDeficientError, ValidationError
from .gtfs import parse_feed
from .journeys import (
    ConvenienceMetrics,
    compute_metrics,
    link_journeys,
    load_legs,
    profiles_from_metrics,
)
from .spatial import LEVELS, AreaProfile, aggregate_areas, load_areas, project, rollup_profiles

log = logging.getLogger(__name__)

__all__ = [
    "RunConfig",
    "RunArtifacts",
    "ComparisonRow",
    "ComparisonReport",
    "PipelineError",
    "load_config",
    "run_pipeline",
    "load_run",
    "compare_areas",
    "compare_periods",
    "write_area_profiles_csv",
    "read_area_profiles_csv",
]

PATH_FIELDS = ("gtfs_dir", "legs", "survey_rail", "survey_bus", "areas")
DIRECTIONS = ("income_response", "reversed")
# RunConfig fields allowed to differ between runs being compared
PERIOD_FIELDS = ("legs", "period", "output_dir")


class PipelineError(IngestionError):
    """Fatal ingestion failure; ``stage`` names the pipeline step."""

    def __init__(self, stage, message, path=None):
        super().__init__(f"[{stage}] {message}", path=path)
        self.stage = stage


@dataclass
class RunConfig:
    gtfs_dir: str = ""
    legs: str = ""
    survey_rail: str = ""
    survey_bus: str = ""
    areas: str = ""
    output_dir: str = "out"
    buffer_feet: float = 500.0
    level: str = "block"
    low_cut: float = 0.25
    high_cut: float = 0.50
    period: str = ""
    regression_direction: str = "income_response"
    wait_per_mile: bool = False
    weighted: bool = False
    gtfs_distance_unit: str = "m"
    low_income_threshold_dollars: float = 43_500.0

    def validate(self, check_paths=True):
        if not self.buffer_feet >= 0:
            raise ConfigError(f"buffer_feet must be >= 0, got {self.buffer_feet}")
        if self.level not in LEVELS:
            raise ConfigError(f"level must be one of {LEVELS}, got {self.level!r}")
        if not 0.0 <= self.low_cut < self.high_cut <= 1.0:
            raise ConfigError("income cuts need 0 <= low_cut < high_cut <= 1")
        if self.regression_direction not in DIRECTIONS:
            raise ConfigError(f"regression_direction must be one of {DIRECTIONS}")
        if self.gtfs_distance_unit not in ("m", "km", "mi", "ft"):
            raise ConfigError(f"unknown gtfs_distance_unit {self.gtfs_distance_unit!r}")
        if check_paths:
            for name in PATH_FIELDS:
                path = getattr(self, name)
                ok = os.path.isdir(path) if name == "gtfs_dir" else os.path.isfile(path)
                if not path or not ok:
                    raise ConfigError(f"{name}: path does not exist: {path!r}")
        return self

    def lines(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(out) + "\n"


def _coerce(name, text):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown configuration key {name!r}")
    kind = kinds[name]
    text = str(text).strip()
    try:
        if kind == "float":
            return float(text)
        if kind == "bool":
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def parse_kv(text):
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path=None, **overrides):
    """Build a RunConfig from a key = value file plus overrides.

    Relative paths in the file resolve against the file's directory.
    Overrides set to None are ignored.
    """
    values = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_kv(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        base = os.path.dirname(os.path.abspath(path))
        for k, v in raw.items():
            v = _coerce(k, v)
            if k in PATH_FIELDS + ("output_dir",) and v and not os.path.isabs(v):
                v = os.path.join(base, v)
            values[k] = v
    for k, v in overrides.items():
        if v is not None:
            values[k] = _coerce(k, v) if isinstance(v, str) else v
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# output helpers


def _g(v):
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "NA"
    return f"{v:.6g}"


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


AREA_COLUMNS = (
    ("geoid", "level", "ridership", "n_stops")
    + ConvenienceMetrics.names()
    + ("low_income_share",)
    + tuple(PURPOSE_COLUMNS[k] for k in PURPOSES)
    + ("income_class", "assigned_stops")
)


def _area_record(p):
    rec = {
        "geoid": p.geoid,
        "level": p.level,
        "ridership": p.ridership,
        "n_stops": len(p.assigned_stops),
    }
    rec.update({k: float(f"{v:.6g}") for k, v in p.metrics.as_dict().items()})
    rec["low_income_share"] = float(f"{p.low_income_share:.6g}")
    rec.update({PURPOSE_COLUMNS[k]: float(f"{p.purpose_shares[k]:.6g}") for k in PURPOSES})
    rec["income_class"] = p.income_class
    rec["assigned_stops"] = ";".join(p.assigned_stops)
    return rec


def area_profiles_csv(profiles):
    rows = []
    for p in sorted(profiles, key=lambda p: p.geoid):
        rec = _area_record(p)
        rows.append([_g(v) if isinstance(v, float) else v for v in (rec[c] for c in AREA_COLUMNS)])
    return _csv_text(AREA_COLUMNS, rows)


def write_area_profiles_csv(profiles, path):
    _atomic_write(path, area_profiles_csv(profiles))


def read_area_profiles_csv(path):
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            metrics = ConvenienceMetrics(**{k: float(row[k]) for k in ConvenienceMetrics.names()})
            out.append(
                AreaProfile(
                    geoid=row["geoid"],
                    level=row["level"],
                    ridership=int(row["ridership"]),
                    metrics=metrics,
                    low_income_share=float(row["low_income_share"]),
                    purpose_shares={k: float(row[PURPOSE_COLUMNS[k]]) for k in PURPOSES},
                    income_class=row["income_class"],
                    assigned_stops=tuple(s for s in row["assigned_stops"].split(";") if s),
                )
            )
    return out


def area_profiles_geojson(profiles, areas_by_geoid):
    features = []
    for p in sorted(profiles, key=lambda p: p.geoid):
        area = areas_by_geoid.get(p.geoid)
        features.append(
            {
                "type": "Feature",
                "properties": _area_record(p),
                "geometry": area.geometry if area is not None else None,
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": features}, separators=(",", ":")) + "\n"


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class RunArtifacts:
    config: RunConfig
    area_profiles: list
    regressions: dict
    coverage: dict
    files: dict = field(default_factory=dict)
    rejects: list = field(default_factory=list)
    tract_profiles: list = field(default_factory=list)


def _stage(stage, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except IngestionError as exc:
        raise PipelineError(stage, str(exc), path=getattr(exc, "path", None)) from exc
    except ValidationError as exc:
        raise PipelineError(stage, str(exc)) from exc


def _run_regressions(cfg, area_profiles, notes):
    results = {}
    jobs = []
    if cfg.regression_direction == "reversed":
        jobs.append(("reversed", lambda: stats.reversed_regressions(area_profiles, cfg.wait_per_mile)))
    else:
        jobs.append(("equity", lambda: {"equity": stats.equity_regression(area_profiles, cfg.wait_per_mile, cfg.weighted)}))
    jobs.append(("purpose", lambda: {"purpose": stats.purpose_regression(area_profiles, cfg.weighted)}))
    for name, job in jobs:
        try:
            out = job()
        except (RankDeficientError, ValidationError) as exc:
            log.warning("regression %s skipped: %s", name, exc)
            notes.append(("regression_skipped", name, str(exc)))
            continue
        for key, res in out.items():
            results[key if name != "reversed" else f"reversed_{key}"] = res
    return results


def run_pipeline(config):
    """Execute the full analysis and write artefacts to ``config.output_dir``.

    Raises :class:`ConfigError` for an invalid configuration and
    :class:`PipelineError` (an :class:`IngestionError`) for fatal input
    problems; everything else is quarantined in the rejects and coverage
    reports.
    """
    cfg = config.validate()
    os.makedirs(cfg.output_dir, exist_ok=True)

    network = _stage("gtfs", parse_feed, cfg.gtfs_dir, cfg.gtfs_distance_unit)
    legs, leg_rejects = _stage("legs", load_legs, cfg.legs)
    input_ids = {leg.journey_id for leg in legs} | {r.journey_id for r in leg_rejects}

    bad = {r.journey_id for r in leg_rejects}
    journeys, link_rejects = link_journeys([l for l in legs if l.journey_id not in bad])
    accepted, metric_rejects = compute_metrics(journeys, network)
    rejects = leg_rejects + link_rejects + metric_rejects
    rejected_ids = {r.journey_id for r in rejects}
    accepted_ids = {j.journey_id for j, _ in accepted}
    if accepted_ids & rejected_ids or (accepted_ids | rejected_ids) != input_ids:
        raise AssertionError("journey accounting mismatch")

    profiles = profiles_from_metrics(accepted)
    survey = _stage("survey", load_survey, cfg.survey_rail, cfg.survey_bus, cfg.low_income_threshold_dollars)
    shares, missing = materialize_stop_shares(survey, network, profiles)
    profiles = {sid: replace(p, demographics=shares.get(sid)) for sid, p in profiles.items()}

    origin = network.region_origin
    areas, area_rejects = _stage("areas", load_areas, cfg.areas, origin, cfg.level)
    points = {sid: project(network.stops[sid].lat, network.stops[sid].lon, origin) for sid in profiles}
    area_profiles, uncovered = aggregate_areas(areas, profiles, points, cfg.buffer_feet, cfg.low_cut, cfg.high_cut)

    notes = []
    regressions = _run_regressions(cfg, area_profiles, notes)
    tract_profiles = []
    if cfg.level != "tract" and area_profiles:
        tract_profiles = rollup_profiles(area_profiles, "tract", cfg.low_cut, cfg.high_cut)

    coverage = {
        "journeys_input": len(input_ids),
        "journeys_accepted": len(accepted_ids),
        "journeys_rejected": len(rejected_ids),
        "origin_stops": len(profiles),
        "stops_no_demographics": len(missing),
        "areas_total": len(areas),
        "areas_covered": len(area_profiles),
        "areas_uncovered": len(uncovered),
        "areas_invalid": len(area_rejects),
        "survey_rows_rejected": len(survey.rejects),
        "income_high": sum(p.income_class == "high_income" for p in area_profiles),
        "income_middle": sum(p.income_class == "middle" for p in area_profiles),
        "income_low": sum(p.income_class == "low_income" for p in area_profiles),
    }
    cov_rows = [["count", k, v] for k, v in coverage.items()]
    cov_rows += [["no_demographics", sid, ""] for sid in missing]
    cov_rows += [["uncovered_area", g, ""] for g in sorted(uncovered)]
    cov_rows += [["invalid_area", r.journey_id, r.detail] for r in area_rejects]
    cov_rows += [["survey_reject", r.journey_id, r.reason] for r in survey.rejects]
    cov_rows += [[kind, key, detail] for kind, key, detail in notes]

    out = cfg.output_dir
    files = {}

    def emit(name, text):
        path = os.path.join(out, name)
        _atomic_write(path, text)
        files[name] = path

    by_geoid = {a.geoid: a for a in areas}
    emit("area_profiles.csv", area_profiles_csv(area_profiles))
    emit("area_profiles.geojson", area_profiles_geojson(area_profiles, by_geoid))
    if tract_profiles:
        emit("tract_profiles.csv", area_profiles_csv(tract_profiles))
    for name, res in sorted(regressions.items()):
        buf = io.StringIO()
        stats.write_result_csv(res, buf)
        emit(f"regression_{name}.csv", buf.getvalue())
        title = f"{name} regression, {cfg.level} level, {_g(cfg.buffer_feet)} ft buffer"
        if cfg.period:
            title += f", {cfg.period}"
        emit(f"regression_{name}.txt", stats.render_table(res, title))
    emit("coverage.csv", _csv_text(["record", "key", "value"], cov_rows))
    emit("rejects.csv", _csv_text(["journey_id", "reason"], [[r.journey_id, r.reason] for r in rejects]))
    emit("run_config.txt", cfg.lines())

    log.info("run complete: %s", coverage)
    return RunArtifacts(cfg, area_profiles, regressions, coverage, files, rejects, tract_profiles)


def load_run(output_dir):
    """Reload a finished run (config, regressions, area profiles) from disk."""
    cfg_path = os.path.join(output_dir, "run_config.txt")
    if not os.path.isfile(cfg_path):
        raise IngestionError(f"{output_dir} has no run_config.txt", path=cfg_path)
    with open(cfg_path, encoding="utf-8") as fh:
        raw = parse_kv(fh.read())
    cfg = RunConfig(**{k: _coerce(k, v) for k, v in raw.items()})
    regressions = {}
    for name in sorted(os.listdir(output_dir)):
        if name.startswith("regression_") and name.endswith(".csv"):
            with open(os.path.join(output_dir, name), newline="", encoding="utf-8") as fh:
                regressions[name[len("regression_") : -4]] = stats.read_result_csv(fh)
    profiles_path = os.path.join(output_dir, "area_profiles.csv")
    profiles = read_area_profiles_csv(profiles_path) if os.path.isfile(profiles_path) else []
    coverage = {}
    cov_path = os.path.join(output_dir, "coverage.csv")
    if os.path.isfile(cov_path):
        with open(cov_path, newline="", encoding="utf-8") as fh:
            coverage = {r["key"]: int(r["value"]) for r in csv.DictReader(fh) if r["record"] == "count"}
    return RunArtifacts(cfg, profiles, regressions, coverage)


# ---------------------------------------------------------------------------
# comparisons


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    a: float
    b: float
    difference: float
    percent: float | None  # 100 * (a - b) / b, None when b == 0
    std_error: float | None = None  # combined SE for coefficient differences
    p_a: float | None = None
    p_b: float | None = None


@dataclass(frozen=True)
class ComparisonReport:
    label_a: str
    label_b: str
    rows: tuple

    def row(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_csv(self):
        return _csv_text(
            ["name", "a", "b", "difference", "percent_difference", "std_error", "p_a", "p_b"],
            [[r.name, _g(r.a), _g(r.b), _g(r.difference), _g(r.percent), _g(r.std_error), _g(r.p_a), _g(r.p_b)]
             for r in self.rows],
        )


def _row(name, a, b, **extra):
    diff = a - b
    pct = None if b == 0 else 100.0 * diff / b
    return ComparisonRow(name, a, b, diff, pct, **extra)


def compare_areas(a, b):
    """Per-metric difference ``a - b`` and percent difference relative to ``b``."""
    if a.level != b.level:
        raise ValidationError(f"cannot compare a {a.level} with a {b.level}")
    rows = [_row(name, getattr(a.metrics, name), getattr(b.metrics, name)) for name in ConvenienceMetrics.names()]
    rows.append(_row("low_income_share", a.low_income_share, b.low_income_share))
    rows.append(_row("ridership", float(a.ridership), float(b.ridership)))
    return ComparisonReport(a.geoid, b.geoid, tuple(rows))


def compare_periods(run1, run2):
    """Coefficient differences ``run1 - run2`` for every shared regression.

    Both runs must share every analysis setting (buffer, level, cuts,
    regression switches, units); input paths, period label and output
    directory may differ.
    """
    for f in fields(RunConfig):
        if f.name in PERIOD_FIELDS or f.name in PATH_FIELDS:
            continue
        if getattr(run1.config, f.name) != getattr(run2.config, f.name):
            raise ValidationError(
                f"specification mismatch on {f.name}: {getattr(run1.config, f.name)!r} vs {getattr(run2.config, f.name)!r}"
            )
    if sorted(run1.regressions) != sorted(run2.regressions):
        raise ValidationError("runs contain different regressions")
    rows = []
    for name in sorted(run1.regressions):
        r1, r2 = run1.regressions[name], run2.regressions[name]
        if r1.names != r2.names:
            raise ValidationError(f"regression {name!r} has different terms in the two runs")
        for t1, t2 in zip(r1.terms, r2.terms):
            rows.append(
                _row(
                    f"{name}:{t1.name}",
                    t1.coefficient,
                    t2.coefficient,
                    std_error=math.hypot(t1.std_error, t2.std_error),
                    p_a=t1.p_value,
                    p_b=t2.p_value,
                )
            )
    la = run1.config.period or "run1"
    lb = run2.config.period or "run2"
    return ComparisonReport(la, lb, tuple(rows))


def format_comparison(report):
    lines = [f"comparison {report.label_a} vs {report.label_b}"]
    for r in report.rows:
        pct = "NA" if r.percent is None else f"{r.percent:+.3g}%"
        lines.append(f"{r.name:40s} {_g(r.a):>12s} {_g(r.b):>12s} diff={_g(r.difference):>12s} {pct}")
    return "\n".join(lines) + "\n"
