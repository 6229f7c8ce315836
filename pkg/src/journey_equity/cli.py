"""Command-line entry point: ``journey-equity <subcommand>``.

Exit status: 0 success, 1 fatal ingestion error, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields

from . import stats
from .demographics import load_survey
from .errors import ConfigError, IngestionError, ValidationError
from .gtfs import feed_summary, parse_feed
from .journeys import link_journeys, load_legs
from .report import (
    RunConfig,
    compare_areas,
    compare_periods,
    format_comparison,
    load_config,
    load_run,
    read_area_profiles_csv,
    run_pipeline,
)
from .spatial import load_areas
from .synth import ScenarioConfig, generate

EXIT_OK, EXIT_INGEST, EXIT_CONFIG = 0, 1, 2


def _kv(pairs):
    for k, v in pairs.items():
        print(f"{k}={v}")


def cmd_synth(args):
    effects = {}
    for item in args.effect or []:
        name, _, value = item.partition("=")
        try:
            effects[name] = float(value)
        except ValueError:
            raise ConfigError(f"--effect expects name=value, got {item!r}") from None
    kw = dict(seed=args.seed, n_journeys=args.journeys, planted_effects=effects, noise_sigma=args.noise,
              buffer_feet=args.buffer_feet)
    if args.rows or args.cols:
        base = ScenarioConfig()
        kw["grid"] = (args.rows or base.grid[0], args.cols or base.grid[1])
    try:
        cfg = ScenarioConfig.centred_stops(**kw) if args.layout == "centred" else ScenarioConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    truth = generate(cfg, args.out)
    _kv(
        {
            "bundle": args.out,
            "journeys": len(truth.journey_metrics),
            "origin_stops": len(truth.stop_ridership),
            "covered_blocks": len(truth.covered_areas.get("block", [])),
            "clamped_stops": truth.clamped_stops,
        }
    )
    return EXIT_OK


def cmd_run(args):
    overrides = {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}
    cfg = load_config(args.config, **overrides)
    art = run_pipeline(cfg)
    _kv(art.coverage)
    for name in sorted(art.files):
        print(f"wrote={art.files[name]}")
    return EXIT_OK


def cmd_regress(args):
    areas = read_area_profiles_csv(args.profiles)
    if args.reversed:
        results = {f"reversed_{k}": v for k, v in stats.reversed_regressions(areas, args.wait_per_mile).items()}
    else:
        results = {"equity": stats.equity_regression(areas, args.wait_per_mile, args.weighted)}
    results["purpose"] = stats.purpose_regression(areas, args.weighted)
    for name, res in results.items():
        text = stats.render_table(res, f"{name} regression")
        print(text)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, f"regression_{name}.txt"), "w", encoding="utf-8") as fh:
                fh.write(text)
            with open(os.path.join(args.out, f"regression_{name}.csv"), "w", newline="", encoding="utf-8") as fh:
                stats.write_result_csv(res, fh)
    return EXIT_OK


def cmd_compare_areas(args):
    by_id = {p.geoid: p for p in read_area_profiles_csv(args.profiles)}
    missing = [g for g in (args.a, args.b) if g not in by_id]
    if missing:
        raise ConfigError(f"geoids not in {args.profiles}: {missing}")
    report = compare_areas(by_id[args.a], by_id[args.b])
    print(format_comparison(report), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    return EXIT_OK


def cmd_compare_periods(args):
    report = compare_periods(load_run(args.run1), load_run(args.run2))
    print(format_comparison(report), end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_csv())
    return EXIT_OK


def cmd_validate(args):
    if not any((args.gtfs_dir, args.legs, args.survey_rail, args.areas)):
        raise ConfigError("validate needs at least one of --gtfs-dir, --legs, --survey-rail/--survey-bus, --areas")
    network = None
    if args.gtfs_dir:
        network = parse_feed(args.gtfs_dir, args.gtfs_distance_unit)
        _kv({f"gtfs.{k}": v for k, v in feed_summary(network).items()})
    if args.legs:
        legs, rejects = load_legs(args.legs)
        journeys, link_rej = link_journeys(legs)
        _kv({"legs.rows": len(legs) + len(rejects), "legs.rejected_rows": len(rejects),
             "legs.journeys": len(journeys), "legs.rejected_journeys": len(link_rej)})
    if args.survey_rail or args.survey_bus:
        if not (args.survey_rail and args.survey_bus):
            raise ConfigError("--survey-rail and --survey-bus go together")
        survey = load_survey(args.survey_rail, args.survey_bus)
        _kv({"survey.rail_rows": len(survey.rail_rows), "survey.bus_rows": len(survey.bus_rows),
             "survey.rejected_rows": len(survey.rejects)})
    if args.areas:
        if network is None:
            raise ConfigError("--areas needs --gtfs-dir for the projection origin")
        areas, rejects = load_areas(args.areas, network.region_origin)
        _kv({"areas.valid": len(areas), "areas.rejected": len(rejects)})
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="journey-equity", description="Journey-based transit equity analysis")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic input bundle")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--rows", type=int)
    s.add_argument("--cols", type=int)
    s.add_argument("--journeys", type=int, default=5000)
    s.add_argument("--noise", type=float, default=0.0)
    s.add_argument("--effect", action="append", metavar="METRIC=SLOPE")
    s.add_argument("--layout", choices=("kerbside", "centred"), default="kerbside")
    s.add_argument("--buffer-feet", type=float, default=500.0)
    s.set_defaults(func=cmd_synth)

    r = sub.add_parser("run", help="run the full pipeline")
    r.add_argument("--config", help="key = value configuration file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            r.add_argument(flag, dest=f.name, action="store_const", const=True, default=None)
        else:
            r.add_argument(flag, dest=f.name, default=None)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("regress", help="regressions on an area_profiles.csv")
    g.add_argument("profiles")
    g.add_argument("--out")
    g.add_argument("--wait-per-mile", action="store_true")
    g.add_argument("--weighted", action="store_true")
    g.add_argument("--reversed", action="store_true")
    g.set_defaults(func=cmd_regress)

    c = sub.add_parser("compare-areas", help="compare two areas of one run")
    c.add_argument("profiles")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare_areas)

    cp = sub.add_parser("compare-periods", help="compare regression coefficients of two runs")
    cp.add_argument("run1")
    cp.add_argument("run2")
    cp.add_argument("--out")
    cp.set_defaults(func=cmd_compare_periods)

    v = sub.add_parser("validate", help="check inputs and print key=value summaries")
    v.add_argument("--gtfs-dir")
    v.add_argument("--gtfs-distance-unit", default="m")
    v.add_argument("--legs")
    v.add_argument("--survey-rail")
    v.add_argument("--survey-bus")
    v.add_argument("--areas")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, ValidationError) as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGEST


if __name__ == "__main__":
    sys.exit(main())
