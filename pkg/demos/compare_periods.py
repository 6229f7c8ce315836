"""Two periods, two neighbourhoods.

    python3 demos/compare_periods.py [workdir]

Two synthetic "years" differ only in the planted time-per-mile slope.  The
period comparison reports each coefficient difference with a combined
standard error; the area comparison sets the least and most convenient
blocks of one run side by side.
"""

import os
import sys
import tempfile

from journey_equity import ScenarioConfig, compare_areas, compare_periods, generate, load_config, run_pipeline
from journey_equity.report import format_comparison, load_run

work = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="periods_")

outs = []
for period, seed, slope in (("2019-01", 21, 0.68), ("2020-01", 22, 0.72)):
    bundle = os.path.join(work, period)
    generate(ScenarioConfig.centred_stops(seed=seed, planted_effects={"time_per_mile": slope}, noise_sigma=0.02),
             bundle)
    out = os.path.join(work, f"out_{period}")
    run_pipeline(load_config(os.path.join(bundle, "run.cfg"), output_dir=out, period=period))
    outs.append(out)

# Runs are reloaded from disk, as the compare-periods subcommand does.
first, second = (load_run(o) for o in outs)
report = compare_periods(first, second)
row = report.row("equity:time_per_mile")
print(f"time/mile slope: {row.a:.4f} vs {row.b:.4f}, difference {row.difference:+.4f} "
      f"(combined se {row.std_error:.4f}, planted -0.04)")

profiles = sorted(first.area_profiles, key=lambda p: p.metrics.time_per_mile)
slow, fast = profiles[-1], profiles[0]
print()
print(format_comparison(compare_areas(slow, fast)), end="")
