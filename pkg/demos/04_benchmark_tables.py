"""Small benchmark run: auto vs the scripted-operator baseline.

Run:  python demos/04_benchmark_tables.py
Equivalent to `clicknav-experiments run --trials 5 --out demo_output/tables`,
kept tiny so it finishes in well under a minute.
"""

from clicknav.experiments import emit, print_table, run_trials, summarize
from clicknav.simworld import scenario

for name in ("open_space", "doorway", "block"):
    spec = scenario(name)
    auto = run_trials(spec, "auto", 5, seed=0)
    manual = run_trials(spec, "manual", 5, seed=0)
    print_table(name, "auto", auto)
    print_table(name, "manual", manual)
    rows = summarize(auto, manual)
    agg = rows[-1]
    print(f"\n  improvement of auto over manual (means): "
          f"x {agg.x_pct:.0f}%  y {agg.y_pct:.0f}%  t {agg.t_pct:.0f}%")
    emit("demo_output/tables", name, auto, manual)

print("\nCSV tables in demo_output/tables/")
