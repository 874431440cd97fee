"""
Runtime scaling of the plane sweep and fusion
=============================================

Times the sweep against event count and plane count (both should be linear,
checked with a log-log fit), stereo against mono cost, and two-slice versus
one-slice fusion. Writes bench_results.csv and bench_summary.json to
demos/out/bench/. Pass --full for the larger sizes.

The command-line equivalent is `evdepth bench --out ... [--quick]`.
"""
import argparse
from pathlib import Path

from evdepth import bench_table, run_bench

parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
parser.add_argument("--full", action="store_true", help="larger sizes, more repetitions")
args = parser.parse_args()

out = Path(__file__).parent / "out" / "bench"
summary = run_bench(out_dir=out, quick=not args.full, reps=5 if args.full else 3)
print(bench_table(summary))
print("wrote", out / "bench_results.csv", "and", out / "bench_summary.json")
