"""Reproduce the headline scheduler comparison on the bundled corpus.

Runs every scheduler (proposed, fifo, sfra, ldf, rswn) against all twenty
synthetic traces with five seeds each, aggregates per-scheduler means, and
prints the comparison table. Per-run record files land in the output
directory so the table can be rebuilt later with `blocksched report`.
"""
from __future__ import annotations

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from blocksched.model import load_scenario  # noqa: E402
from blocksched.runner import RunParams, load_filtered_corpus, run_sweep  # noqa: E402
from blocksched.schedulers import SCHEDULER_NAMES  # noqa: E402

REPO_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", default=os.path.join(REPO_ROOT, "traces", "synthetic"))
    parser.add_argument("--scenario",
                        default=os.path.join(REPO_ROOT, "scenarios", "scenario_1.json"))
    parser.add_argument("--duration", type=float, default=8.0)
    parser.add_argument("--seeds", type=int, default=5,
                        help="number of seeds per (scheduler, trace) cell")
    parser.add_argument("--out", default=os.path.join(REPO_ROOT, "out", "headline"),
                        help="directory for per-run record files")
    args = parser.parse_args(argv)

    traces = load_filtered_corpus(args.corpus)
    scenario = load_scenario(args.scenario)
    params = RunParams(duration_s=args.duration)

    started = time.monotonic()
    table = run_sweep(traces, [scenario], list(SCHEDULER_NAMES),
                      seeds=list(range(args.seeds)), params=params,
                      records_dir=args.out)
    elapsed = time.monotonic() - started

    print(table.to_text())
    print()
    runs = len(traces) * len(SCHEDULER_NAMES) * args.seeds
    print("%d runs in %.1f s; records in %s" % (runs, elapsed, args.out))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
