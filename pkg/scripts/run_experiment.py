#!/usr/bin/env python3
"""One-shot reproduction of the reference experiment on a local server.

Starts an in-process API server (in-memory storage), generates the default
seeded workload, replays it at each configured concurrency level, scores
the 500 labeled validation cases, and prints the metrics table.  Exit code
3 when the approval-time/reduction envelope is missed (same convention as
`ptw-sim report`).

    python scripts/run_experiment.py [--seed N] [--out DIR] [--levels 10 50]
"""

from __future__ import annotations

import argparse
import csv
import sys
import tempfile
from pathlib import Path

from ptw.api import serve
from ptw.config import ServiceConfig
from ptw.sim.generate import generate_dataset
from ptw.sim.replay import load_dataset, run_replay
from ptw.sim.report import build_report, read_log_entries, thresholds_met
from ptw.sim.score import load_cases, score_validation
from ptw.sim.spec import WorkloadSpec


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=17893)
    parser.add_argument("--out", default=None, help="output directory (default: temp)")
    parser.add_argument("--levels", type=int, nargs="+", default=None,
                        help="concurrency levels (default: spec levels)")
    parser.add_argument("--skip-score", action="store_true")
    args = parser.parse_args(argv)

    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="ptw-exp-"))
    out.mkdir(parents=True, exist_ok=True)
    spec = WorkloadSpec(seed=args.seed)
    levels = args.levels or list(spec.concurrency_levels)

    dataset_dir = out / "dataset"
    generate_dataset(spec, dataset_dir)
    dataset = load_dataset(dataset_dir)

    # background sweep off: the scoring phase stages past-window populations
    handle = serve(ServiceConfig(listen_port=0, storage="memory",
                                 run_background_sweep=False))
    print(f"server: {handle.base_url}")
    try:
        first = True
        for level in levels:
            summary = run_replay(handle.base_url, dataset, level, out_dir=out,
                                 skip_setup=not first)
            first = False
            print(f"concurrency {level}: {summary.permits_closed}/{summary.permits_total} "
                  f"closed, {summary.requests} requests, {summary.dropped} dropped, "
                  f"wall {summary.wall_seconds:.1f}s")

        accuracy = None
        if not args.skip_score:
            credentials = {
                row["user_id"]: row["password"]
                for row in csv.DictReader(open(dataset_dir / "users.csv"))
                if "PermitIssuer" in row["roles"]
            }
            result = score_validation(
                handle.base_url,
                load_cases(dataset_dir / "labeled_cases.jsonl"),
                issuer_credentials=credentials,
                out_path=out / "score.json",
            )
            accuracy = result.accuracy
            print(f"validation accuracy: {accuracy * 100:.1f}% "
                  f"({result.correct}/{result.total})")
    finally:
        handle.stop()

    entries = read_log_entries(sorted(out.glob("timing_c*.jsonl")))
    report = build_report(entries, spec, validation_accuracy=accuracy)
    print()
    print(report.table())
    (out / "report.json").write_text(__import__("json").dumps(report.to_dict(), indent=2))
    print(f"\nartifacts in {out}")
    ok, problems = thresholds_met(report)
    if not ok:
        for problem in problems:
            print(f"THRESHOLD MISS: {problem}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
