"""ptw-sim: generate | replay | score | report.

Exit codes: 0 success, 1 usage error, 2 service failure,
3 acceptance-threshold miss (report command, for CI).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .generate import generate_dataset
from .replay import ReplayError, load_dataset, run_replay
from .report import EmptyLogError, build_report, read_log_entries, thresholds_met
from .score import load_cases, score_validation
from .spec import WorkloadSpec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SERVICE = 2
EXIT_THRESHOLD = 3


def _spec_from_args(args) -> WorkloadSpec:
    if args.spec:
        spec = WorkloadSpec.load(args.spec)
        if args.seed is not None:
            spec = WorkloadSpec.from_dict({**spec.to_dict(), "seed": args.seed})
        return spec
    return WorkloadSpec(seed=args.seed if args.seed is not None else 17893)


def cmd_generate(args) -> int:
    spec = _spec_from_args(args)
    paths = generate_dataset(spec, args.out)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    dataset = load_dataset(args.dataset)
    try:
        summary = run_replay(
            args.target,
            dataset,
            args.concurrency,
            admin_user=args.admin_user,
            admin_password=args.admin_password,
            out_dir=args.out,
            skip_setup=args.skip_setup,
        )
    except ReplayError as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    print(json.dumps(summary.to_dict(), indent=2))
    if summary.dropped:
        return EXIT_SERVICE
    return EXIT_OK


def cmd_score(args) -> int:
    cases = load_cases(args.cases)
    credentials = {}
    users_csv = Path(args.cases).parent / "users.csv"
    if users_csv.exists():
        for row in csv.DictReader(open(users_csv, newline="")):
            if "PermitIssuer" in row["roles"]:
                credentials[row["user_id"]] = row["password"]
    if args.issuer and args.password:
        credentials[args.issuer] = args.password
    if not credentials:
        print("no issuer credentials found (need users.csv next to cases or --issuer)", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = score_validation(
            args.target,
            cases,
            issuer_credentials=credentials,
            inject_mislabels=args.inject_mislabels,
            out_path=args.out,
        )
    except ReplayError as exc:
        print(f"score failed: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    print(json.dumps({"total": result.total, "correct": result.correct,
                      "accuracy": result.accuracy}, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    paths = []
    for item in args.log:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("timing_c*.jsonl")))
        else:
            paths.append(p)
    if not paths:
        print("no timing logs found", file=sys.stderr)
        return EXIT_USAGE
    spec = WorkloadSpec.load(args.spec) if args.spec else WorkloadSpec()
    accuracy = None
    if args.score:
        accuracy = json.loads(Path(args.score).read_text())["accuracy"]
    try:
        report = build_report(read_log_entries(paths), spec, validation_accuracy=accuracy)
    except EmptyLogError as exc:
        print(f"report failed: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(report.table())
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        print(f"json report: {out}")
    ok, problems = thresholds_met(report)
    if not ok:
        for problem in problems:
            print(f"THRESHOLD MISS: {problem}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptw-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write seeded dataset files")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--spec", help="JSON workload spec file")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(fn=cmd_generate)

    r = sub.add_parser("replay", help="drive lifecycles against a running service")
    r.add_argument("--target", required=True, help="service base URL")
    r.add_argument("--dataset", required=True, help="directory from `generate`")
    r.add_argument("--concurrency", type=int, default=10)
    r.add_argument("--out", help="directory for timing logs")
    r.add_argument("--admin-user", default="admin")
    r.add_argument("--admin-password", default="admin")
    r.add_argument("--skip-setup", action="store_true",
                   help="assume roster/registries already loaded")
    r.set_defaults(fn=cmd_replay)

    s = sub.add_parser("score", help="score Stage-2 validation against the oracle")
    s.add_argument("--target", required=True)
    s.add_argument("--cases", required=True, help="labeled_cases.jsonl path")
    s.add_argument("--issuer", help="issuer user id (defaults from users.csv)")
    s.add_argument("--password", help="issuer password")
    s.add_argument("--inject-mislabels", type=int, default=0,
                   help="flip N expected verdicts (harness mutation check)")
    s.add_argument("--out", help="write score JSON here")
    s.set_defaults(fn=cmd_score)

    p = sub.add_parser("report", help="aggregate timing logs into the metrics table")
    p.add_argument("--log", nargs="+", required=True, help="log files or directories")
    p.add_argument("--spec", help="spec.json path (for the manual baseline)")
    p.add_argument("--score", help="score JSON from `score`")
    p.add_argument("--out", help="write report JSON here")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
