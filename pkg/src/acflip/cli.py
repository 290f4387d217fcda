"""Command line entry point: ``acflip verify`` and ``acflip selftest``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .acceptance import run_all
from .runner import digest, dumps_report, run_scenario, summarize, write_outputs
from .scenario import TOLERANCE_KEYS, ScenarioError, parse_scenario

DEFAULT_SEED = 20240601
DEFAULT_OUT = "acflip-out"
SELFTEST_REPORT = "selftest_report.json"

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _override(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep or key not in TOLERANCE_KEYS:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE with KEY in {sorted(TOLERANCE_KEYS)}, got {text!r}")
    try:
        v = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key} needs a number, got {value!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"tolerance {key} must be positive")
    return key, v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acflip", description=__doc__)
    parser.add_argument("--version", action="version", version=f"acflip {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    verify = sub.add_parser("verify", help="run the analyses requested by a scenario file")
    verify.add_argument("scenario", type=Path)
    verify.add_argument("--seed", type=int, default=DEFAULT_SEED)
    verify.add_argument("--out", type=Path, default=Path(DEFAULT_OUT))
    verify.add_argument("--tolerance-overrides", nargs="+", type=_override, default=[], metavar="KEY=VALUE")

    selftest = sub.add_parser("selftest", help="run the acceptance suite")
    selftest.add_argument("--seed", type=int, default=DEFAULT_SEED)
    selftest.add_argument("--out", type=Path, default=Path(DEFAULT_OUT))
    return parser


def cmd_verify(args) -> int:
    try:
        text = args.scenario.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"acflip: cannot read {args.scenario}: {exc.strerror}", file=sys.stderr)
        return EXIT_USAGE
    try:
        scenario = parse_scenario(text)
    except ScenarioError as exc:
        for issue in exc.issues:
            print(f"{args.scenario}: {issue}", file=sys.stderr)
        return EXIT_USAGE
    if args.tolerance_overrides:
        scenario = scenario.with_tolerances(dict(args.tolerance_overrides))
    report, trace = run_scenario(scenario, seed=args.seed)
    paths = write_outputs(scenario, report, trace, args.out)
    for line in summarize(report):
        print(line)
    for kind, path in paths.items():
        print(f"  wrote {kind}: {path}")
    return EXIT_OK if report["all_passed"] else EXIT_FAILED


def selftest_report(seed: int) -> dict:
    results = run_all(seed)
    return {
        "tool": "acflip",
        "version": __version__,
        "seed": seed,
        "criteria": [
            {"number": c.number, "name": c.name, "passed": c.passed, "detail": c.detail} for c in results
        ],
        "all_passed": all(c.passed for c in results),
    }


def cmd_selftest(args) -> int:
    report = selftest_report(args.seed)
    text = dumps_report(report)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / SELFTEST_REPORT
    path.write_text(text, encoding="utf-8")
    for c in report["criteria"]:
        print(f"[{'PASS' if c['passed'] else 'FAIL'}] criterion {c['number']}: {c['name']}")
    print(f"report {path} sha256={digest(text)}")
    return EXIT_OK if report["all_passed"] else EXIT_FAILED


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args)
    return cmd_selftest(args)


if __name__ == "__main__":
    sys.exit(main())
