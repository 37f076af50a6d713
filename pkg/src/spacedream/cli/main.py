"""Top-level command line interface.

    spacedream run <scenario>       run a mission scenario end to end
    spacedream scenarios list       list the builtin scenarios
    spacedream receiver ...         ground-side UDP receiver

A scenario argument is either a builtin name or a path to a scenario
file (see the scenario module docstring for the format).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .report import render_report, render_summary
from .runner import run_scenario
from .scenario import BUILTIN_SCENARIOS, ScenarioError, load_scenario, parse_scenario


def _run(args) -> int:
    try:
        scn = load_scenario(args.scenario)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.duration is not None:
            overrides["duration"] = args.duration
        if overrides:
            scn = dataclasses.replace(scn, **overrides)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    report = run_scenario(scn, out_dir=args.out, workdir=args.workdir,
                          wallclock=args.wallclock)
    if args.quiet:
        print(render_report(report), end="")
    else:
        print(render_summary(report), end="")
        if args.out:
            print(f"full report in {args.out}/report.txt")
    return 0 if report.passed else 1


def _list(args) -> int:
    for name, text in BUILTIN_SCENARIOS.items():
        scn = parse_scenario(text, default_name=name)
        first = text.splitlines()[0].lstrip("; ").strip()
        print(f"{name:<16} {first}  [duration {scn.duration:g}s,"
              f" {len(scn.checks)} checks]")
    return 0


def _receiver(argv) -> int:
    from ..datasync.cli import recv_main
    return recv_main(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # the receiver subcommand keeps the ground tool's own flag set
    if argv and argv[0] == "receiver":
        return _receiver(argv[1:])

    parser = argparse.ArgumentParser(
        prog="spacedream",
        description="desk-scale autonomous robot-arm mission simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario end to end")
    run_p.add_argument("scenario", help="builtin name or scenario file path")
    run_p.add_argument("--out", help="directory for report, events, rx tree")
    run_p.add_argument("--workdir", help="keep flight-side state here")
    run_p.add_argument("--seed", type=int, help="override the scenario seed")
    run_p.add_argument("--duration", type=float,
                       help="override the run duration (sim seconds)")
    run_p.add_argument("--wallclock", action="store_true",
                       help="pace the loop on real time and measure jitter")
    run_p.add_argument("--quiet", action="store_true",
                       help="print the machine-readable report instead of "
                            "the summary table")
    run_p.set_defaults(fn=_run)

    scen_p = sub.add_parser("scenarios", help="inspect builtin scenarios")
    scen_sub = scen_p.add_subparsers(dest="action", required=True)
    list_p = scen_sub.add_parser("list", help="list builtin scenarios")
    list_p.set_defaults(fn=_list)

    sub.add_parser("receiver", help="ground-side UDP receiver "
                                    "(see 'spacedream receiver --help')")

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
