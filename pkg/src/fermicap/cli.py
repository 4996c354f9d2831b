"""Command-line entry point.

Subcommands: ``groundstate``, ``run``, ``reference``, ``oracle``, ``sweep``
and ``report``.  Every experiment-driving subcommand takes ``--config`` and
``--out``; ``--dry-run`` validates and writes the manifest without
integrating, ``--set section.key=value`` overrides single entries, and
``sweep`` accepts ``--jobs``.  ``report`` renders figures from a finished
output directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, apply_overrides
from .state import TraceDriftError


def _add_common(sub, config_required=True):
    sub.add_argument("--config", required=config_required,
                     help="experiment config file")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--dry-run", action="store_true",
                     help="validate, report the plan, integrate nothing")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="SECTION.KEY=VALUE",
                     help="override a config entry (repeatable)")
    sub.add_argument("--quiet", action="store_true",
                     help="suppress progress lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermicap",
        description="Two-fermion dynamics with absorbing boundaries via a "
                    "particle-number-resolved master equation.")
    subs = parser.add_subparsers(dest="command", required=True)

    for name, blurb in (
            ("run", "propagate an experiment and write reports"),
            ("groundstate", "imaginary-time and dense ground-state energies"),
            ("reference", "no-absorber run on an enlarged box")):
        _add_common(subs.add_parser(name, help=blurb))

    oracle = subs.add_parser(
        "oracle", help="validate the engine against the dense reference")
    oracle.add_argument("--out", required=True)
    oracle.add_argument("--m", default="4,6",
                        help="comma-separated tiny grid sizes (default 4,6)")
    oracle.add_argument("--states", type=int, default=3,
                        help="random states per case")
    oracle.add_argument("--seed", type=int, default=1234)
    oracle.add_argument("--t-end", type=float, default=0.6)
    oracle.add_argument("--dt", type=float, default=0.05)
    oracle.add_argument("--quiet", action="store_true")

    sweep = subs.add_parser("sweep", help="run a one-parameter family")
    _add_common(sweep)
    sweep.add_argument("--jobs", type=int, default=1,
                       help="parallel sweep entries")

    report = subs.add_parser(
        "report", help="render figures from an output directory")
    report.add_argument("--out", required=True,
                        help="directory with observables.csv / snapshots")
    return parser


def _progress(quiet: bool):
    if quiet:
        return None
    state = {"count": 0}

    def on_row(row):
        state["count"] += 1
        if state["count"] % 10 == 1:
            print(f"  t={row.t:9.3f}  P2={row.p2:.6f}  P1={row.p1:.6f}  "
                  f"P0={row.p0:.6f}  drift={row.trace_drift:+.2e}",
                  file=sys.stderr)
    return on_row


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TraceDriftError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    from . import experiments as ex

    if args.command == "report":
        from .report import render_report
        paths = render_report(args.out)
        if not paths:
            print("nothing to render in", args.out, file=sys.stderr)
            return 1
        for p in paths:
            print(p)
        return 0

    if args.command == "oracle":
        say = None if args.quiet else (lambda s: print(s, file=sys.stderr))
        m_values = tuple(int(tok) for tok in args.m.split(","))
        report = ex.run_oracle_suite(args.out, m_values=m_values,
                                     seed=args.seed, n_states=args.states,
                                     t_end=args.t_end, dt=args.dt,
                                     verbose_print=say)
        for case in report["cases"]:
            print(f"m={case['m']} sign={case['sign']:+d} "
                  f"state={case['state']}: ratio={case['ratio']:.2f} "
                  f"{'PASS' if case['pass'] else 'FAIL'}")
        print("oracle:", "PASS" if report["all_pass"] else "FAIL")
        return 0 if report["all_pass"] else 1

    text = Path(args.config).read_text(encoding="utf-8")
    if args.overrides:
        text = apply_overrides(text, args.overrides)

    if args.command == "sweep":
        from .config import parse_config
        cfg = parse_config(text)
        results = ex.run_sweep(cfg, args.out, text, jobs=args.jobs,
                               dry_run=args.dry_run)
        if not args.dry_run:
            for sub, final in results.items():
                print(f"{sub}: P2={final['P2']:.6f} P1={final['P1']:.6f} "
                      f"P0={final['P0']:.6f}")
        return 0

    summary = ex.run_from_text(text, args.out, args.command,
                               dry_run=args.dry_run,
                               on_row=_progress(args.quiet))
    if summary.get("dry_run"):
        print("dry run; plan:", summary["plan"])
        return 0
    if args.command == "groundstate":
        print(f"two-body ground-state energy: {summary['two_body_energy']:.6f}")
        print("one-body energies:",
              " ".join(f"{e:.6f}" for e in summary["one_body_energies"]))
    else:
        final = summary["final"]
        print(f"final: t={final['t']:g} P2={final['P2']:.6f} "
              f"P1={final['P1']:.6f} P0={final['P0']:.6f}")
        if args.command == "reference" and summary.get("warning"):
            print("warning:", summary["warning"], file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
