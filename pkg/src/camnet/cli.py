"""Command line: ``camnet simulate|verify|report|mean``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import runner
from .errors import (
    DisconnectedGraphError,
    NoBaselineError,
    ScenarioParseError,
    ScenarioValidationError,
    SimulationError,
)
from .scenario import load_scenario
from .verify import lemma_suite

_INPUT_ERRORS = (ScenarioParseError, ScenarioValidationError, DisconnectedGraphError,
                 NoBaselineError, OSError)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="camnet", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="run a scenario, write series.csv and summary.txt")
    s.add_argument("scenario", type=Path)
    s.add_argument("--out", type=Path, default=Path("out"))
    s.add_argument("--ke", type=float)
    s.add_argument("--ks", type=float)
    s.add_argument("--dt", type=float)
    s.add_argument("--tfinal", type=float)
    s.add_argument("--scheme", choices=("euler", "midpoint"))
    s.add_argument("--error-mode", choices=("visual", "geometric"))

    v = sub.add_parser("verify", help="seeded property suite")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--trials", type=int, default=10_000)

    r = sub.add_parser("report", help="recompute metrics from a recorded series.csv")
    r.add_argument("series", type=Path)
    r.add_argument("scenario", type=Path)

    m = sub.add_parser("mean", help="print the averaging baseline only")
    m.add_argument("scenario", type=Path)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "verify":
            rep = lemma_suite(args.seed, args.trials)
            print(rep.text())
            return runner.EXIT_OK if rep.passed else runner.EXIT_SUITE
        scn = load_scenario(args.scenario)
        if args.cmd == "simulate":
            from .scenario import validate
            scn = scn.with_overrides(k_e=args.ke, k_s=args.ks, dt=args.dt, t_final=args.tfinal,
                                     scheme=args.scheme, error_mode=args.error_mode)
            validate(scn)
            result = runner.run(scn, args.out)
            sys.stdout.write(runner.summary_text(result.summary))
        elif args.cmd == "report":
            d = runner.recompute(args.series, scn)
            sys.stdout.write(runner.summary_text(d))
        elif args.cmd == "mean":
            sys.stdout.write(runner.baseline_text(scn))
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return runner.EXIT_INPUT
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return runner.EXIT_SIMULATION
    return runner.EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
