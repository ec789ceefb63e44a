#!/usr/bin/env python3
"""Study how fast lifetime acquisition converges on simulated data.

Replays a simulation scenario, feeds the observed stay durations to the
acquisition learner in arrival order, and prints the learned decay rate at
logarithmic checkpoints next to the closed-form rate for the scenario's
true mean lifetime.
"""
from __future__ import annotations

import argparse
import dataclasses
import pathlib

from tempro import parse_scenario, run_convergence

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default=str(ROOT / "data" / "trucks.scenario"))
    parser.add_argument(
        "--family",
        choices=("exponential", "linear"),
        default="exponential",
        help="decay family to fit to the observed durations",
    )
    parser.add_argument("--seed", type=int, default=None, help="override scenario seed")
    args = parser.parse_args()

    scenario = parse_scenario(pathlib.Path(args.scenario).read_text())
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    rows = run_convergence(scenario, args.family)

    print(f"scenario: {args.scenario} (seed {scenario.seed})")
    print(f"family: {args.family}, reference rate {rows[0].reference!r}")
    print(f"{'n':>8}  {'learned':>14}  {'reference':>14}  {'rel. error':>10}")
    for row in rows:
        print(
            f"{row.n:>8}  {row.acquired:>14.8f}  {row.reference:>14.8f}"
            f"  {row.relative_error:>10.5f}"
        )


if __name__ == "__main__":
    main()
