"""Command-line front end.

Subcommands: ``project`` (theory + basic facts -> per-cell curves as CSV),
``query`` (combined probability of a fact at a time, from a projection CSV),
``acquire`` (fold completed-stay observations into a persistence state file),
``simulate`` (sample a scenario into facts/observations plus a convergence
report).

Exit codes: 0 success, 1 usage, 2 parse/validation errors in input files,
3 cyclic open tokens during refinement, 4 I/O errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys

from .acquisition import (
    UnknownClassError,
    load_state,
    observe_lifetime,
    parse_observations,
    save_state_file,
)
from .core import TimeGrid, auto_mesh_factor
from .projection import project
from .refinement import CyclicOpenTokens, refine
from .simulator import generate, parse_scenario, run_convergence
from .theory import ParseError, Pattern, parse_pattern_text, parse_theory, unify
from .tokens import TokenStore, load_basic_facts, parse_basic_facts

USAGE_ERROR = 1
PARSE_ERROR = 2
CYCLE_ERROR = 3
IO_ERROR = 4

_SNAP = 1e-9


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on bad flags, not argparse's 2
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _read(path: str) -> str:
    with open(path, "r") as handle:
        return handle.read()


def _resolve_mesh(delta: float, mesh: str, window_widths: list[float]) -> int:
    if mesh == "auto":
        return auto_mesh_factor(delta, window_widths)
    try:
        value = float(mesh)
    except ValueError:
        raise _UsageError(f"--mesh must be 'auto' or a number, got {mesh!r}")
    if not (0 < value <= delta * (1 + _SNAP)):
        raise _UsageError(f"--mesh must lie in (0, delta]; got {value} with delta {delta}")
    ratio = delta / value
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > _SNAP * factor:
        raise _UsageError(f"--mesh {value} does not evenly divide delta {delta}")
    return factor


def _write_projection_csv(
    handle, store: TokenStore, grid: TimeGrid, metadata: dict[str, object]
) -> None:
    for key, value in metadata.items():
        handle.write(f"# {key}={value}\n")
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(["token_id", "type", "kind", "cell", "time", "value"])
    for event in store.events:
        values = event.density.values
        for i in range(grid.omega):
            writer.writerow(
                [event.tid, str(event.event_type), "density", i + 1,
                 _fmt(grid.cell_start(i + 1)), _fmt(values[i])]
            )
    for fact in store.facts:
        values = fact.mass.values
        for i in range(grid.omega):
            writer.writerow(
                [fact.tid, str(fact.fact_type), "mass", i + 1,
                 _fmt(grid.cell_start(i + 1)), _fmt(values[i])]
            )


def _write_plot_script(path: str, csv_path: str, store: TokenStore) -> None:
    plotted = [(f.tid, str(f.fact_type), "mass") for f in store.facts]
    if not plotted:
        plotted = [(e.tid, str(e.event_type), "density") for e in store.events]
    lines = [
        "set datafile separator ','",
        "set xlabel 'time'",
        "set ylabel 'probability'",
        "set key outside right",
        "set grid",
    ]
    plots = [
        f"'{os.path.basename(csv_path)}' every ::1 "
        f"using 5:($1=={tid} && strcol(3) eq '{kind}' ? $6 : 1/0) "
        f"with steps title '{label} #{tid}'"
        for tid, label, kind in plotted
    ]
    lines.append("plot \\\n  " + ", \\\n  ".join(plots))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def cmd_project(args: argparse.Namespace) -> int:
    theory = parse_theory(_read(args.theory))
    facts_text = _read(args.facts)
    specs = parse_basic_facts(facts_text)
    factor = _resolve_mesh(args.delta, args.mesh, [s.lst - s.est for s in specs])
    grid = TimeGrid(args.origin, args.delta, args.omega).refined(factor)
    store = TokenStore()
    load_basic_facts(store, facts_text, grid)
    project(theory, store, grid)
    refine(store, theory, grid, args.epsilon)
    metadata = {
        "generator": "tempro project",
        "theory": args.theory,
        "facts": args.facts,
        "origin": _fmt(args.origin),
        "delta": _fmt(args.delta),
        "omega": args.omega,
        "mesh": _fmt(grid.delta),
        "cells": grid.omega,
        "epsilon": _fmt(args.epsilon),
    }
    buffer = io.StringIO()
    _write_projection_csv(buffer, store, grid, metadata)
    with open(args.out, "w") as handle:
        handle.write(buffer.getvalue())
    if args.plot:
        _write_plot_script(args.out + ".gp", args.out, store)
    return 0


def _load_projection_csv(path: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    metadata: dict[str, str] = {}
    rows: list[dict[str, str]] = []
    with open(path, "r") as handle:
        data_lines = []
        for line in handle:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    metadata[key.strip()] = value.strip()
            elif line.strip():
                data_lines.append(line)
    reader = csv.DictReader(data_lines)
    rows.extend(reader)
    return metadata, rows


def cmd_query(args: argparse.Namespace) -> int:
    metadata, rows = _load_projection_csv(args.csv)
    try:
        grid = TimeGrid(
            float(metadata["origin"]), float(metadata["mesh"]), int(metadata["cells"])
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"projection CSV lacks grid metadata ({exc})", 1, 1) from exc
    if not (grid.origin <= args.time < grid.end):
        raise _UsageError(
            f"time {args.time} outside the horizon [{grid.origin}, {grid.end})"
        )
    cell = grid.time_to_cell(args.time)
    pattern = parse_pattern_text(args.fact)
    masses: dict[str, list[float]] = {}
    for row in rows:
        if row["kind"] != "mass" or int(row["cell"]) != cell:
            continue
        row_type = parse_pattern_text(row["type"])
        if unify(pattern, row_type) is None:
            continue
        masses.setdefault(row["type"], []).append(float(row["value"]))
    if not masses:
        print(f"warning: no fact matching {pattern} in {args.csv}", file=sys.stderr)
        if pattern.is_ground:
            print(_fmt(0.0))
        return 0
    for type_text in sorted(masses):
        survived = 1.0
        for m in masses[type_text]:
            survived *= 1.0 - m
        combined = 1.0 - survived
        if pattern.is_ground:
            print(_fmt(combined))
        else:
            print(f"{type_text} {_fmt(combined)}")
    return 0


def cmd_acquire(args: argparse.Namespace) -> int:
    store = load_state(_read(args.state))
    observations = parse_observations(_read(args.observations))
    for obs in observations:
        try:
            observe_lifetime(store, obs.key, obs.arrival, obs.departure)
        except UnknownClassError as exc:
            raise ParseError(str(exc), obs.line, 1) from exc
    save_state_file(store, args.state)
    print(f"folded {len(observations)} observations into {len(store.classes)} classes")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = parse_scenario(_read(args.scenario))
    if args.seed is not None:
        scenario.seed = args.seed
    output = generate(scenario)
    rows = run_convergence(scenario, args.family)
    os.makedirs(args.outdir, exist_ok=True)
    with open(os.path.join(args.outdir, "facts.txt"), "w") as handle:
        handle.write(output.facts_text)
    with open(os.path.join(args.outdir, "observations.txt"), "w") as handle:
        handle.write(output.observations_text)
    with open(os.path.join(args.outdir, "convergence.csv"), "w") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["class", "n", "acquired_lambda", "reference_lambda", "relative_error"])
        for row in rows:
            writer.writerow(
                [row.class_key, row.n, _fmt(row.acquired),
                 _fmt(row.reference), _fmt(row.relative_error)]
            )
    for row in rows:
        print(
            f"{row.class_key} n={row.n} acquired={_fmt(row.acquired)} "
            f"reference={_fmt(row.reference)} rel_error={_fmt(row.relative_error)}"
        )
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tempro", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_project = sub.add_parser("project", help="project a theory over basic facts")
    p_project.add_argument("--theory", required=True, help="rule file")
    p_project.add_argument("--facts", required=True, help="basic-facts file")
    p_project.add_argument("--delta", type=float, required=True, help="cell width")
    p_project.add_argument("--omega", type=int, required=True, help="number of cells")
    p_project.add_argument("--origin", type=float, default=0.0, help="grid start time")
    p_project.add_argument("--epsilon", type=float, default=1e-4, help="closure threshold")
    p_project.add_argument(
        "--mesh",
        default="auto",
        help="working cell width: 'auto' (half the smallest event window) or a divisor of delta",
    )
    p_project.add_argument("--plot", action="store_true", help="also write a gnuplot script")
    p_project.add_argument("--out", required=True, help="output CSV path")
    p_project.set_defaults(func=cmd_project)

    p_query = sub.add_parser("query", help="combined fact probability at a time")
    p_query.add_argument("--csv", required=True, help="projection CSV from 'project'")
    p_query.add_argument("--fact", required=True, help="fact pattern, e.g. 'ATDOCK(TRUCK14)'")
    p_query.add_argument("--time", type=float, required=True)
    p_query.set_defaults(func=cmd_query)

    p_acquire = sub.add_parser("acquire", help="update persistence state from observations")
    p_acquire.add_argument("--state", required=True, help="state file (updated in place)")
    p_acquire.add_argument("--observations", required=True, help="completed-stay file")
    p_acquire.set_defaults(func=cmd_acquire)

    p_simulate = sub.add_parser("simulate", help="sample a scenario and report convergence")
    p_simulate.add_argument("--scenario", required=True)
    p_simulate.add_argument("--outdir", required=True)
    p_simulate.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_simulate.add_argument(
        "--family", choices=("exponential", "linear"), default="exponential"
    )
    p_simulate.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PARSE_ERROR
    except CyclicOpenTokens as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CYCLE_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
