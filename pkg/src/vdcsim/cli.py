"""Command line front end.

    vdcsim --scenario scenarios/case_study.json --seed 7 --format csv

Exit codes:
    0  run completed (or validation / oracle output succeeded)
    2  scenario failed to parse or validate
    3  the simulation raised a runtime error
    4  at least one activation missed its deadline and --fail-on-miss
       was given
    5  the run produced no activations
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .report import ResultsDocument, has_missed_deadline, render_csv, render_json
from .scenario import (
    ScenarioParseError,
    ScenarioValidationError,
    build_simulation,
    load_scenario,
    oracle_rows,
)

log = logging.getLogger(__name__)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vdcsim",
        description="Deterministic discrete-event simulator for virtualized "
                    "datacenter workloads.",
    )
    parser.add_argument("--scenario", required=True, metavar="PATH",
                        help="scenario JSON file")
    parser.add_argument("--seed", type=int, default=None, metavar="N",
                        help="override the scenario's arrival seed")
    parser.add_argument("--output", default=None, metavar="PATH",
                        help="write results here instead of stdout")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="output format (default: csv)")
    parser.add_argument("--validate", action="store_true",
                        help="check the scenario and exit without simulating")
    parser.add_argument("--oracle", action="store_true",
                        help="print the closed-form makespan grid and exit "
                             "without simulating")
    parser.add_argument("--fail-on-miss", action="store_true",
                        help="exit with status 4 when any activation misses "
                             "its deadline")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log simulation progress to stderr")
    return parser


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def _oracle_table(rows: list[dict]) -> str:
    lines = ["virt_config,placement_config,payload_bytes,switch_count,makespan_s"]
    for row in rows:
        lines.append(
            f"{row['virt_config']},{row['placement_config']},"
            f"{row['payload_bytes']},{row['switch_count']},"
            f"{row['makespan_s']:.6f}"
        )
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        scenario = load_scenario(args.scenario)
    except FileNotFoundError:
        print(f"error: scenario file not found: {args.scenario}", file=sys.stderr)
        return 2
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScenarioValidationError as exc:
        print(f"error: scenario is invalid ({len(exc.errors)} problems)", file=sys.stderr)
        for problem in exc.errors:
            print(f"  - {problem}", file=sys.stderr)
        return 2

    if args.validate:
        print(f"ok: scenario {scenario.name!r} is valid")
        return 0

    if args.oracle:
        _emit(_oracle_table(oracle_rows(scenario)), args.output)
        return 0

    try:
        built = build_simulation(scenario, seed=args.seed)
        built.sim.run()
    except ScenarioValidationError as exc:
        print(f"error: scenario is invalid ({len(exc.errors)} problems)", file=sys.stderr)
        for problem in exc.errors:
            print(f"  - {problem}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report, do not crash with a trace
        log.exception("simulation failed")
        print(f"error: simulation failed: {exc}", file=sys.stderr)
        return 3

    records = built.broker.records
    if not records:
        print("error: the run produced no activations", file=sys.stderr)
        return 5

    doc = ResultsDocument(metadata=built.metadata, records=records)
    text = render_csv(doc) if args.format == "csv" else render_json(doc)
    _emit(text, args.output)

    if args.fail_on_miss and has_missed_deadline(doc):
        print("error: at least one activation missed its deadline", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
