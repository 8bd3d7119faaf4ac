from __future__ import annotations

import argparse
import logging

from tarqaoi.cli.common import (
    Run,
    add_objective_args,
    add_scenario_args,
    emit,
    load_scenario,
)
from tarqaoi.domain.optimization import ObjectiveSpec, OptResult, SweepTable
from tarqaoi.domain.scenario import Scenario
from tarqaoi.services.optimization_service import (
    optimize_ee,
    optimize_ws,
    sweep,
    sweep_frame,
)
from tarqaoi.services.repositories.scenario_repository import ScenarioRepository

logger = logging.getLogger(__name__)

SWEEP_CSV = "sweep.csv"


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("sweep", help="evaluate every point of a parameter grid")
    add_scenario_args(parser)
    add_objective_args(parser)
    parser.add_argument("--workers", type=int, default=None, help="process pool size")
    parser.set_defaults(handler=handle)


def resolve_objective(scenario: Scenario, args: argparse.Namespace) -> ObjectiveSpec:
    base = scenario.objective or ObjectiveSpec()
    return ObjectiveSpec(
        kind=args.objective or base.kind,
        weight_aoi=args.weight if args.weight is not None else base.weight_aoi,
    )


def evaluate(command: str, args: argparse.Namespace) -> tuple[Run, SweepTable, OptResult]:
    """Sweep the grid, optimize the requested objective and write both outputs."""
    scenario = load_scenario(args)
    grid = ScenarioRepository().load_grid(args.grid)
    objective = resolve_objective(scenario, args)
    run = Run(command, args.out, scenario)

    table = sweep(scenario, grid, workers=args.workers)
    if objective.kind == "ws":
        result = optimize_ws(scenario, grid, objective.weight_aoi, table=table)
    else:
        result = optimize_ee(scenario, grid, table=table)
    result = result.model_copy(update={"table": SWEEP_CSV})

    run.output.write_csv(SWEEP_CSV, sweep_frame(table, objective.weight_aoi))
    run.output.write_json("result.json", result)
    return run, table, result


def handle(args: argparse.Namespace) -> int:
    run, table, result = evaluate("sweep", args)
    outputs = run.finish()
    emit({"command": "sweep", "rows": len(table.rows), "outputs": outputs})
    return 0
