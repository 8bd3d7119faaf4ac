from __future__ import annotations

import argparse
import logging

from tarqaoi.cli.common import add_objective_args, add_scenario_args, emit
from tarqaoi.cli.sweep import evaluate

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("optimize", help="grid optimum of the WS or EE objective")
    add_scenario_args(parser)
    add_objective_args(parser)
    parser.add_argument("--workers", type=int, default=None, help="process pool size")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    run, table, result = evaluate("optimize", args)
    outputs = run.finish()
    logger.info(
        "Optimization finished",
        extra={"objective": result.objective.kind, "value": result.value, "rows": len(table.rows)},
    )
    emit(
        {
            "command": "optimize",
            "objective": result.objective.kind,
            "argopt": result.argopt.model_dump(mode="json"),
            "value": result.value,
            "baselines": {
                name: {"assignment": b.assignment.model_dump(mode="json"), "value": b.value}
                for name, b in result.baselines.items()
            },
            "degeneracy_flags": result.degeneracy_flags,
            "outputs": outputs,
        }
    )
    return 0
