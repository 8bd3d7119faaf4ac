from __future__ import annotations

import argparse
import logging

from tarqaoi.cli.common import (
    Run,
    add_scenario_args,
    add_sim_args,
    add_tolerance_args,
    emit,
    load_scenario,
    tolerances,
)
from tarqaoi.services.metrics_service import analyze_source
from tarqaoi.services.model_service import derive
from tarqaoi.services.simulation_service import empirical_metrics, run_replications
from tarqaoi.services.validation_service import compare

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("validate", help="simulate and compare against closed forms")
    add_scenario_args(parser)
    add_sim_args(parser)
    add_tolerance_args(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args)
    tol = tolerances(args)
    derived = derive(scenario)
    run = Run("validate", args.out, scenario)

    # analytic first so degenerate sources fail fast as input errors
    analytic = [analyze_source(i, derived) for i in range(derived.n_sources)]
    counters = run_replications(scenario, derived, workers=args.workers)
    empirical = empirical_metrics(counters, [s.P for s in derived.sources])

    report = compare(analytic, empirical, tol)
    run.output.write_json("validation.json", report)
    outputs = run.finish()

    emit(
        {
            "command": "validate",
            "passed": report.passed,
            "tv_aoi": [s.tv_aoi for s in report.sources],
            "outputs": outputs,
        }
    )
    return 0 if report.passed else 1
