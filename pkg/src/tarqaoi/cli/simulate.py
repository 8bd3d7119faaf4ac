from __future__ import annotations

import argparse
import logging

from tarqaoi.cli.common import (
    Run,
    add_scenario_args,
    add_sim_args,
    emit,
    load_scenario,
    pmf_frame,
)
from tarqaoi.domain.report import SimulationReport
from tarqaoi.services.model_service import derive
from tarqaoi.services.simulation_service import empirical_metrics, run_replications

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("simulate", help="slot-level Monte Carlo simulation")
    add_scenario_args(parser)
    add_sim_args(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args)
    derived = derive(scenario)
    run = Run("simulate", args.out, scenario)

    counters = run_replications(scenario, derived, workers=args.workers)
    empirical = empirical_metrics(counters, [s.P for s in derived.sources])

    run.output.write_json("counters.json", counters)
    report = SimulationReport(
        scenario_fingerprint=counters.fingerprint,
        slots_counted=counters.slots_counted,
        replications=counters.replications,
        sources=empirical,
    )
    run.output.write_json("empirical.json", report)
    for e in empirical:
        run.output.write_csv(
            f"pmf_empirical_source{e.source}.csv",
            pmf_frame({"aoi_pmf": e.aoi_pmf, "paoi_pmf": e.paoi_pmf}),
        )

    outputs = run.finish()
    logger.info("Simulation command finished", extra={"outputs": len(outputs)})
    emit(
        {
            "command": "simulate",
            "slots_counted": counters.slots_counted,
            "deliveries": [c.deliveries for c in counters.sources],
            "outputs": outputs,
        }
    )
    return 0
