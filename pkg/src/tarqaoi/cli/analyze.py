from __future__ import annotations

import argparse
import logging

from tarqaoi.cli.common import Run, add_scenario_args, emit, load_scenario, pmf_frame
from tarqaoi.domain.report import AnalysisReport, SourceSummary
from tarqaoi.services.metrics_service import analyze_source, carq_metrics, system_metrics
from tarqaoi.services.model_service import derive, power_monotonicity_certificate
from tarqaoi.services.repositories.scenario_repository import fingerprint

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("analyze", help="closed-form metrics and AoI/PAoI PMFs")
    add_scenario_args(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    scenario = load_scenario(args)
    derived = derive(scenario)
    logger.info("Analysis requested", extra={"n_sources": derived.n_sources})
    run = Run("analyze", args.out, scenario)

    summaries = []
    analyses = []
    for i, src in enumerate(derived.sources):
        analysis = analyze_source(i, derived)
        analyses.append(analysis)
        carq = carq_metrics(derived.p, src.p_i, src.gamma)
        spec = scenario.sources[i]
        certificate = (
            power_monotonicity_certificate(src.L, derived.p, src.gamma)
            if spec.channel.rayleigh is not None
            else None
        )
        summaries.append(
            SourceSummary(
                source=i,
                metrics=analysis.metrics,
                carq_mean_aoi=carq.mean_aoi,
                carq_mean_paoi=carq.mean_paoi,
                power_certificate=certificate,
            )
        )
        run.output.write_csv(
            f"pmf_source{i}.csv",
            pmf_frame({"aoi_pmf": analysis.aoi_pmf, "paoi_pmf": analysis.paoi_pmf}),
        )

    report = AnalysisReport(
        scenario_fingerprint=fingerprint(scenario),
        derived=derived,
        sources=summaries,
        system=system_metrics([a.metrics for a in analyses]),
    )
    run.output.write_json("analysis.json", report)
    outputs = run.finish()
    logger.info("Analysis finished", extra={"outputs": len(outputs)})
    emit(
        {
            "command": "analyze",
            "mean_aoi": [a.metrics.mean_aoi for a in analyses],
            "outputs": outputs,
        }
    )
    return 0
