"""
Cross-checks of analytic metrics against empirical ones.
"""
from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from tarqaoi.core.config import get_settings
from tarqaoi.domain.metrics import Pmf, SourceAnalysis, SourceMetrics
from tarqaoi.domain.simulation import EmpiricalSource
from tarqaoi.domain.validation import (
    MetricCheck,
    SourceValidation,
    Tolerances,
    ValidationReport,
)

logger = logging.getLogger(__name__)

CHECKED_METRICS = ("mean_aoi", "mean_paoi", "duty_cycle", "avg_power", "ee", "mean_tx_time")


def default_tolerances() -> Tolerances:
    settings = get_settings()
    return Tolerances(mean=settings.tolerance_mean, tv=settings.tolerance_tv)


def total_variation(a: Pmf, b: Pmf) -> float:
    """
    TV distance over the common support; everything past the shorter PMF's
    last index is lumped into one tail bucket on both sides.
    """
    first = min(a.first_index, b.first_index)
    last = min(a.last_index, b.last_index)
    support = np.arange(first, last + 1)
    body_a = np.array([a.at(n) for n in support]) if support.size else np.zeros(0)
    body_b = np.array([b.at(n) for n in support]) if support.size else np.zeros(0)
    tail_a = a.total() - float(body_a.sum())
    tail_b = b.total() - float(body_b.sum())
    return 0.5 * (float(np.abs(body_a - body_b).sum()) + abs(tail_a - tail_b))


def relative_error(analytic: float, empirical: float) -> float:
    if analytic == 0.0:
        return abs(empirical)
    return abs(empirical - analytic) / abs(analytic)


def _checks(a: SourceMetrics, e: SourceMetrics, a_rate: float, e_rate: float, tol: float) -> list[MetricCheck]:
    pairs = [(name, getattr(a, name), getattr(e, name)) for name in CHECKED_METRICS]
    pairs.append(("delivery_rate", a_rate, e_rate))
    checks = []
    for name, av, ev in pairs:
        err = relative_error(av, ev)
        checks.append(
            MetricCheck(name=name, analytic=av, empirical=ev, relative_error=err, passed=err <= tol)
        )
    return checks


def compare_source(
    analytic: SourceAnalysis, empirical: EmpiricalSource, tolerances: Tolerances
) -> SourceValidation:
    if empirical.error is not None or empirical.metrics is None:
        return SourceValidation(
            source=analytic.source,
            tv_aoi=1.0,
            tv_paoi=1.0,
            checks=[],
            passed=False,
            error=empirical.error or "no empirical metrics",
        )

    assert empirical.aoi_pmf is not None and empirical.paoi_pmf is not None
    tv_aoi = total_variation(analytic.aoi_pmf, empirical.aoi_pmf)
    tv_paoi = total_variation(analytic.paoi_pmf, empirical.paoi_pmf)
    checks = _checks(
        analytic.metrics,
        empirical.metrics,
        1.0 / analytic.metrics.mean_success_interval,
        empirical.delivery_rate,
        tolerances.mean,
    )
    passed = all(c.passed for c in checks) and tv_aoi < tolerances.tv and tv_paoi < tolerances.tv
    return SourceValidation(
        source=analytic.source,
        tv_aoi=tv_aoi,
        tv_paoi=tv_paoi,
        checks=checks,
        passed=passed,
    )


def compare(
    analytic: Sequence[SourceAnalysis],
    empirical: Sequence[EmpiricalSource],
    tolerances: Optional[Tolerances] = None,
) -> ValidationReport:
    tolerances = tolerances or default_tolerances()
    results = [compare_source(a, e, tolerances) for a, e in zip(analytic, empirical)]

    for r in results:
        if not r.passed:
            failed = [c.name for c in r.checks if not c.passed]
            logger.warning(
                "Source failed validation",
                extra={
                    "source": r.source,
                    "tv_aoi": r.tv_aoi,
                    "tv_paoi": r.tv_paoi,
                    "failed_checks": failed,
                    "error": r.error,
                },
            )

    report = ValidationReport(
        tolerances=tolerances, sources=results, passed=all(r.passed for r in results)
    )
    logger.info("Validation finished", extra={"passed": report.passed, "sources": len(results)})
    return report


def as_empirical(analysis: SourceAnalysis) -> EmpiricalSource:
    """View an analytic result through the empirical interface."""
    return EmpiricalSource(
        source=analysis.source,
        delivery_rate=1.0 / analysis.metrics.mean_success_interval,
        metrics=analysis.metrics,
        aoi_pmf=analysis.aoi_pmf,
        paoi_pmf=analysis.paoi_pmf,
        tx_time_pmf=analysis.tx_time_pmf,
    )
