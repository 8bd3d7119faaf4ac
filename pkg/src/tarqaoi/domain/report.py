from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict

from tarqaoi.domain.metrics import SourceMetrics, SystemMetrics
from tarqaoi.domain.scenario import DerivedParams, PowerCertificate
from tarqaoi.domain.simulation import EmpiricalSource


class SourceSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: int
    metrics: SourceMetrics
    carq_mean_aoi: float
    carq_mean_paoi: float
    power_certificate: Optional[PowerCertificate] = None


class AnalysisReport(BaseModel):
    """Output of `analyze`: derived parameters, per-source and system metrics."""
    model_config = ConfigDict(frozen=True)

    scenario_fingerprint: str
    derived: DerivedParams
    sources: list[SourceSummary]
    system: SystemMetrics


class SimulationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario_fingerprint: str
    slots_counted: int
    replications: int
    sources: list[EmpiricalSource]
