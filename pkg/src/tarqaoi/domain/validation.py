from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class Tolerances(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float = Field(default=0.01, gt=0)
    tv: float = Field(default=0.005, gt=0)


class MetricCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    analytic: float
    empirical: float
    relative_error: float
    passed: bool


class SourceValidation(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: int
    tv_aoi: float
    tv_paoi: float
    checks: list[MetricCheck]
    passed: bool
    error: str | None = None


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerances: Tolerances
    sources: list[SourceValidation]
    passed: bool
