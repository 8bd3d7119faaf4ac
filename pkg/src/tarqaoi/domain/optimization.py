from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from tarqaoi.domain.metrics import NormalizationContext, SourceMetrics


class ObjectiveSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["ws", "ee"] = "ws"
    weight_aoi: float = Field(default=0.5, ge=0.0, le=1.0)


class IntRange(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    min: int = Field(ge=1)
    max: int = Field(ge=1)
    step: int = Field(default=1, gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "IntRange":
        if self.max < self.min:
            raise ValueError("max must be >= min")
        return self

    def values(self) -> list[int]:
        return list(range(self.min, self.max + 1, self.step))


class FloatRange(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    min: float = Field(ge=0.0)
    max: float = Field(ge=0.0)
    step: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _ordered(self) -> "FloatRange":
        if self.max < self.min:
            raise ValueError("max must be >= min")
        return self

    def values(self) -> list[float]:
        count = int(np.floor((self.max - self.min) / self.step + 1e-9)) + 1
        return [round(self.min + k * self.step, 12) for k in range(count)]

    @property
    def midpoint(self) -> float:
        return (self.min + self.max) / 2


class GridSpec(BaseModel):
    """
    One entry per source for each dimension; null keeps the template value.
    Example: {"L": [{"min": 1, "max": 15}, {"min": 1, "max": 15}]}
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    L: Optional[list[Optional[IntRange]]] = None
    q: Optional[list[Optional[FloatRange]]] = None
    P: Optional[list[Optional[FloatRange]]] = None

    def swept(self) -> list[tuple[str, int]]:
        """(dimension, source index) pairs in enumeration order."""
        out: list[tuple[str, int]] = []
        for dim in ("L", "q", "P"):
            ranges = getattr(self, dim)
            if ranges is None:
                continue
            out.extend((dim, i) for i, r in enumerate(ranges) if r is not None)
        return out


class Assignment(BaseModel):
    model_config = ConfigDict(frozen=True)

    L: tuple[int, ...]
    q: tuple[float, ...]
    P: tuple[float, ...]

    def key(self) -> tuple:
        return (self.L, self.q, self.P)


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    assignment: Assignment
    sources: list[SourceMetrics]
    source_avg_aoi: float
    total_power: float
    overall_ee: float
    harmonic_timeliness: float
    degenerate_sources: list[int] = Field(default_factory=list)


class SweepTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    swept: list[tuple[str, int]]
    rows: list[SweepRow]
    normalization: NormalizationContext


class Baseline(BaseModel):
    model_config = ConfigDict(frozen=True)

    assignment: Assignment
    value: float


class OptResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    objective: ObjectiveSpec
    argopt: Assignment
    value: float
    baselines: dict[str, Baseline] = Field(default_factory=dict)
    normalization: NormalizationContext
    degeneracy_flags: list[str] = Field(default_factory=list)
    table: Optional[str] = None
