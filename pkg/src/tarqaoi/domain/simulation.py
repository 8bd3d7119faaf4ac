from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from tarqaoi.domain.arrays import IntArray
from tarqaoi.domain.metrics import Pmf, SourceMetrics


class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    slots: int = Field(default=10_000_000, ge=1)
    # None picks max(10^4, 20 x analytic mean AoI), see SimulationService
    warmup: Optional[int] = Field(default=None, ge=0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    replications: int = Field(default=1, ge=1)
    histogram_cap: Optional[int] = Field(default=None, ge=2)


class SourceCounters(BaseModel):
    """Monte Carlo tallies of one source. Histogram index = AoI value in slots."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    aoi_histogram: IntArray
    aoi_overflow: int = 0
    aoi_sum: int = 0
    paoi_histogram: IntArray
    paoi_overflow: int = 0
    paoi_sum: int = 0
    tx_time_histogram: IntArray
    busy_slots: int = 0
    deliveries: int = 0
    drops: int = 0
    preemptions: int = 0
    energy: float = 0.0

    @property
    def cap(self) -> int:
        return len(self.aoi_histogram) - 1


class SimCounters(BaseModel):
    model_config = ConfigDict(frozen=True)

    fingerprint: str
    slots_counted: int
    replications: int = 1
    sources: list[SourceCounters]


class SimTrace(BaseModel):
    """Per-slot trajectory of a short run; -1 marks an idle channel or no delivery."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    aoi: list[IntArray]
    owner: IntArray
    attempt: IntArray
    delivered: IntArray

    def aoi_matrix(self) -> np.ndarray:
        return np.vstack(self.aoi)


class EmpiricalSource(BaseModel):
    """Time-average metrics and histogram PMFs of one source; `error` is set when undefined."""
    model_config = ConfigDict(frozen=True)

    source: int
    delivery_rate: float
    metrics: Optional[SourceMetrics] = None
    aoi_pmf: Optional[Pmf] = None
    paoi_pmf: Optional[Pmf] = None
    tx_time_pmf: Optional[Pmf] = None
    error: Optional[str] = None
