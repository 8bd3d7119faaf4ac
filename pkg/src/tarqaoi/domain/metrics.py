from __future__ import annotations

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from tarqaoi.domain.arrays import FloatArray


class Pmf(BaseModel):
    """
    PMF on n = first_index..first_index+len(probs)-1 with the remaining mass in
    `tail_mass`. A positive `tail_ratio` means the tail is geometric with that
    ratio, which lets `mean()` account for it in closed form.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    first_index: int = 2
    probs: FloatArray
    tail_mass: float = Field(default=0.0, ge=0.0)
    tail_ratio: float = Field(default=0.0, ge=0.0, lt=1.0)

    @property
    def last_index(self) -> int:
        return self.first_index + len(self.probs) - 1

    def support(self) -> np.ndarray:
        return np.arange(self.first_index, self.last_index + 1)

    def at(self, n: int) -> float:
        idx = n - self.first_index
        if idx < 0 or idx >= len(self.probs):
            return 0.0
        return float(self.probs[idx])

    def total(self) -> float:
        return float(self.probs.sum()) + self.tail_mass

    def mean(self) -> float:
        body = float(np.dot(self.support(), self.probs))
        if not self.probs.size or self.tail_ratio == 0.0:
            return body + self.tail_mass * (self.last_index + 1)
        r = self.tail_ratio
        last = float(self.probs[-1])
        h = self.last_index
        return body + last * (h * r / (1 - r) + r / (1 - r) ** 2)


class SourceMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_aoi: float
    mean_paoi: float
    duty_cycle: float
    avg_power: float
    ee: float
    mean_tx_time: float
    mean_success_interval: float


class SourceAnalysis(BaseModel):
    """Closed-form metrics of one source together with its AoI/PAoI/T PMFs."""
    model_config = ConfigDict(frozen=True)

    source: int
    metrics: SourceMetrics
    aoi_pmf: Pmf
    paoi_pmf: Pmf
    tx_time_pmf: Optional[Pmf] = None


class NormalizationContext(BaseModel):
    """Min-max bounds of the aggregates over the grid under study."""
    model_config = ConfigDict(frozen=True)

    aoi_min: float
    aoi_max: float
    power_min: float
    power_max: float

    def norm_aoi(self, value: float) -> float:
        return _minmax(value, self.aoi_min, self.aoi_max)

    def norm_power(self, value: float) -> float:
        return _minmax(value, self.power_min, self.power_max)


def _minmax(value: float, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    return (value - lo) / (hi - lo)


class SystemMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    source_avg_aoi: float
    total_power: float
    weighted_sum: Optional[float] = None
    overall_ee: float
    harmonic_timeliness: float


class ArqLimit(BaseModel):
    """Means and PMFs of AoI and PAoI under unbounded retransmission."""
    model_config = ConfigDict(frozen=True)

    mean_aoi: float
    mean_paoi: float
    aoi_pmf: Pmf
    paoi_pmf: Pmf
