from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tarqaoi.domain.optimization import ObjectiveSpec
from tarqaoi.domain.simulation import SimConfig


class DirectChannel(BaseModel):
    """Channel given directly by its per-attempt success probability."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma: float = Field(ge=0.0, le=1.0)
    # transmit power only prices energy here; gamma does not depend on it.
    # Omitted P means unit power; the scenario loader warns about it.
    P: float = Field(default=1.0, ge=0.0)


class RayleighChannel(BaseModel):
    """Rayleigh block fading with unit noise: gamma = exp(-(e^R - 1) / P)."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    P: float = Field(gt=0.0)
    R: float = Field(gt=0.0)


class ChannelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    direct: Optional[DirectChannel] = None
    rayleigh: Optional[RayleighChannel] = None

    @model_validator(mode="after")
    def _exactly_one(self) -> "ChannelSpec":
        if (self.direct is None) == (self.rayleigh is None):
            raise ValueError("channel must define exactly one of 'direct' or 'rayleigh'")
        return self

    @property
    def power(self) -> float:
        return self.direct.P if self.direct is not None else self.rayleigh.P  # type: ignore[union-attr]

    @property
    def k(self) -> Optional[float]:
        """k = e^R - 1 for rayleigh channels."""
        return math.expm1(self.rayleigh.R) if self.rayleigh is not None else None


class SourceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    q: float = Field(ge=0.0, le=1.0, description="Update generation probability per slot.")
    L: int = Field(ge=1, description="Maximum transmission time (attempt cap) per update.")
    channel: ChannelSpec


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    sources: list[SourceSpec] = Field(min_length=1)
    sim: SimConfig = Field(default_factory=SimConfig)
    objective: Optional[ObjectiveSpec] = None

    @model_validator(mode="after")
    def _someone_generates(self) -> "Scenario":
        if self.sources and all(s.q == 0.0 for s in self.sources):
            raise ValueError("at least one source must have q > 0")
        return self

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    def default_power_sources(self) -> list[int]:
        """Sources whose direct channel omits P and so runs at unit power."""
        return [
            i
            for i, s in enumerate(self.sources)
            if s.channel.direct is not None and "P" not in s.channel.direct.model_fields_set
        ]


class DerivedSource(BaseModel):
    model_config = ConfigDict(frozen=True)

    p_i: float
    gamma: float
    lam: float
    L: int
    P: float
    k: Optional[float] = None


class DerivedParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    sources: list[DerivedSource]

    @property
    def n_sources(self) -> int:
        return len(self.sources)


CertificateCondition = Literal["L<=3", "p-threshold", "gamma-threshold"]


class PowerCertificate(BaseModel):
    """Sufficient-condition verdict on whether average power grows with transmit power."""
    model_config = ConfigDict(frozen=True)

    status: Literal["CertifiedIncreasing", "Unknown"]
    condition: Optional[CertificateCondition] = None
