from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from tarqaoi.domain.arrays import FloatArray


class MdapState(BaseModel):
    """(AoI, age of the update in transmission); m = 0 means nothing in service."""
    model_config = ConfigDict(frozen=True)

    n: int
    m: int

    def as_tuple(self) -> tuple[int, int]:
        return (self.n, self.m)


class Transition(BaseModel):
    model_config = ConfigDict(frozen=True)

    target: MdapState
    probability: float


class StationarySeries(BaseModel):
    """
    Stationary distribution of the per-source age process in compressed form:
    y[n-2] = pi(n, 1) and g[n-2] = pi(n, 0) for n = 2..horizon.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    L: int = Field(ge=1)
    lam: float
    p_i: float
    y: FloatArray
    g: FloatArray
    horizon: int
    tail_mass_bound: float = Field(ge=0.0)
    method: str = "series"
