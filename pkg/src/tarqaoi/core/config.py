from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

LogLevel = Literal["CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG"]

class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="TARQAOI_",
        case_sensitive=False,
    )

    log_level: LogLevel = Field(default="INFO")

    # analytic engine
    series_eps: float = Field(default=1e-10, gt=0)
    max_horizon: int = Field(default=2_000_000, ge=16)
    oracle_max_iter: int = Field(default=200_000, ge=1)
    oracle_residual: float = Field(default=1e-12, gt=0)

    # simulator
    sim_chunk_slots: int = Field(default=1_000_000, ge=1)
    histogram_cap_factor: float = Field(default=10.0, gt=1)
    histogram_cap_floor: int = Field(default=64, ge=2)
    workers: int = Field(default=1, ge=1)

    # validation
    tolerance_mean: float = Field(default=0.01, gt=0)
    tolerance_tv: float = Field(default=0.005, gt=0)

@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
