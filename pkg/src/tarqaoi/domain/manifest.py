from __future__ import annotations

from datetime import datetime
from typing import Optional

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    tool_version: str
    command: str
    run_id: str
    scenario_fingerprint: Optional[str] = None
    seed: Optional[int] = None
    started_at: datetime
    finished_at: datetime
    outputs: list[str] = Field(default_factory=list)
