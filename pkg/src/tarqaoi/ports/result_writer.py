from __future__ import annotations

from typing import Protocol

import pandas as pd
from pydantic import BaseModel


class ResultWriter(Protocol):
    def write_json(self, name: str, payload: BaseModel | dict) -> str: ...

    def write_csv(self, name: str, frame: pd.DataFrame) -> str: ...

    def written(self) -> list[str]: ...
