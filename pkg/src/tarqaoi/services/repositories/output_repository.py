from __future__ import annotations

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

import pandas as pd
from pydantic import BaseModel

from tarqaoi import __version__
from tarqaoi.domain.manifest import RunManifest
from tarqaoi.ports.result_writer import ResultWriter

logger = logging.getLogger(__name__)

# 17 significant digits round-trip every double
FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"


class OutputRepository(ResultWriter):
    """
    Writes command outputs into one directory and remembers what it wrote so
    the run manifest can list it.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self._written: list[str] = []

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_json(self, name: str, payload: BaseModel | dict) -> str:
        path = self._path(name)
        try:
            if isinstance(payload, BaseModel):
                text = payload.model_dump_json(indent=2)
            else:
                text = json.dumps(payload, indent=2, sort_keys=True)
            path.write_text(text + "\n", encoding="utf-8")
        except Exception as e:
            logger.exception("Writing JSON output failed", extra={"path": str(path), "error": str(e)})
            raise
        self._written.append(name)
        logger.debug("JSON output written", extra={"path": str(path)})
        return name

    def write_csv(self, name: str, frame: pd.DataFrame) -> str:
        path = self._path(name)
        try:
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        except Exception as e:
            logger.exception("Writing CSV output failed", extra={"path": str(path), "error": str(e)})
            raise
        self._written.append(name)
        logger.debug("CSV output written", extra={"path": str(path), "rows": len(frame)})
        return name

    def written(self) -> list[str]:
        return list(self._written)

    def write_manifest(
        self,
        *,
        command: str,
        run_id: str,
        started_at: datetime,
        finished_at: datetime,
        scenario_fingerprint: Optional[str] = None,
        seed: Optional[int] = None,
    ) -> RunManifest:
        manifest = RunManifest(
            tool_version=__version__,
            command=command,
            run_id=run_id,
            scenario_fingerprint=scenario_fingerprint,
            seed=seed,
            started_at=started_at,
            finished_at=finished_at,
            outputs=self.written(),
        )
        self._path(MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info("Run manifest written", extra={"outputs": len(manifest.outputs)})
        return manifest
