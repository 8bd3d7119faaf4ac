from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from tarqaoi.core.errors import InvalidConfig, InvalidScenario, Issue
from tarqaoi.domain.optimization import GridSpec
from tarqaoi.domain.scenario import Scenario

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


def canonical_json(model: BaseModel) -> str:
    return json.dumps(model.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def fingerprint(scenario: Scenario) -> str:
    """sha256 of the canonicalized scenario JSON."""
    return hashlib.sha256(canonical_json(scenario).encode("utf-8")).hexdigest()


class ScenarioRepository:
    """
    Reads scenario and grid documents from disk.
    Parsing problems surface as typed errors carrying one Issue per field.
    """

    def _read(self, path: Path, model: type[M], error: type[InvalidScenario] | type[InvalidConfig]) -> M:
        logger.debug("Reading document", extra={"path": str(path), "model": model.__name__})
        try:
            raw = path.read_text(encoding="utf-8")
        except OSError as e:
            logger.warning("Document not readable", extra={"path": str(path), "error": str(e)})
            raise error(
                f"cannot read {path}",
                [Issue(path=str(path), field="<file>", reason=e.strerror or str(e))],
            ) from e

        try:
            return model.model_validate_json(raw)
        except ValidationError as e:
            converted = InvalidScenario.from_validation_error(e, path=str(path))
            logger.warning(
                "Document failed validation",
                extra={"path": str(path), "issue_count": len(converted.issues)},
            )
            raise error(str(converted), converted.issues) from e

    def load_scenario(self, path: Path) -> Scenario:
        scenario = self._read(path, Scenario, InvalidScenario)
        defaulted = scenario.default_power_sources()
        if defaulted:
            logger.warning(
                "Direct channel without transmit power, using P = 1",
                extra={"path": str(path), "sources": defaulted},
            )
        logger.info(
            "Scenario loaded",
            extra={"path": str(path), "n_sources": scenario.n_sources, "fingerprint": fingerprint(scenario)},
        )
        return scenario

    def load_grid(self, path: Path) -> GridSpec:
        grid = self._read(path, GridSpec, InvalidConfig)
        logger.info("Grid loaded", extra={"path": str(path), "swept": len(grid.swept())})
        return grid

    def dump(self, scenario: Scenario, path: Path) -> None:
        path.write_text(scenario.model_dump_json(indent=2), encoding="utf-8")
