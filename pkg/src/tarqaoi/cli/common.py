"""
Flags and plumbing shared by every subcommand.
"""
from __future__ import annotations

import argparse
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from tarqaoi.core.context import get_run_id
from tarqaoi.core.errors import InvalidConfig, InvalidScenario
from tarqaoi.domain.metrics import Pmf
from tarqaoi.domain.scenario import Scenario
from tarqaoi.domain.simulation import SimConfig
from tarqaoi.domain.validation import Tolerances
from tarqaoi.services.repositories.output_repository import OutputRepository
from tarqaoi.services.repositories.scenario_repository import (
    ScenarioRepository,
    fingerprint,
)
from tarqaoi.services.validation_service import default_tolerances

logger = logging.getLogger(__name__)


def add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", type=Path, required=True, help="scenario JSON file")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")


def add_sim_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--slots", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--replications", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None, help="process pool size")


def add_tolerance_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tolerance-mean", type=float, default=None)
    parser.add_argument("--tolerance-tv", type=float, default=None)


def add_objective_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid", type=Path, required=True, help="GridSpec JSON file")
    parser.add_argument("--objective", choices=["ws", "ee"], default=None)
    parser.add_argument("--weight", type=float, default=None, help="weight of the AoI term in WS")


def load_scenario(args: argparse.Namespace) -> Scenario:
    scenario = ScenarioRepository().load_scenario(args.scenario)
    overrides = {
        key: getattr(args, key, None)
        for key in ("slots", "seed", "replications")
        if getattr(args, key, None) is not None
    }
    if not overrides:
        return scenario
    try:
        sim = SimConfig.model_validate({**scenario.sim.model_dump(), **overrides})
    except ValidationError as e:
        raise InvalidConfig(
            "invalid simulation flags", InvalidScenario.from_validation_error(e, path="<flags>").issues
        ) from e
    logger.debug("Simulation settings overridden", extra={"overrides": sorted(overrides)})
    return scenario.model_copy(update={"sim": sim})


def tolerances(args: argparse.Namespace) -> Tolerances:
    base = default_tolerances()
    try:
        return Tolerances(
            mean=args.tolerance_mean if args.tolerance_mean is not None else base.mean,
            tv=args.tolerance_tv if args.tolerance_tv is not None else base.tv,
        )
    except ValidationError as e:
        raise InvalidConfig(
            "invalid tolerance flags", InvalidScenario.from_validation_error(e, path="<flags>").issues
        ) from e


def pmf_frame(columns: dict[str, Optional[Pmf]]) -> pd.DataFrame:
    """Align PMFs on n = 2..max last index; absent entries are 0."""
    present = [p for p in columns.values() if p is not None]
    last = max((p.last_index for p in present), default=1)
    n = np.arange(2, last + 1)
    data: dict[str, np.ndarray] = {"n": n}
    for name, pmf in columns.items():
        data[name] = np.array([pmf.at(int(k)) for k in n]) if pmf is not None else np.zeros(len(n))
    return pd.DataFrame(data)


class Run:
    """Output directory of one invocation plus its manifest."""

    def __init__(self, command: str, out_dir: Path, scenario: Optional[Scenario] = None):
        self.command = command
        self.scenario = scenario
        self.output = OutputRepository(out_dir)
        self.started_at = datetime.now(timezone.utc)

    def finish(self) -> list[str]:
        self.output.write_manifest(
            command=self.command,
            run_id=get_run_id() or "-",
            started_at=self.started_at,
            finished_at=datetime.now(timezone.utc),
            scenario_fingerprint=fingerprint(self.scenario) if self.scenario is not None else None,
            seed=self.scenario.sim.seed if self.scenario is not None else None,
        )
        return self.output.written()


def emit(summary: dict) -> None:
    """Machine-readable summary on stdout."""
    print(json.dumps(summary, sort_keys=True))
