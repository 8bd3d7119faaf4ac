"""
Run context management for tracking run_id, command, replication and grid point
across the orchestration layer and worker processes.
"""
from __future__ import annotations

import contextvars
from typing import Optional

_run_id: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("run_id", default=None)
_command: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("command", default=None)
_rep_index: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("rep_index", default=None)
_grid_point: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("grid_point", default=None)


def get_run_id() -> Optional[str]:
    """Get the current run ID from context."""
    return _run_id.get()


def set_run_id(run_id: str) -> None:
    """Set the run ID in context."""
    _run_id.set(run_id)


def get_command() -> Optional[str]:
    return _command.get()


def set_command(command: str) -> None:
    _command.set(command)


def get_rep_index() -> Optional[str]:
    """Get the replication currently being simulated."""
    return _rep_index.get()


def set_rep_index(rep_index: int) -> None:
    _rep_index.set(str(rep_index))


def get_grid_point() -> Optional[str]:
    return _grid_point.get()


def set_grid_point(index: int) -> None:
    """Set the index of the sweep grid point being evaluated."""
    _grid_point.set(str(index))
