"""
JSON logging on stderr. Every record carries the run id, the CLI command, and
when set, the replication index and the grid point being evaluated, so lines
from pool workers can be joined back to their run.
"""
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Dict

from pythonjsonlogger.json import JsonFormatter

from tarqaoi.core.context import (
    get_command,
    get_grid_point,
    get_rep_index,
    get_run_id,
)

CONTEXT_FIELDS = ("run_id", "command", "rep_index", "grid_point")


class ContextFilter(logging.Filter):
    """Stamps run_id, command, rep_index and grid_point; "-" when unset."""

    def filter(self, record: logging.LogRecord) -> bool:
        current = {
            "run_id": get_run_id(),
            "command": get_command(),
            "rep_index": get_rep_index(),
            "grid_point": get_grid_point(),
        }
        for field, value in current.items():
            setattr(record, field, value or getattr(record, field, None) or "-")
        return True


class TarqJsonFormatter(JsonFormatter):
    """Adds timestamp, level and logger; exceptions are rendered into exc_info."""

    def add_fields(
        self,
        log_data: Dict[str, Any],
        record: logging.LogRecord,
        message_dict: Dict[str, Any]
    ) -> None:
        super().add_fields(log_data, record, message_dict)

        log_data.setdefault("timestamp", datetime.now(timezone.utc).isoformat())
        log_data["level"] = record.levelname
        log_data["logger"] = record.name
        if record.exc_info:
            log_data["exc_info"] = self.formatException(record.exc_info)


def setup_logging(log_level: str = "INFO") -> None:
    root = logging.getLogger()
    root.setLevel(log_level)

    # stdout carries the one-line command summary
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(log_level)
    handler.setFormatter(
        TarqJsonFormatter(fmt=" ".join(f"%({f})s" for f in ("message",) + CONTEXT_FIELDS))
    )
    handler.addFilter(ContextFilter())

    root.handlers.clear()
    root.addHandler(handler)
