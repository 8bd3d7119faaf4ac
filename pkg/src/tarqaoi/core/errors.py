"""
Error hierarchy shared by the engines and the command-line surface.

Input problems carry a list of `Issue`s so the CLI can print them as a
machine-readable error list.
"""
from __future__ import annotations

from pydantic import BaseModel, ValidationError


class Issue(BaseModel):
    path: str
    field: str
    reason: str


class TarqAoiError(Exception):
    """Base class for every error raised by tarqaoi."""

    def __init__(self, message: str, issues: list[Issue] | None = None):
        super().__init__(message)
        self.issues: list[Issue] = issues or []

    def to_dict(self) -> dict:
        return {
            "error": type(self).__name__,
            "message": str(self),
            "issues": [i.model_dump() for i in self.issues],
        }


class InvalidScenario(TarqAoiError, ValueError):
    @classmethod
    def from_validation_error(cls, exc: ValidationError, path: str = "-") -> "InvalidScenario":
        issues = [
            Issue(
                path=path,
                field=".".join(str(part) for part in err["loc"]) or "<root>",
                reason=err["msg"],
            )
            for err in exc.errors()
        ]
        return cls(f"{len(issues)} invalid field(s) in scenario", issues)


class InvalidState(TarqAoiError, ValueError):
    pass


class InvalidConfig(TarqAoiError, ValueError):
    pass


class Degenerate(TarqAoiError, ValueError):
    """Quantity undefined because a source never delivers (gamma = 0 or p_i = 0)."""


class BeyondHorizon(TarqAoiError, IndexError):
    pass


class NoConvergence(TarqAoiError, RuntimeError):
    pass


class Mismatch(TarqAoiError, ValueError):
    pass


class NoDeliveries(TarqAoiError, ValueError):
    pass


class EmptyGrid(TarqAoiError, ValueError):
    pass
