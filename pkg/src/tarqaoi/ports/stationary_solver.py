"""
Protocol for solvers of the per-source age process.

Two implementations exist: the generating-function series expansion used in
production and the truncated transition-matrix solver used as ground truth.
"""
from __future__ import annotations

from typing import Protocol

from tarqaoi.domain.mdap import StationarySeries


class StationarySolver(Protocol):
    def solve(self, L: int, p: float, p_i: float, gamma: float) -> StationarySeries:
        """
        Compute the stationary distribution of the (AoI, in-service age) chain.

        Args:
            L: attempt cap of the source
            p: overall generation probability
            p_i: selection probability of the source
            gamma: per-attempt success probability

        Raises:
            Degenerate: if gamma = 0 or p_i = 0
            NoConvergence: if the solver's accuracy target is not met
        """
        ...
