"""
Ground-truth stationary solver on an explicitly truncated state space.

States with AoI n <= n_max are enumerated; a transition to n > n_max lands in
row n_max instead. Row n_max then stands for "n >= n_max": every transition
out of it depends only on the in-service age, so the truncated chain is an
exact lumping and all entries with n < n_max are exact. The lumped mass is
reported as the tail bound.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from tarqaoi.core.config import get_settings
from tarqaoi.core.errors import InvalidConfig, NoConvergence
from tarqaoi.domain.mdap import StationarySeries
from tarqaoi.ports.stationary_solver import StationarySolver
from tarqaoi.services import series as rs
from tarqaoi.services.mdap_service import check_params, kernel_rows
from tarqaoi.services.model_service import hold_probability
from tarqaoi.services.stationary.series_solver import check_renewal

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StateIndex:
    L: int
    n_max: int

    def states(self) -> list[tuple[int, int]]:
        return [(n, m) for n in range(2, self.n_max + 1) for m in range(0, min(self.L, n - 1) + 1)]

    def lookup(self) -> dict[tuple[int, int], int]:
        return {s: i for i, s in enumerate(self.states())}


@dataclass(frozen=True)
class OracleSolution:
    states: list[tuple[int, int]]
    pi: np.ndarray
    residual: float
    capped_mass: float

    def at(self, n: int, m: int) -> float:
        return float(self.pi[self.states.index((n, m))])


def build_kernel_matrix(
    L: int, p: float, p_i: float, gamma: float, n_max: int
) -> tuple[sparse.csr_matrix, list[tuple[int, int]]]:
    """Row-stochastic transition matrix over states with n <= n_max."""
    index = StateIndex(L=L, n_max=n_max)
    states = index.states()
    lookup = index.lookup()

    rows, cols, vals = [], [], []
    for i, (n, m) in enumerate(states):
        for (tn, tm), prob in kernel_rows(n, m, L, p, p_i, gamma):
            rows.append(i)
            cols.append(lookup[(min(tn, n_max), tm)])
            vals.append(prob)
    # duplicates from the capped row are summed by the sparse constructor
    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(len(states), len(states)))
    return matrix, states


class OracleStationarySolver(StationarySolver):
    def __init__(
        self,
        n_max: int = 400,
        max_iter: Optional[int] = None,
        residual: Optional[float] = None,
    ):
        settings = get_settings()
        self.n_max = n_max
        self.max_iter = max_iter if max_iter is not None else settings.oracle_max_iter
        self.residual = residual if residual is not None else settings.oracle_residual

    def solve_full(self, L: int, p: float, p_i: float, gamma: float) -> OracleSolution:
        check_params(p, p_i, gamma)
        check_renewal(p_i, gamma)
        if self.n_max < L + 10:
            raise InvalidConfig(f"n_max={self.n_max} must be at least L + 10 = {L + 10}")

        kernel, states = build_kernel_matrix(L, p, p_i, gamma, self.n_max)
        size = len(states)
        forward = kernel.T.tocsr()

        # pi (K - I) = 0 with the last equation replaced by sum(pi) = 1
        system = (forward - sparse.identity(size, format="csr")).tolil()
        system[size - 1, :] = np.ones(size)
        rhs = np.zeros(size)
        rhs[-1] = 1.0
        pi = spsolve(system.tocsc(), rhs)
        residual = float(np.abs(forward @ pi - pi).sum())
        finite = bool(np.all(np.isfinite(pi)))
        worst = float(pi.min()) if finite else -np.inf

        if not finite or residual >= self.residual or worst < -rs.NEGATIVE_ROUNDOFF:
            logger.warning(
                "Direct solve missed residual target, falling back to power iteration",
                extra={"residual": residual, "min_entry": worst, "states": size},
            )
            pi = np.clip(pi, 0.0, None) if finite else np.full(size, 1.0 / size)
            pi /= pi.sum()
            for _ in range(self.max_iter):
                nxt = forward @ pi
                residual = float(np.abs(nxt - pi).sum())
                pi = nxt
                if residual < self.residual:
                    break
            else:
                raise NoConvergence(
                    f"oracle residual {residual:.3e} above {self.residual:.1e} "
                    f"after {self.max_iter} iterations"
                )

        # negatives left here are round-off from the direct solve
        pi = rs.clamp_roundoff(np.where(np.abs(pi) < 1e-300, 0.0, pi))
        capped = float(sum(v for (n, _), v in zip(states, pi) if n == self.n_max))
        if capped > 1e-9:
            logger.warning(
                "Oracle boundary row holds non-negligible mass",
                extra={"capped_mass": capped, "n_max": self.n_max},
            )
        logger.debug(
            "Oracle solved",
            extra={"L": L, "states": size, "residual": residual, "capped_mass": capped},
        )
        return OracleSolution(states=states, pi=pi, residual=residual, capped_mass=capped)

    def solve(self, L: int, p: float, p_i: float, gamma: float) -> StationarySeries:
        solution = self.solve_full(L, p, p_i, gamma)
        horizon = self.n_max - 1
        y = np.zeros(horizon - 1)
        g = np.zeros(horizon - 1)
        for (n, m), value in zip(solution.states, solution.pi):
            if n > horizon:
                continue
            if m == 1:
                y[n - 2] = value
            elif m == 0:
                g[n - 2] = value
        return StationarySeries(
            L=L,
            lam=hold_probability(gamma, p),
            p_i=p_i,
            y=y,
            g=g,
            horizon=horizon,
            tail_mass_bound=solution.capped_mass,
            method="oracle",
        )


def stationary_oracle(
    L: int, p: float, p_i: float, gamma: float, n_max: int = 400
) -> StationarySeries:
    return OracleStationarySolver(n_max=n_max).solve(L, p, p_i, gamma)
