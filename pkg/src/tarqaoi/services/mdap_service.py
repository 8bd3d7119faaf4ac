"""
Transition kernel of the per-source (AoI, in-service age) chain and lookups
into its stationary distribution.
"""
from __future__ import annotations

import logging

from tarqaoi.core.errors import BeyondHorizon, InvalidState
from tarqaoi.domain.mdap import MdapState, StationarySeries, Transition

logger = logging.getLogger(__name__)


def check_state(n: int, m: int, L: int) -> None:
    if n < 2 or m < 0 or m > L or n <= m:
        raise InvalidState(f"({n}, {m}) is not a state of the chain with L={L}")


def check_params(p: float, p_i: float, gamma: float) -> None:
    if not (0.0 <= p_i <= p <= 1.0) or not (0.0 <= gamma <= 1.0):
        raise InvalidState(
            f"parameters out of range: p={p}, p_i={p_i}, gamma={gamma}"
        )


def kernel_rows(
    n: int, m: int, L: int, p: float, p_i: float, gamma: float
) -> list[tuple[tuple[int, int], float]]:
    """
    Successors of (n, m) with their probabilities. Zero-probability rows are
    kept so every state has the same successor shape.
    """
    if m == 0:
        return [((n + 1, 1), p_i), ((n + 1, 0), 1.0 - p_i)]

    fail = 1.0 - gamma
    rows = [
        ((m + 1, 1), gamma * p_i),
        ((m + 1, 0), gamma * (1.0 - p_i)),
        ((n + 1, 1), fail * p_i),
    ]
    if m < L:
        rows.append(((n + 1, 0), fail * (p - p_i)))
        rows.append(((n + 1, m + 1), fail * (1.0 - p)))
    else:
        # truncation: the update is dropped unless the source itself preempts
        rows.append(((n + 1, 0), fail * (1.0 - p_i)))
    return rows


def transition(
    state: MdapState, L: int, p: float, p_i: float, gamma: float
) -> list[Transition]:
    check_state(state.n, state.m, L)
    check_params(p, p_i, gamma)
    return [
        Transition(target=MdapState(n=tn, m=tm), probability=prob)
        for (tn, tm), prob in kernel_rows(state.n, state.m, L, p, p_i, gamma)
    ]


def pi(series: StationarySeries, n: int, m: int) -> float:
    """pi(n, 0) = g_n and pi(n, m) = lam^(m-1) y_(n-m+1) for m >= 1."""
    check_state(n, m, series.L)
    if n > series.horizon:
        raise BeyondHorizon(f"n={n} exceeds the materialized horizon {series.horizon}")
    if m == 0:
        return float(series.g[n - 2])
    return float(series.lam ** (m - 1) * series.y[n - m - 1])


def state_mass(series: StationarySeries, n: int) -> float:
    """Total stationary mass of AoI value n over every in-service age."""
    total = pi(series, n, 0)
    for m in range(1, min(series.L, n - 1) + 1):
        total += pi(series, n, m)
    return total
