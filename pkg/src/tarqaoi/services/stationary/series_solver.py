"""
Stationary distribution of the age chain by power-series expansion of its
generating functions in w = 1/z.

With A(w) = 1 - lam^L w^L and D(w) = (1 - w)(1 - lam w) + gamma p_i w A(w):

    Y(w) = gamma p_i^2 w^2 A / D
    G(w) = gamma p_i w^2 A (1 - lam w - p_i A) / ((1 - lam w) D)

where y_n = pi(n, 1) and g_n = pi(n, 0) are the coefficients of w^n.
"""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from tarqaoi.core.config import get_settings
from tarqaoi.core.errors import Degenerate, NoConvergence
from tarqaoi.domain.mdap import StationarySeries
from tarqaoi.ports.stationary_solver import StationarySolver
from tarqaoi.services import series as rs
from tarqaoi.services.model_service import hold_probability
from tarqaoi.services.mdap_service import check_params

logger = logging.getLogger(__name__)


def truncation_poly(L: int, lam: float) -> np.ndarray:
    """A(w) = 1 - lam^L w^L."""
    a = np.zeros(L + 1)
    a[0] = 1.0
    a[L] -= lam**L
    return a


def renewal_denominator(L: int, lam: float, p_i: float, gamma: float) -> np.ndarray:
    """D(w) = (1 - w)(1 - lam w) + gamma p_i w A(w)."""
    left = rs.mul(rs.poly(1.0, -1.0), rs.poly(1.0, -lam))
    right = rs.mul(rs.poly(0.0, gamma * p_i), truncation_poly(L, lam))
    return np.polynomial.polynomial.polyadd(left, right)


def y_transform(L: int, lam: float, p_i: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    num = rs.mul(rs.poly(0.0, 0.0, gamma * p_i * p_i), truncation_poly(L, lam))
    return num, renewal_denominator(L, lam, p_i, gamma)


def g_transform(L: int, lam: float, p_i: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    a = truncation_poly(L, lam)
    inner = np.polynomial.polynomial.polysub(rs.poly(1.0, -lam), p_i * a)
    num = rs.mul(rs.poly(0.0, 0.0, gamma * p_i), a, inner)
    den = rs.mul(rs.poly(1.0, -lam), renewal_denominator(L, lam, p_i, gamma))
    return num, den


def check_renewal(p_i: float, gamma: float) -> None:
    if gamma <= 0.0 or p_i <= 0.0:
        raise Degenerate(
            f"source never delivers (gamma={gamma}, p_i={p_i}); AoI has no stationary law"
        )


def tail_mass_bound(
    L: int, lam: float, y: np.ndarray, y_tail: float, g_tail: float
) -> float:
    """
    Mass of every state with n beyond the horizon H. For in-service age m the
    state (n, m) carries lam^(m-1) y_(n-m+1), so its tail also picks up the
    last m-1 materialized y values.
    """
    total = g_tail
    for m in range(1, L + 1):
        carried = float(y[len(y) - (m - 1):].sum()) if m > 1 else 0.0
        total += lam ** (m - 1) * (y_tail + carried)
    return total


class SeriesStationarySolver(StationarySolver):
    def __init__(self, eps: Optional[float] = None, max_horizon: Optional[int] = None):
        settings = get_settings()
        self.eps = eps if eps is not None else settings.series_eps
        self.max_horizon = max_horizon if max_horizon is not None else settings.max_horizon

    def solve(self, L: int, p: float, p_i: float, gamma: float) -> StationarySeries:
        check_params(p, p_i, gamma)
        check_renewal(p_i, gamma)
        lam = hold_probability(gamma, p)

        y_num, y_den = y_transform(L, lam, p_i, gamma)
        g_num, g_den = g_transform(L, lam, p_i, gamma)
        # structural irregularity of the coefficients ends after index L + 2
        settle = L + 3

        try:
            y_coefs, y_tail = rs.expand(
                y_num, y_den, eps=self.eps, max_horizon=self.max_horizon, settle=settle
            )
            n_terms = len(y_coefs)
            while True:
                g_coefs = rs.clamp_roundoff(rs.coefficients(g_num, g_den, n_terms))
                g_tail = rs.geometric_tail(g_coefs, min_index=settle)
                if g_tail.mass < self.eps:
                    break
                if n_terms >= self.max_horizon:
                    raise NoConvergence(
                        f"g-series tail {g_tail.mass:.3e} above {self.eps:.1e} at horizon {n_terms}"
                    )
                n_terms = min(2 * n_terms, self.max_horizon)
            if n_terms > len(y_coefs):
                y_coefs = rs.clamp_roundoff(rs.coefficients(y_num, y_den, n_terms))
                y_tail = rs.geometric_tail(y_coefs, min_index=settle)
        except NoConvergence:
            logger.exception(
                "Series expansion failed",
                extra={"L": L, "p": p, "p_i": p_i, "gamma": gamma, "eps": self.eps},
            )
            raise

        y = y_coefs[2:]
        g = g_coefs[2:]
        bound = tail_mass_bound(L, lam, y, y_tail.mass, g_tail.mass)
        horizon = n_terms - 1

        logger.debug(
            "Stationary series computed",
            extra={"L": L, "lam": lam, "horizon": horizon, "tail_mass_bound": bound},
        )
        return StationarySeries(
            L=L,
            lam=lam,
            p_i=p_i,
            y=y,
            g=g,
            horizon=horizon,
            tail_mass_bound=bound,
            method="series",
        )


def stationary_series(
    L: int, p: float, p_i: float, gamma: float, eps: Optional[float] = None
) -> StationarySeries:
    return SeriesStationarySolver(eps=eps).solve(L, p, p_i, gamma)
