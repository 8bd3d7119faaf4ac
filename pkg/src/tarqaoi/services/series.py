"""
Power-series coefficients of rational generating functions.

Every transform handled here is a ratio of polynomials in w = 1/z, so the
coefficients are the impulse response of an IIR filter with those polynomials
as numerator and denominator. The horizon grows until the geometric tail
estimate drops below the requested tolerance.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.signal import lfilter

from tarqaoi.core.errors import NoConvergence

logger = logging.getLogger(__name__)

NEGATIVE_ROUNDOFF = 1e-15
RATIO_WINDOW = 8


@dataclass(frozen=True)
class SeriesTail:
    mass: float
    ratio: float


def coefficients(num: np.ndarray, den: np.ndarray, n_terms: int) -> np.ndarray:
    """First `n_terms` coefficients of num(w)/den(w); den[0] must be non-zero."""
    impulse = np.zeros(n_terms)
    impulse[0] = 1.0
    return lfilter(num, den, impulse)


def clamp_roundoff(coefs: np.ndarray) -> np.ndarray:
    worst = float(coefs.min()) if coefs.size else 0.0
    if worst < -NEGATIVE_ROUNDOFF:
        raise NoConvergence(f"series coefficient {worst:.3e} is negative beyond round-off")
    return np.where(coefs < 0.0, 0.0, coefs)


def geometric_tail(coefs: np.ndarray, min_index: int = 0) -> SeriesTail:
    """
    Bound the mass beyond the last coefficient assuming geometric decay at the
    largest ratio seen over the last few terms.
    """
    window = coefs[max(min_index, len(coefs) - RATIO_WINDOW - 1):]
    if window.size == 0 or window[-1] == 0.0:
        return SeriesTail(mass=0.0, ratio=0.0)
    prev, curr = window[:-1], window[1:]
    valid = prev > 0.0
    if not valid.any():
        return SeriesTail(mass=float("inf"), ratio=1.0)
    ratio = float(np.max(curr[valid] / prev[valid]))
    if ratio >= 1.0:
        return SeriesTail(mass=float("inf"), ratio=1.0)
    return SeriesTail(mass=float(window[-1]) * ratio / (1.0 - ratio), ratio=ratio)


def expand(
    num: np.ndarray,
    den: np.ndarray,
    *,
    eps: float,
    max_horizon: int,
    start: int = 64,
    settle: int = 0,
) -> tuple[np.ndarray, SeriesTail]:
    """
    Expand num/den until the geometric tail is below eps.

    Returns the coefficient array indexed by power of w (index 0 included) and
    the tail estimate beyond its last entry. `settle` is the index after which
    the ratio estimate is trusted.
    """
    n_terms = max(start, settle + RATIO_WINDOW + 2)
    while True:
        coefs = clamp_roundoff(coefficients(num, den, n_terms))
        tail = geometric_tail(coefs, min_index=settle)
        if tail.mass < eps:
            logger.debug(
                "Series expanded",
                extra={"terms": n_terms, "tail_mass": tail.mass, "ratio": tail.ratio},
            )
            return coefs, tail
        if n_terms >= max_horizon:
            raise NoConvergence(
                f"series tail {tail.mass:.3e} still above {eps:.1e} at horizon {n_terms}"
            )
        n_terms = min(2 * n_terms, max_horizon)


def poly(*coefs: float) -> np.ndarray:
    return np.asarray(coefs, dtype=float)


def mul(*polys: np.ndarray) -> np.ndarray:
    out = np.ones(1)
    for p in polys:
        out = P.polymul(out, p)
    return out
