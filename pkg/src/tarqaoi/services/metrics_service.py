"""
Closed-form and series-based performance metrics of one source and of the
whole system: AoI/PAoI distributions and means, duty cycle, power and energy
efficiency.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np

from tarqaoi.core.config import get_settings
from tarqaoi.core.errors import Degenerate
from tarqaoi.domain.mdap import StationarySeries
from tarqaoi.domain.metrics import (
    ArqLimit,
    NormalizationContext,
    Pmf,
    SourceAnalysis,
    SourceMetrics,
    SystemMetrics,
)
from tarqaoi.domain.scenario import DerivedParams, DerivedSource
from tarqaoi.ports.stationary_solver import StationarySolver
from tarqaoi.services import series as rs
from tarqaoi.services.model_service import hold_probability
from tarqaoi.services.stationary.series_solver import (
    SeriesStationarySolver,
    check_renewal,
    renewal_denominator,
    stationary_series,
    truncation_poly,
)

logger = logging.getLogger(__name__)


def _eps(eps: Optional[float]) -> float:
    return eps if eps is not None else get_settings().series_eps


def _pmf_from_transform(num: np.ndarray, den: np.ndarray, eps: float, settle: int) -> Pmf:
    coefs, tail = rs.expand(num, den, eps=eps, max_horizon=get_settings().max_horizon, settle=settle)
    return Pmf(first_index=2, probs=coefs[2:], tail_mass=tail.mass, tail_ratio=tail.ratio)


def _pmf_from_body(probs: np.ndarray, settle: int) -> Pmf:
    probs = rs.clamp_roundoff(probs)
    tail = rs.geometric_tail(probs, min_index=max(0, settle - 2))
    return Pmf(first_index=2, probs=probs, tail_mass=tail.mass, tail_ratio=tail.ratio)


# -- AoI ---------------------------------------------------------------------

def aoi_transform(L: int, p: float, p_i: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Phi(w) = gamma p_i w^2 A(w) / D(w)."""
    lam = hold_probability(gamma, p)
    num = rs.mul(rs.poly(0.0, 0.0, gamma * p_i), truncation_poly(L, lam))
    return num, renewal_denominator(L, lam, p_i, gamma)


def aoi_pmf(L: int, p: float, p_i: float, gamma: float, eps: Optional[float] = None) -> Pmf:
    check_renewal(p_i, gamma)
    num, den = aoi_transform(L, p, p_i, gamma)
    return _pmf_from_transform(num, den, _eps(eps), settle=L + 3)


def held_mass(series: StationarySeries) -> np.ndarray:
    """sum_{k < min(L, n-1)} lam^k y_(n-k): mass of AoI n with an update in service."""
    y = np.asarray(series.y)
    out = np.zeros_like(y)
    for k in range(min(series.L, len(y))):
        out[k:] += series.lam**k * y[: len(y) - k]
    return out


def aoi_pmf_from_stationary(series: StationarySeries) -> Pmf:
    return _pmf_from_body(np.asarray(series.g) + held_mass(series), settle=series.L + 3)


def aoi_mean(L: int, p: float, p_i: float, gamma: float) -> float:
    return success_interval_mean(L, p, p_i, gamma) + 1.0


# -- PAoI --------------------------------------------------------------------

def paoi_transform(L: int, p: float, p_i: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Psi(w) = gamma p_i c w^2 A(w)^2 / ((1 - lam w) D(w)), c = (1 - lam)/(1 - lam^L)."""
    lam = hold_probability(gamma, p)
    c = (1.0 - lam) / (1.0 - lam**L)
    a = truncation_poly(L, lam)
    num = rs.mul(rs.poly(0.0, 0.0, gamma * p_i * c), a, a)
    den = rs.mul(rs.poly(1.0, -lam), renewal_denominator(L, lam, p_i, gamma))
    return num, den


def paoi_pmf(
    L: int,
    p: float,
    p_i: float,
    gamma: float,
    eps: Optional[float] = None,
    series: Optional[StationarySeries] = None,
) -> Pmf:
    """psi_n = (phi_n - g_n) / rho: the AoI law seen at delivery slots."""
    check_renewal(p_i, gamma)
    if series is None:
        series = stationary_series(L, p, p_i, gamma, eps=_eps(eps))
    rho = duty_cycle(L, p, p_i, gamma)
    return _pmf_from_body(held_mass(series) / rho, settle=L + 3)


def paoi_pmf_from_transform(
    L: int, p: float, p_i: float, gamma: float, eps: Optional[float] = None
) -> Pmf:
    check_renewal(p_i, gamma)
    num, den = paoi_transform(L, p, p_i, gamma)
    return _pmf_from_transform(num, den, _eps(eps), settle=L + 3)


def paoi_mean(L: int, p: float, p_i: float, gamma: float) -> float:
    return success_interval_mean(L, p, p_i, gamma) + tx_time_mean(L, p, gamma)


# -- ARQ limits ----------------------------------------------------------------

def carq_metrics(p: float, p_i: float, gamma: float, eps: Optional[float] = None) -> ArqLimit:
    check_renewal(p_i, gamma)
    lam = hold_probability(gamma, p)
    interval = (1.0 - lam) / (gamma * p_i)
    den = rs.poly(1.0, -(1.0 - gamma * p_i + lam), lam)
    aoi = _pmf_from_transform(rs.poly(0.0, 0.0, gamma * p_i), den, _eps(eps), settle=3)
    paoi = _pmf_from_transform(
        rs.poly(0.0, 0.0, gamma * p_i * (1.0 - lam)),
        rs.mul(rs.poly(1.0, -lam), den),
        _eps(eps),
        settle=3,
    )
    return ArqLimit(
        mean_aoi=interval + 1.0,
        mean_paoi=interval + 1.0 / (1.0 - lam),
        aoi_pmf=aoi,
        paoi_pmf=paoi,
    )


def narq_metrics(p_i: float, gamma: float, eps: Optional[float] = None) -> tuple[float, Pmf]:
    """Without retransmission AoI and PAoI share one geometric law."""
    check_renewal(p_i, gamma)
    s = gamma * p_i
    pmf = _pmf_from_transform(rs.poly(0.0, 0.0, s), rs.poly(1.0, -(1.0 - s)), _eps(eps), settle=2)
    return 1.0 / s + 1.0, pmf


# -- Energy ------------------------------------------------------------------

def _truncated_geometric_mass(L: int, lam: float) -> float:
    """(1 - lam^L) / (1 - lam), i.e. 1 + lam + ... + lam^(L-1)."""
    if lam >= 1.0:
        raise Degenerate("hold probability is 1; the channel never frees up")
    return -math.expm1(L * math.log(lam)) / (1.0 - lam) if lam > 0.0 else 1.0


def duty_cycle(L: int, p: float, p_i: float, gamma: float) -> float:
    return p_i * _truncated_geometric_mass(L, hold_probability(gamma, p))


def avg_power(L: int, p: float, p_i: float, gamma: float, P: float) -> float:
    return P * duty_cycle(L, p, p_i, gamma)


def tx_time_pmf(L: int, p: float, gamma: float) -> Pmf:
    """Attempts used by a delivered update, on 1..L."""
    lam = hold_probability(gamma, p)
    mass = _truncated_geometric_mass(L, lam)
    probs = lam ** np.arange(L) / mass
    return Pmf(first_index=1, probs=probs)


def tx_time_mean(L: int, p: float, gamma: float) -> float:
    lam = hold_probability(gamma, p)
    if lam == 0.0 or L == 1:
        return 1.0
    if lam >= 1.0:
        raise Degenerate("hold probability is 1; transmissions never end")
    lam_L = lam**L
    return 1.0 / (1.0 - lam) - L * lam_L / (1.0 - lam_L)


def tx_time_stats(L: int, p: float, gamma: float) -> tuple[Pmf, float]:
    return tx_time_pmf(L, p, gamma), tx_time_mean(L, p, gamma)


def success_interval_mean(L: int, p: float, p_i: float, gamma: float) -> float:
    check_renewal(p_i, gamma)
    lam = hold_probability(gamma, p)
    return 1.0 / (gamma * p_i * _truncated_geometric_mass(L, lam))


def ee_source(gamma: float, P: float) -> float:
    if P <= 0.0:
        raise Degenerate("energy efficiency is undefined at zero transmit power")
    return gamma / P


# -- Aggregates --------------------------------------------------------------

def is_degenerate(source: DerivedSource) -> bool:
    """Never delivers (infinite AoI) or spends no power (undefined EE)."""
    return source.gamma <= 0.0 or source.p_i <= 0.0 or source.P <= 0.0


def _limiting_metrics(source: DerivedSource, p: float) -> SourceMetrics:
    L, p_i, gamma, P = source.L, source.p_i, source.gamma, source.P
    lam = hold_probability(gamma, p)
    rho = duty_cycle(L, p, p_i, gamma) if lam < 1.0 else 0.0
    tx_mean = tx_time_mean(L, p, gamma) if lam < 1.0 else math.inf
    interval = math.inf if gamma <= 0.0 or p_i <= 0.0 else success_interval_mean(L, p, p_i, gamma)
    return SourceMetrics(
        mean_aoi=interval + 1.0,
        mean_paoi=interval + tx_mean,
        duty_cycle=rho,
        avg_power=P * rho,
        ee=gamma / P if P > 0.0 else math.nan,
        mean_tx_time=tx_mean,
        mean_success_interval=interval,
    )


def source_metrics(source: DerivedSource, p: float, allow_degenerate: bool = False) -> SourceMetrics:
    """
    Means, duty cycle, power and EE of one source. With `allow_degenerate` a
    degenerate source gets its limiting values (infinite AoI, NaN EE) instead
    of raising Degenerate.
    """
    if allow_degenerate and is_degenerate(source):
        return _limiting_metrics(source, p)
    L, p_i, gamma = source.L, source.p_i, source.gamma
    interval = success_interval_mean(L, p, p_i, gamma)
    tx_mean = tx_time_mean(L, p, gamma)
    rho = duty_cycle(L, p, p_i, gamma)
    return SourceMetrics(
        mean_aoi=interval + 1.0,
        mean_paoi=interval + tx_mean,
        duty_cycle=rho,
        avg_power=source.P * rho,
        ee=ee_source(gamma, source.P),
        mean_tx_time=tx_mean,
        mean_success_interval=interval,
    )


def analyze_source(
    index: int,
    derived: DerivedParams,
    eps: Optional[float] = None,
    solver: Optional[StationarySolver] = None,
) -> SourceAnalysis:
    source = derived.sources[index]
    L, p, p_i, gamma = source.L, derived.p, source.p_i, source.gamma
    logger.debug("Analyzing source", extra={"source": index, "L": L, "p_i": p_i, "gamma": gamma})

    solver = solver or SeriesStationarySolver(eps=_eps(eps))
    series = solver.solve(L, p, p_i, gamma)
    return SourceAnalysis(
        source=index,
        metrics=source_metrics(source, p),
        aoi_pmf=aoi_pmf(L, p, p_i, gamma, eps=eps),
        paoi_pmf=paoi_pmf(L, p, p_i, gamma, eps=eps, series=series),
        tx_time_pmf=tx_time_pmf(L, p, gamma),
    )


def weighted_sum(
    source_avg_aoi: float, total_power: float, weight_aoi: float, normalization: NormalizationContext
) -> float:
    return weight_aoi * normalization.norm_aoi(source_avg_aoi) + (
        1.0 - weight_aoi
    ) * normalization.norm_power(total_power)


def system_metrics(
    metrics: Sequence[SourceMetrics],
    weight_aoi: Optional[float] = None,
    normalization: Optional[NormalizationContext] = None,
    allow_degenerate: bool = False,
) -> SystemMetrics:
    if not metrics:
        raise Degenerate("no sources to aggregate")
    aoi = np.array([m.mean_aoi for m in metrics])
    if not allow_degenerate and not np.all(np.isfinite(aoi)):
        raise Degenerate("a source with infinite mean AoI must be excluded before aggregation")

    power = np.array([m.avg_power for m in metrics])
    # 1 / E[X_i] = gamma_i rho_i is the delivery rate of source i
    delivered = np.array([1.0 / m.mean_success_interval for m in metrics])
    total_power = float(power.sum())
    with np.errstate(divide="ignore"):
        inverse_sum = float(np.sum(1.0 / (aoi - 1.0)))

    source_avg_aoi = float(aoi.mean())
    ws = None
    if weight_aoi is not None and normalization is not None:
        ws = weighted_sum(source_avg_aoi, total_power, weight_aoi, normalization)

    return SystemMetrics(
        source_avg_aoi=source_avg_aoi,
        total_power=total_power,
        weighted_sum=ws,
        overall_ee=float(delivered.sum()) / total_power if total_power > 0.0 else math.nan,
        harmonic_timeliness=len(metrics) / inverse_sum if inverse_sum > 0.0 else math.inf,
    )
