"""
Scenario-level parameter derivations: generation and selection probabilities,
channel success probabilities and the hold probability lambda_i.
"""
from __future__ import annotations

import logging
import math
from typing import Sequence

import numpy as np
from pydantic import ValidationError

from tarqaoi.core.errors import InvalidScenario
from tarqaoi.domain.scenario import (
    ChannelSpec,
    DerivedParams,
    DerivedSource,
    PowerCertificate,
    Scenario,
)

logger = logging.getLogger(__name__)

P_THRESHOLD = 1.0 / (math.e**2 + 1.0)


def overall_ugp(q: Sequence[float]) -> float:
    """Probability that at least one source generates in a slot."""
    return float(1.0 - np.prod(1.0 - np.asarray(q, dtype=float)))


def poisson_binomial_pmf(probabilities: Sequence[float]) -> np.ndarray:
    """PMF of the number of successes among independent Bernoulli trials."""
    pmf = np.ones(1)
    for prob in probabilities:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1.0 - prob)
        nxt[1:] += pmf * prob
        pmf = nxt
    return pmf


def selection_probabilities(q: Sequence[float]) -> list[float]:
    """
    p_i = q_i * sum_h Pr{h other sources generate} / (h + 1), the probability
    that source i generates and wins the uniform tie-break.
    """
    qs = [float(v) for v in q]
    out: list[float] = []
    for i, qi in enumerate(qs):
        others = poisson_binomial_pmf(qs[:i] + qs[i + 1:])
        share = others / np.arange(1, len(others) + 1)
        out.append(qi * float(share.sum()))
    return out


def gamma_from_power(P: float, R: float) -> float:
    if P <= 0.0:
        return 0.0
    return math.exp(-math.expm1(R) / P)


def resolve_gamma(channel: ChannelSpec) -> float:
    if channel.direct is not None:
        return channel.direct.gamma
    assert channel.rayleigh is not None
    return gamma_from_power(channel.rayleigh.P, channel.rayleigh.R)


def rayleigh_ee_optimum(R: float) -> tuple[float, float]:
    """Transmit power maximizing gamma(P)/P and the maximum itself: (k, 1/(e k))."""
    k = math.expm1(R)
    return k, math.exp(-1.0) / k


def hold_probability(gamma: float, p: float) -> float:
    return (1.0 - gamma) * (1.0 - p)


def check_scenario(scenario: Scenario) -> Scenario:
    """Re-validate a scenario, collecting every violated invariant."""
    try:
        return Scenario.model_validate(scenario.model_dump())
    except ValidationError as exc:
        logger.warning("Scenario failed validation", extra={"error_count": exc.error_count()})
        raise InvalidScenario.from_validation_error(exc) from exc


def derive(scenario: Scenario) -> DerivedParams:
    scenario = check_scenario(scenario)
    q = [s.q for s in scenario.sources]
    p = overall_ugp(q)
    selections = selection_probabilities(q)

    sources = []
    for spec, p_i in zip(scenario.sources, selections):
        gamma = resolve_gamma(spec.channel)
        sources.append(
            DerivedSource(
                p_i=p_i,
                gamma=gamma,
                lam=hold_probability(gamma, p),
                L=spec.L,
                P=spec.channel.power,
                k=spec.channel.k,
            )
        )

    drift = abs(sum(selections) - p)
    if drift > 1e-12:
        logger.warning("Selection probabilities drift from overall UGP", extra={"drift": drift})
    logger.debug("Scenario derived", extra={"n_sources": len(sources), "p": p})
    return DerivedParams(p=p, sources=sources)


def power_monotonicity_certificate(L: int, p: float, gamma: float) -> PowerCertificate:
    """
    Sufficient conditions under which average power is increasing in transmit
    power on a Rayleigh channel. Unknown is not a claim of non-monotonicity.
    """
    if L <= 3:
        return PowerCertificate(status="CertifiedIncreasing", condition="L<=3")
    if p >= P_THRESHOLD:
        return PowerCertificate(status="CertifiedIncreasing", condition="p-threshold")
    threshold = min(1.0 - 1.0 / (2.0 * (1.0 - p)), math.exp(-1.0))
    if gamma >= threshold:
        return PowerCertificate(status="CertifiedIncreasing", condition="gamma-threshold")
    return PowerCertificate(status="Unknown")
