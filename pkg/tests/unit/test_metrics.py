import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tarqaoi.core.errors import Degenerate
from tarqaoi.domain.metrics import NormalizationContext, SourceMetrics
from tarqaoi.domain.scenario import DerivedSource, Scenario
from tarqaoi.services.metrics_service import (
    analyze_source,
    aoi_mean,
    aoi_pmf,
    aoi_pmf_from_stationary,
    avg_power,
    carq_metrics,
    duty_cycle,
    ee_source,
    is_degenerate,
    narq_metrics,
    paoi_mean,
    paoi_pmf,
    paoi_pmf_from_transform,
    source_metrics,
    success_interval_mean,
    system_metrics,
    tx_time_mean,
    tx_time_pmf,
    tx_time_stats,
)
from tarqaoi.services.model_service import derive, gamma_from_power, hold_probability, rayleigh_ee_optimum
from tarqaoi.services.stationary.oracle_solver import OracleStationarySolver
from tarqaoi.services.stationary.series_solver import stationary_series

# two sources with q = 0.1 each
P_ALL, P_I = 0.19, 0.095

ORACLE_GRID = [
    (gamma, p, p_i)
    for gamma in (0.3, 0.8)
    for p, p_i in ((0.19, 0.095), (0.6, 0.45))
]


def _common(a, b):
    n = min(len(a.probs), len(b.probs))
    return a.probs[:n], b.probs[:n]


def _source(L, p_i, gamma, P, p):
    return DerivedSource(p_i=p_i, gamma=gamma, lam=hold_probability(gamma, p), L=L, P=P)


def test_aoi_reduction_from_one_retransmission():
    narq = aoi_mean(1, P_ALL, P_I, 0.8)
    tarq = aoi_mean(2, P_ALL, P_I, 0.8)
    assert narq == pytest.approx(14.157895, abs=1e-5)
    assert tarq == pytest.approx(12.323490, abs=1e-5)
    assert 100 * (narq - tarq) / narq == pytest.approx(12.96, abs=0.01)


def test_gap_to_unbounded_retransmission():
    tarq = aoi_mean(2, P_ALL, P_I, 0.95)
    carq = carq_metrics(P_ALL, P_I, 0.95).mean_aoi
    assert carq == pytest.approx(11.631579, abs=1e-5)
    assert 100 * (tarq - carq) / carq == pytest.approx(0.15, abs=0.01)


@pytest.mark.parametrize("R,expected", [(2.0, 0.0576), (1.5, 0.1057)])
def test_ee_maximum_for_rayleigh(R, expected):
    k, best = rayleigh_ee_optimum(R)
    assert ee_source(gamma_from_power(k, R), k) == pytest.approx(best, rel=1e-12)
    assert best == pytest.approx(expected, abs=5e-5)
    for P in np.linspace(0.5, 30.0, 60):
        assert ee_source(gamma_from_power(P, R), P) <= best + 1e-15


@settings(max_examples=1000, deadline=None, derandomize=True)
@given(
    L=st.integers(min_value=1, max_value=50),
    gamma=st.floats(min_value=0.05, max_value=1.0),
    p=st.floats(min_value=0.01, max_value=1.0),
    share=st.floats(min_value=0.05, max_value=1.0),
    P=st.floats(min_value=0.1, max_value=30.0),
)
def test_metric_identities(L, gamma, p, share, P):
    p_i = p * share
    m = source_metrics(_source(L, p_i, gamma, P, p), p)
    assert m.mean_paoi == pytest.approx(m.mean_success_interval + m.mean_tx_time, rel=1e-12)
    assert m.mean_aoi == pytest.approx(m.mean_success_interval + 1.0, rel=1e-12)
    assert m.ee * (m.mean_aoi - 1.0) * m.avg_power == pytest.approx(1.0, abs=1e-9)

    other = source_metrics(_source(max(1, L // 2), p_i, 1.0 - gamma / 2, P / 2 + 1, p), p)
    system = system_metrics([m, other])
    assert system.overall_ee * system.harmonic_timeliness * system.total_power == pytest.approx(
        2.0, abs=1e-9
    )


def test_no_retransmission_makes_aoi_and_paoi_identical():
    aoi = aoi_pmf(1, P_ALL, P_I, 0.8)
    paoi = paoi_pmf(1, P_ALL, P_I, 0.8)
    np.testing.assert_allclose(*_common(aoi, paoi), rtol=0, atol=1e-12)
    mean, narq = narq_metrics(P_I, 0.8)
    np.testing.assert_allclose(*_common(aoi, narq), rtol=0, atol=1e-12)
    assert mean == pytest.approx(14.157895, abs=1e-5)
    assert narq.at(2) == pytest.approx(0.076, abs=1e-15)
    assert paoi_mean(1, P_ALL, P_I, 0.8) == pytest.approx(aoi_mean(1, P_ALL, P_I, 0.8), rel=1e-12)


@pytest.mark.parametrize("gamma,p,p_i", ORACLE_GRID)
def test_long_cap_matches_unbounded_retransmission(gamma, p, p_i):
    carq = carq_metrics(p, p_i, gamma)
    assert aoi_mean(200, p, p_i, gamma) == pytest.approx(carq.mean_aoi, abs=1e-6)
    assert paoi_mean(200, p, p_i, gamma) == pytest.approx(carq.mean_paoi, abs=1e-6)


def test_long_cap_pmfs_match_unbounded_retransmission():
    carq = carq_metrics(P_ALL, P_I, 0.8)
    np.testing.assert_allclose(*_common(aoi_pmf(200, P_ALL, P_I, 0.8), carq.aoi_pmf), atol=1e-9)
    np.testing.assert_allclose(
        *_common(paoi_pmf_from_transform(200, P_ALL, P_I, 0.8), carq.paoi_pmf), atol=1e-9
    )


def test_carq_examples():
    assert carq_metrics(P_ALL, P_I, 1.0).mean_aoi == pytest.approx(1 / P_I + 1, rel=1e-12)
    assert carq_metrics(P_ALL, P_I, 0.8).aoi_pmf.total() == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("L", [1, 2, 5])
@pytest.mark.parametrize("gamma,p,p_i", ORACLE_GRID)
def test_both_paths_agree(L, gamma, p, p_i):
    series = stationary_series(L, p, p_i, gamma)
    direct = aoi_pmf(L, p, p_i, gamma)
    np.testing.assert_allclose(*_common(direct, aoi_pmf_from_stationary(series)), rtol=0, atol=1e-10)
    np.testing.assert_allclose(
        *_common(paoi_pmf(L, p, p_i, gamma, series=series), paoi_pmf_from_transform(L, p, p_i, gamma)),
        rtol=0,
        atol=1e-10,
    )


@pytest.mark.parametrize("L", [1, 2, 5])
@pytest.mark.parametrize("gamma,p,p_i", ORACLE_GRID)
def test_pmfs_normalize_and_match_means(L, gamma, p, p_i):
    aoi = aoi_pmf(L, p, p_i, gamma)
    paoi = paoi_pmf(L, p, p_i, gamma)
    assert aoi.total() == pytest.approx(1.0, abs=1e-9)
    assert paoi.total() == pytest.approx(1.0, abs=1e-9)
    assert aoi.at(2) == pytest.approx(gamma * p_i, rel=1e-12)
    assert aoi.mean() == pytest.approx(aoi_mean(L, p, p_i, gamma), rel=1e-7)
    assert paoi.mean() == pytest.approx(paoi_mean(L, p, p_i, gamma), rel=1e-7)


def test_paoi_standard_case():
    assert paoi_mean(2, P_ALL, P_I, 0.8) == pytest.approx(12.462903, abs=1e-5)
    assert paoi_pmf(2, P_ALL, P_I, 0.8).mean() == pytest.approx(12.46290, abs=1e-4)
    assert success_interval_mean(2, P_ALL, P_I, 0.8) == pytest.approx(11.323490, abs=1e-5)


def test_perfect_channel_ignores_cap():
    for L in (1, 3, 10):
        assert aoi_mean(L, P_ALL, P_I, 1.0) == pytest.approx(1 / P_I + 1, rel=1e-12)
        assert paoi_mean(L, P_ALL, P_I, 1.0) == pytest.approx(1 / P_I + 1, rel=1e-12)
        assert tx_time_mean(L, P_ALL, 1.0) == 1.0
    assert success_interval_mean(1, P_ALL, P_I, 1.0) == pytest.approx(1 / P_I, rel=1e-12)


def test_duty_cycle_and_power():
    assert duty_cycle(1, P_ALL, P_I, 0.8) == pytest.approx(P_I, rel=1e-12)
    assert duty_cycle(2, P_ALL, P_I, 0.8) == pytest.approx(0.110390, abs=1e-6)
    assert duty_cycle(200, P_ALL, P_I, 0.8) == pytest.approx(0.113365, abs=1e-6)
    assert avg_power(2, P_ALL, P_I, 0.8, 15.0) == pytest.approx(1.655850, abs=1e-5)
    assert avg_power(2, P_ALL, P_I, 0.8, 0.0) == 0.0
    assert avg_power(1, P_ALL, P_I, 0.8, 7.0) == pytest.approx(7.0 * P_I, rel=1e-12)


def test_transmission_time_law():
    lam = hold_probability(0.8, P_ALL)
    assert lam == pytest.approx(0.162, abs=1e-15)
    pmf, mean = tx_time_stats(2, P_ALL, 0.8)
    assert pmf.first_index == 1
    assert pmf.at(1) == pytest.approx(1 / (1 + lam), abs=1e-12)
    assert pmf.at(2) == pytest.approx(lam / (1 + lam), abs=1e-12)
    assert mean == pytest.approx(1 + lam / (1 + lam), abs=1e-12)
    assert mean == pytest.approx(1.139410, abs=1e-5)

    single = tx_time_pmf(1, P_ALL, 0.8)
    assert list(single.probs) == [1.0]
    assert tx_time_mean(1, P_ALL, 0.8) == pytest.approx(1.0, abs=1e-15)
    assert tx_time_pmf(7, P_ALL, 0.3).total() == pytest.approx(1.0, abs=1e-12)


def test_energy_efficiency():
    assert ee_source(0.8, 10.0) == pytest.approx(0.08)
    assert ee_source(0.8, 20.0) == pytest.approx(ee_source(0.8, 10.0) / 2)
    with pytest.raises(Degenerate):
        ee_source(0.8, 0.0)


def test_ee_independent_of_cap_and_contention():
    values = []
    for L in range(1, 11):
        for p, p_i in ((0.19, 0.095), (0.6, 0.45), (0.3, 0.01)):
            interval = success_interval_mean(L, p, p_i, 0.6)
            values.append(1.0 / (interval * avg_power(L, p, p_i, 0.6, 10.0)))
    assert values == pytest.approx([0.06] * len(values), rel=1e-12)


@pytest.mark.parametrize("gamma", [0.3, 0.1])
def test_cap_trades_timeliness_for_energy(gamma):
    aoi = [aoi_mean(L, P_ALL, P_I, gamma) for L in range(1, 51)]
    duty = [duty_cycle(L, P_ALL, P_I, gamma) for L in range(1, 51)]
    assert all(a > b for a, b in zip(aoi, aoi[1:]))
    assert all(a < b for a, b in zip(duty, duty[1:]))


def test_better_channel_lowers_both_ages():
    gammas = np.linspace(0.05, 1.0, 40)
    aoi = [aoi_mean(3, P_ALL, P_I, g) for g in gammas]
    paoi = [paoi_mean(3, P_ALL, P_I, g) for g in gammas]
    assert all(a > b for a, b in zip(aoi, aoi[1:]))
    assert all(a > b for a, b in zip(paoi, paoi[1:]))


@pytest.mark.parametrize(
    "L,gamma,equal",
    [(1, 0.5, True), (4, 1.0, True), (2, 0.8, False), (9, 0.2, False)],
)
def test_aoi_bounds_paoi(L, gamma, equal):
    aoi, paoi = aoi_mean(L, P_ALL, P_I, gamma), paoi_mean(L, P_ALL, P_I, gamma)
    if equal:
        assert paoi == pytest.approx(aoi, rel=1e-12)
    else:
        assert paoi > aoi


@pytest.mark.parametrize(
    "call",
    [
        lambda: aoi_pmf(2, P_ALL, P_I, 0.0),
        lambda: aoi_mean(2, P_ALL, 0.0, 0.8),
        lambda: paoi_pmf(2, P_ALL, P_I, 0.0),
        lambda: paoi_mean(2, P_ALL, P_I, 0.0),
        lambda: carq_metrics(P_ALL, 0.0, 0.8),
        lambda: narq_metrics(P_I, 0.0),
    ],
)
def test_never_delivering_source_is_degenerate(call):
    with pytest.raises(Degenerate):
        call()


def _metrics(aoi: float, power: float, ee: float = 0.1) -> SourceMetrics:
    return SourceMetrics(
        mean_aoi=aoi,
        mean_paoi=aoi,
        duty_cycle=0.1,
        avg_power=power,
        ee=ee,
        mean_tx_time=1.0,
        mean_success_interval=aoi - 1.0,
    )


def test_system_metrics_symmetry():
    m = source_metrics(_source(2, P_I, 0.8, 15.0, P_ALL), P_ALL)
    system = system_metrics([m, m])
    assert system.source_avg_aoi == pytest.approx(m.mean_aoi)
    assert system.overall_ee == pytest.approx(m.ee)
    assert system.total_power == pytest.approx(2 * m.avg_power)
    assert system.weighted_sum is None


def test_weighted_sum_of_equal_normalized_values():
    norm = NormalizationContext(aoi_min=7.0, aoi_max=17.0, power_min=0.8, power_max=4.8)
    system = system_metrics([_metrics(10.0, 1.0), _metrics(10.0, 1.0)], 0.5, norm)
    assert system.weighted_sum == pytest.approx(0.3)


def test_system_metrics_rejects_infinite_age():
    with pytest.raises(Degenerate):
        system_metrics([_metrics(10.0, 1.0), _metrics(math.inf, 0.0)])
    with pytest.raises(Degenerate):
        system_metrics([])


def test_degenerate_sources_get_limiting_metrics():
    silent = _source(2, 0.0, 0.8, 15.0, P_ALL)
    deaf = _source(2, P_I, 0.0, 15.0, P_ALL)
    unpowered = _source(2, P_I, 0.8, 0.0, P_ALL)
    assert is_degenerate(silent) and is_degenerate(deaf) and is_degenerate(unpowered)
    assert not is_degenerate(_source(2, P_I, 0.8, 15.0, P_ALL))

    with pytest.raises(Degenerate):
        source_metrics(deaf, P_ALL)

    m = source_metrics(silent, P_ALL, allow_degenerate=True)
    assert math.isinf(m.mean_aoi) and m.duty_cycle == 0.0 and m.avg_power == 0.0

    m = source_metrics(deaf, P_ALL, allow_degenerate=True)
    assert math.isinf(m.mean_aoi) and m.ee == 0.0
    assert m.duty_cycle == pytest.approx(duty_cycle(2, P_ALL, P_I, 0.0))

    m = source_metrics(unpowered, P_ALL, allow_degenerate=True)
    assert m.mean_aoi == pytest.approx(aoi_mean(2, P_ALL, P_I, 0.8))
    assert m.avg_power == 0.0 and math.isnan(m.ee)


def test_system_metrics_with_degenerate_sources():
    system = system_metrics(
        [_metrics(10.0, 1.0), _metrics(math.inf, 0.0)], allow_degenerate=True
    )
    assert math.isinf(system.source_avg_aoi)
    assert system.total_power == 1.0
    # only the finite source delivers, once every 9 slots
    assert system.overall_ee == pytest.approx(1.0 / 9.0)
    assert system.harmonic_timeliness == pytest.approx(18.0)

    idle = system_metrics([_metrics(math.inf, 0.0)], allow_degenerate=True)
    assert math.isnan(idle.overall_ee) and math.isinf(idle.harmonic_timeliness)


def test_analyze_source_bundles_everything():
    scenario = Scenario.model_validate(
        {
            "sources": [
                {"q": 0.1, "L": 2, "channel": {"direct": {"gamma": 0.8, "P": 15.0}}},
                {"q": 0.1, "L": 1, "channel": {"direct": {"gamma": 0.8, "P": 15.0}}},
            ]
        }
    )
    analysis = analyze_source(0, derive(scenario))
    assert analysis.source == 0
    assert analysis.metrics.mean_aoi == pytest.approx(12.323490, abs=1e-5)
    assert analysis.metrics.avg_power == pytest.approx(1.655850, abs=1e-5)
    assert analysis.aoi_pmf.total() == pytest.approx(1.0, abs=1e-9)
    assert analysis.tx_time_pmf is not None and len(analysis.tx_time_pmf.probs) == 2


def test_analysis_does_not_depend_on_the_solver():
    scenario = Scenario.model_validate(
        {"sources": [{"q": 0.1, "L": 3, "channel": {"direct": {"gamma": 0.8, "P": 1.0}}}] * 2}
    )
    derived = derive(scenario)
    series = analyze_source(0, derived)
    oracle = analyze_source(0, derived, solver=OracleStationarySolver(n_max=400))
    np.testing.assert_allclose(*_common(series.paoi_pmf, oracle.paoi_pmf), rtol=0, atol=1e-9)
