import os

import numpy as np
import pytest
from scipy.stats import chisquare

from tarqaoi.core.errors import InvalidConfig, Mismatch, NoDeliveries
from tarqaoi.domain.scenario import Scenario
from tarqaoi.services.metrics_service import (
    analyze_source,
    aoi_mean,
    duty_cycle,
    narq_metrics,
    paoi_mean,
    tx_time_pmf,
)
from tarqaoi.services.model_service import derive
from tarqaoi.services.mdap_service import pi
from tarqaoi.services.simulation_service import (
    draw_events,
    empirical_metrics,
    empirical_source,
    merge,
    plan,
    run_replication,
    run_replications,
    trace,
)
from tarqaoi.services.stationary.series_solver import stationary_series
from tarqaoi.services.validation_service import compare, total_variation


def _slow_enabled() -> bool:
    # multi-million-slot runs; off unless asked for
    return os.getenv("TARQAOI_RUN_SLOW_TESTS", "0") == "1"


def _scenario(sources, **sim) -> Scenario:
    return Scenario.model_validate(
        {
            "sources": [
                {"q": q, "L": L, "channel": {"direct": {"gamma": gamma, "P": P}}}
                for q, L, gamma, P in sources
            ],
            "sim": sim,
        }
    )


STANDARD = [(0.1, 2, 0.8, 15.0), (0.1, 2, 0.8, 15.0)]


def test_saturated_perfect_channel_is_deterministic():
    scenario = _scenario([(1.0, 1, 1.0, 2.0)], slots=1000, warmup=10)
    counters = run_replication(scenario, derive(scenario), 0)
    c = counters.sources[0]
    assert counters.slots_counted == 990
    assert c.aoi_sum == 2 * 990
    assert c.aoi_histogram[2] == 990
    assert c.deliveries == 990
    assert c.paoi_sum == 2 * 990
    assert c.busy_slots == 990
    assert c.energy == pytest.approx(2.0 * 990)
    assert c.drops == 0 and c.preemptions == 0

    emp = empirical_source(counters, 0, 2.0)
    assert emp.metrics.mean_aoi == 2.0
    assert emp.metrics.duty_cycle == 1.0
    assert emp.metrics.mean_tx_time == 1.0


def test_same_seed_same_counters():
    scenario = _scenario(STANDARD, slots=50_000, seed=7)
    derived = derive(scenario)
    first = run_replication(scenario, derived, 3)
    second = run_replication(scenario, derived, 3)
    assert first.model_dump_json() == second.model_dump_json()
    assert run_replication(scenario, derived, 4).model_dump_json() != first.model_dump_json()


def test_events_do_not_depend_on_chunking():
    scenario = _scenario([(0.1, 3, 0.8, 1.0), (0.3, 2, 0.6, 1.0)])
    derived = derive(scenario)
    q = [0.1, 0.3]
    whole = draw_events(derived, q, 30_000, seed=11, rep_index=0)
    chunked = draw_events(derived, q, 30_000, seed=11, rep_index=0, chunk=997)
    for name in ("start", "owner", "tx_time", "available", "delivered", "dropped", "preempted"):
        np.testing.assert_array_equal(getattr(whole, name), getattr(chunked, name))


def test_shorter_run_is_a_prefix():
    scenario = _scenario(STANDARD)
    derived = derive(scenario)
    short = draw_events(derived, [0.1, 0.1], 5_000, seed=1, rep_index=0)
    long = draw_events(derived, [0.1, 0.1], 20_000, seed=1, rep_index=0)
    n = short.start.size
    np.testing.assert_array_equal(short.start, long.start[:n])
    np.testing.assert_array_equal(short.owner, long.owner[:n])
    np.testing.assert_array_equal(short.tx_time, long.tx_time[:n])


def test_event_log_invariants():
    scenario = _scenario([(0.1, 3, 0.8, 1.0), (0.3, 2, 0.6, 1.0)])
    derived = derive(scenario)
    log = draw_events(derived, [0.1, 0.3], 100_000, seed=5, rep_index=0)
    caps = np.array([3, 2])[log.owner]

    assert np.all(np.diff(log.start) > 0)
    assert np.all(log.available <= caps)
    assert np.all(log.busy <= log.available)
    assert np.all(log.start[:-1] + log.busy[:-1] <= log.start[1:])
    assert np.all(log.tx_time[log.delivered] <= log.available[log.delivered])
    outcomes = log.delivered.astype(int) + log.dropped.astype(int) + log.preempted.astype(int)
    assert np.all(outcomes[:-1] == 1)
    assert outcomes[-1] <= 1


def test_standard_case_quick_agreement():
    scenario = _scenario(STANDARD, slots=400_000, seed=2024)
    derived = derive(scenario)
    counters = run_replication(scenario, derived, 0)
    empirical = empirical_metrics(counters, [15.0, 15.0])
    for emp in empirical:
        assert emp.error is None
        assert emp.metrics.mean_aoi == pytest.approx(aoi_mean(2, 0.19, 0.095, 0.8), rel=0.03)
        assert emp.metrics.mean_paoi == pytest.approx(paoi_mean(2, 0.19, 0.095, 0.8), rel=0.03)
        assert emp.metrics.duty_cycle == pytest.approx(duty_cycle(2, 0.19, 0.095, 0.8), rel=0.03)
        assert emp.metrics.ee == pytest.approx(0.8 / 15.0, rel=0.03)
        assert emp.aoi_pmf.total() == pytest.approx(1.0, abs=1e-12)


def test_trace_follows_the_protocol():
    scenario = _scenario([(0.2, 3, 0.5, 1.0), (0.1, 1, 0.9, 1.0)], slots=5_000)
    derived = derive(scenario)
    tr = trace(scenario, derived)
    caps = np.array([3, 1])

    busy = tr.owner >= 0
    assert np.all(tr.attempt[~busy] == -1)
    assert np.all((tr.attempt[busy] >= 1) & (tr.attempt[busy] <= caps[tr.owner[busy]]))
    delivering = tr.delivered >= 0
    assert np.all(tr.owner[delivering] == tr.delivered[delivering])

    for i, aoi in enumerate(tr.aoi):
        assert aoi.shape == (5_000,)
        assert aoi[0] == 2 and np.all(aoi >= 2)
        steps = np.diff(aoi)
        after_delivery = tr.delivered[:-1] == i
        assert np.all(steps[~after_delivery] == 1)
        assert np.all(aoi[1:][after_delivery] == tr.attempt[:-1][after_delivery] + 1)


def test_trace_agrees_with_counters():
    scenario = _scenario(
        [(0.2, 3, 0.5, 4.0), (0.1, 2, 0.9, 1.0)],
        slots=20_000,
        warmup=100,
        seed=3,
        histogram_cap=5_000,
    )
    derived = derive(scenario)
    counters = run_replication(scenario, derived, 0)
    tr = trace(scenario, derived)
    ages = tr.aoi_matrix()[:, 100:]
    assert ages.shape == (2, 19_900)

    for i, c in enumerate(counters.sources):
        aoi = ages[i]
        assert c.aoi_overflow == 0
        assert c.aoi_sum == int(aoi.sum())
        np.testing.assert_array_equal(c.aoi_histogram, np.bincount(aoi, minlength=5_001))
        assert c.busy_slots == int((tr.owner[100:] == i).sum())
        assert c.deliveries == int((tr.delivered[100:] == i).sum())
        assert c.energy == pytest.approx(scenario.sources[i].channel.power * c.busy_slots)


def test_state_occupancy_matches_stationary_law():
    scenario = _scenario([(0.3, 3, 0.5, 1.0)], slots=300_000, seed=9)
    derived = derive(scenario)
    tr = trace(scenario, derived)
    warm = 1_000
    n = tr.aoi[0][warm:]
    m = np.where(tr.owner[warm:] == 0, tr.attempt[warm:], 0)

    series = stationary_series(3, 0.3, 0.3, 0.5)
    for state_n in range(2, 12):
        for state_m in range(0, min(3, state_n - 1) + 1):
            freq = float(np.mean((n == state_n) & (m == state_m)))
            assert freq == pytest.approx(pi(series, state_n, state_m), abs=0.01)


def test_merge_identity_and_order():
    scenario = _scenario(STANDARD, slots=20_000)
    derived = derive(scenario)
    a = run_replication(scenario, derived, 0)
    b = run_replication(scenario, derived, 1)
    assert merge([a]).model_dump_json() == a.model_dump_json()
    ab, ba = merge([a, b]), merge([b, a])
    assert ab.model_dump_json() == ba.model_dump_json()
    assert ab.replications == 2
    assert ab.slots_counted == a.slots_counted + b.slots_counted
    assert ab.sources[0].deliveries == a.sources[0].deliveries + b.sources[0].deliveries


def test_merge_rejects_foreign_counters():
    derived = derive(_scenario(STANDARD))
    a = run_replication(_scenario(STANDARD, slots=20_000, seed=1), derived, 0)
    b = run_replication(_scenario(STANDARD, slots=20_000, seed=2), derived, 0)
    with pytest.raises(Mismatch):
        merge([a, b])
    c = run_replication(_scenario(STANDARD, slots=20_000, seed=1, histogram_cap=80), derived, 0)
    with pytest.raises(Mismatch):
        merge([a, c])
    with pytest.raises(Mismatch):
        merge([])


def test_replications_in_process_and_in_pool_agree():
    scenario = _scenario(STANDARD, slots=20_000, replications=3)
    derived = derive(scenario)
    serial = run_replications(scenario, derived, workers=1)
    pooled = run_replications(scenario, derived, workers=2)
    assert serial.model_dump_json() == pooled.model_dump_json()
    assert serial.replications == 3


def test_silent_source_has_no_empirical_metrics():
    scenario = _scenario([(0.1, 2, 0.8, 1.0), (0.1, 2, 0.0, 1.0)], slots=50_000)
    counters = run_replication(scenario, derive(scenario), 0)
    assert counters.sources[1].deliveries == 0
    with pytest.raises(NoDeliveries):
        empirical_source(counters, 1, 1.0)
    empirical = empirical_metrics(counters, [1.0, 1.0])
    assert empirical[0].error is None
    assert empirical[1].error.startswith("NoDeliveries")
    assert empirical[1].metrics is None


def test_warmup_must_leave_counted_slots():
    scenario = _scenario(STANDARD, slots=1_000, warmup=1_000)
    with pytest.raises(InvalidConfig):
        plan(scenario, derive(scenario))
    short = _scenario(STANDARD, slots=1_000)
    assert plan(short, derive(short)).warmup == 500


def test_transmission_times_follow_truncated_geometric():
    scenario = _scenario([(0.2, 4, 0.4, 1.0)], slots=400_000, seed=13)
    counters = run_replication(scenario, derive(scenario), 0)
    observed = counters.sources[0].tx_time_histogram[1:]
    expected = observed.sum() * tx_time_pmf(4, 0.2, 0.4).probs
    assert chisquare(observed, expected).pvalue > 1e-3


def test_no_retransmission_aoi_and_paoi_look_alike():
    scenario = _scenario([(0.1, 1, 0.8, 1.0), (0.1, 1, 0.8, 1.0)], slots=1_000_000, seed=21)
    counters = run_replication(scenario, derive(scenario), 0)
    emp = empirical_source(counters, 0, 1.0)
    _, narq = narq_metrics(0.095, 0.8)
    assert total_variation(emp.aoi_pmf, emp.paoi_pmf) < 0.05
    assert total_variation(emp.aoi_pmf, narq) < 0.05
    assert total_variation(emp.paoi_pmf, narq) < 0.05


def test_asymmetric_scenario_validates():
    if not _slow_enabled():
        return

    scenario = _scenario(
        [(0.1, 3, 0.8, 15.0), (0.3, 2, 0.6, 10.0)], slots=10_000_000, seed=0
    )
    derived = derive(scenario)
    counters = run_replications(scenario, derived)
    analytic = [analyze_source(i, derived) for i in range(2)]
    report = compare(analytic, empirical_metrics(counters, [15.0, 10.0]))
    assert report.passed, report.model_dump_json(indent=2)


def test_standard_case_validates():
    if not _slow_enabled():
        return

    scenario = _scenario(STANDARD, slots=10_000_000, seed=0)
    derived = derive(scenario)
    counters = run_replications(scenario, derived)
    empirical = empirical_metrics(counters, [15.0, 15.0])
    assert empirical[0].metrics.mean_paoi == pytest.approx(12.4629, rel=0.005)
    report = compare([analyze_source(i, derived) for i in range(2)], empirical)
    assert report.passed, report.model_dump_json(indent=2)
