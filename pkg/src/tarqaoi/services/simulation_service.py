"""
Monte Carlo simulation of the slotted multi-source protocol.

The simulator works on selection events rather than slots. Each event is the
end of a slot in which at least one source generated; the selected update
starts service in the next slot and keeps the channel until it is delivered,
hits its attempt cap, or the next event preempts it. Given the event times and
each update's geometric transmission time, every per-slot tally follows in
closed form, which keeps a 10^7-slot run vectorized.

Random streams (numpy Philox, one SeedSequence per (seed, replication)):
  0: generation draws, one uniform per (slot, source), row-major
  1: uniform tie-break among simultaneous generators, one per event
  2: transmission times, one geometric per event in event order
Each stream is consumed sequentially, so results do not depend on the chunk
size and a shorter run is an exact prefix of a longer one.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from tarqaoi.core.config import get_settings
from tarqaoi.core.context import set_rep_index
from tarqaoi.core.errors import Degenerate, InvalidConfig, Mismatch, NoDeliveries
from tarqaoi.domain.metrics import Pmf, SourceMetrics
from tarqaoi.domain.scenario import DerivedParams, Scenario
from tarqaoi.domain.simulation import (
    EmpiricalSource,
    SimCounters,
    SimTrace,
    SourceCounters,
)
from tarqaoi.services.metrics_service import aoi_mean
from tarqaoi.services.repositories.scenario_repository import fingerprint

logger = logging.getLogger(__name__)

MIN_WARMUP = 10_000
WARMUP_MEANS = 20
NEVER = np.iinfo(np.int64).max // 4


@dataclass(frozen=True)
class SimPlan:
    slots: int
    warmup: int
    caps: list[int]

    @property
    def slots_counted(self) -> int:
        return self.slots - self.warmup


@dataclass(frozen=True)
class EventLog:
    """
    One row per selected update. `start` is the generation slot g; the update
    occupies slots g+1 .. g+busy and, if delivered, is delivered at g+tx_time.
    """
    slots: int
    start: np.ndarray
    owner: np.ndarray
    tx_time: np.ndarray
    available: np.ndarray
    delivered: np.ndarray
    dropped: np.ndarray
    preempted: np.ndarray

    @property
    def busy(self) -> np.ndarray:
        return np.where(self.delivered, self.tx_time, self.available)

    @property
    def delivery_slot(self) -> np.ndarray:
        return self.start + self.tx_time


def streams(seed: int, rep_index: int) -> list[np.random.Generator]:
    root = np.random.SeedSequence(seed, spawn_key=(rep_index,))
    return [np.random.Generator(np.random.Philox(child)) for child in root.spawn(3)]


def _finite_means(derived: DerivedParams) -> list[Optional[float]]:
    means: list[Optional[float]] = []
    for src in derived.sources:
        if src.gamma > 0.0 and src.p_i > 0.0:
            means.append(aoi_mean(src.L, derived.p, src.p_i, src.gamma))
        else:
            means.append(None)
    return means


def plan(scenario: Scenario, derived: DerivedParams, slots: Optional[int] = None) -> SimPlan:
    """
    Resolve warmup and histogram caps. The default warmup is
    max(10^4, 20 x largest analytic mean AoI), capped at half the run.
    """
    settings = get_settings()
    cfg = scenario.sim
    slots = slots if slots is not None else cfg.slots
    means = _finite_means(derived)
    finite = [m for m in means if m is not None]

    if cfg.warmup is not None:
        if cfg.warmup >= slots:
            raise InvalidConfig(f"warmup {cfg.warmup} must be smaller than slots {slots}")
        warmup = cfg.warmup
    else:
        target = max(MIN_WARMUP, math.ceil(WARMUP_MEANS * max(finite, default=0.0)))
        warmup = min(target, slots // 2)

    if cfg.histogram_cap is not None:
        caps = [cfg.histogram_cap] * len(means)
    else:
        caps = [
            max(settings.histogram_cap_floor, math.ceil(settings.histogram_cap_factor * m))
            if m is not None
            else settings.histogram_cap_floor
            for m in means
        ]
    return SimPlan(slots=slots, warmup=warmup, caps=caps)


def draw_selections(
    q: np.ndarray,
    slots: int,
    gen_rng: np.random.Generator,
    pick_rng: np.random.Generator,
    chunk: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Slots whose end carries a selection, and the selected source of each."""
    times, owners = [], []
    for offset in range(0, slots, chunk):
        size = min(chunk, slots - offset)
        generated = gen_rng.random((size, len(q))) < q
        rows = np.flatnonzero(generated.any(axis=1))
        if rows.size == 0:
            continue
        hits = generated[rows]
        counts = hits.sum(axis=1)
        rank = (pick_rng.random(rows.size) * counts).astype(np.int64)
        owner = np.argmax(np.cumsum(hits, axis=1) > rank[:, None], axis=1)
        times.append(rows + offset)
        owners.append(owner)
    if not times:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(times).astype(np.int64), np.concatenate(owners).astype(np.int64)


def draw_events(
    derived: DerivedParams,
    q: Sequence[float],
    slots: int,
    seed: int,
    rep_index: int,
    chunk: Optional[int] = None,
) -> EventLog:
    gen_rng, pick_rng, tx_rng = streams(seed, rep_index)
    chunk = chunk or get_settings().sim_chunk_slots
    start, owner = draw_selections(np.asarray(q, dtype=float), slots, gen_rng, pick_rng, chunk)

    gamma = np.array([s.gamma for s in derived.sources])[owner]
    caps = np.array([s.L for s in derived.sources], dtype=np.int64)[owner]
    tx_time = tx_rng.geometric(np.where(gamma > 0.0, gamma, 1.0)).astype(np.int64)
    tx_time[gamma <= 0.0] = NEVER

    # the last update may only use the slots left in the run
    next_start = np.append(start[1:], slots - 1)
    available = np.minimum(caps, next_start - start)
    delivered = tx_time <= available
    dropped = ~delivered & (available == caps)
    preempted = ~delivered & (available < caps)
    if preempted.size:
        preempted[-1] = False  # censored by the end of the run

    return EventLog(
        slots=slots,
        start=start,
        owner=owner,
        tx_time=tx_time,
        available=available,
        delivered=delivered,
        dropped=dropped,
        preempted=preempted,
    )


def delivery_chain(log: EventLog, source: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Delivery slots and generation slots of the source's delivered updates,
    preceded by a virtual delivery at slot -1 of an update generated at -2
    so that the AoI starts at 2.
    """
    mask = log.delivered & (log.owner == source)
    d = np.concatenate(([-1], log.delivery_slot[mask]))
    g = np.concatenate(([-2], log.start[mask]))
    return d, g


def _range_histogram(lo: np.ndarray, hi: np.ndarray, cap: int) -> tuple[np.ndarray, int]:
    """Histogram of the union of integer ranges [lo, hi] with values above cap in overflow."""
    diff = np.zeros(cap + 2, dtype=np.int64)
    inside = lo <= cap
    np.add.at(diff, lo[inside], 1)
    np.add.at(diff, np.minimum(hi[inside], cap) + 1, -1)
    overflow = int(np.clip(hi - np.maximum(lo, cap + 1) + 1, 0, None).sum())
    return np.cumsum(diff[:-1]), overflow


def _value_histogram(values: np.ndarray, cap: int) -> tuple[np.ndarray, int]:
    inside = values <= cap
    return np.bincount(values[inside], minlength=cap + 1), int((~inside).sum())


def tally(log: EventLog, derived: DerivedParams, plan_: SimPlan) -> list[SourceCounters]:
    warmup, last = plan_.warmup, log.slots - 1
    busy = log.busy
    in_window = np.clip(
        np.minimum(log.start + busy, last) - np.maximum(log.start + 1, warmup) + 1, 0, None
    )
    delivery_slot = log.delivery_slot
    delivered_counted = log.delivered & (delivery_slot >= warmup)
    # slot in which a drop or preemption takes effect
    ended = log.start + log.available

    out: list[SourceCounters] = []
    for i, src in enumerate(derived.sources):
        cap = plan_.caps[i]
        mine = log.owner == i

        d, g = delivery_chain(log, i)
        seg_lo = np.maximum(d + 1, warmup)
        seg_hi = np.minimum(np.append(d[1:], last), last)
        keep = seg_lo <= seg_hi
        lo, hi = seg_lo[keep] - g[keep], seg_hi[keep] - g[keep]
        aoi_hist, aoi_over = _range_histogram(lo, hi, cap)
        aoi_sum = int(((lo + hi) * (hi - lo + 1) // 2).sum())

        peaks = (d[1:] - g[:-1])[d[1:] >= warmup]
        paoi_hist, paoi_over = _value_histogram(peaks, cap)

        tx = log.tx_time[mine & delivered_counted]
        tx_hist = np.bincount(tx, minlength=src.L + 1)
        busy_slots = int(in_window[mine].sum())

        out.append(
            SourceCounters(
                aoi_histogram=aoi_hist,
                aoi_overflow=aoi_over,
                aoi_sum=aoi_sum,
                paoi_histogram=paoi_hist,
                paoi_overflow=paoi_over,
                paoi_sum=int(peaks.sum()),
                tx_time_histogram=tx_hist,
                busy_slots=busy_slots,
                deliveries=int(peaks.size),
                drops=int((mine & log.dropped & (ended >= warmup)).sum()),
                preemptions=int((mine & log.preempted & (ended >= warmup)).sum()),
                energy=src.P * busy_slots,
            )
        )
    return out


def run_replication(scenario: Scenario, derived: DerivedParams, rep_index: int) -> SimCounters:
    plan_ = plan(scenario, derived)
    logger.debug(
        "Replication started",
        extra={"rep_index": rep_index, "slots": plan_.slots, "warmup": plan_.warmup},
    )
    log = draw_events(
        derived, [s.q for s in scenario.sources], plan_.slots, scenario.sim.seed, rep_index
    )
    sources = tally(log, derived, plan_)

    for i, counters in enumerate(sources):
        if counters.aoi_overflow:
            logger.warning(
                "AoI histogram overflow",
                extra={"source": i, "overflow": counters.aoi_overflow, "cap": counters.cap},
            )
    logger.debug(
        "Replication finished",
        extra={"rep_index": rep_index, "events": int(log.start.size)},
    )
    return SimCounters(
        fingerprint=fingerprint(scenario),
        slots_counted=plan_.slots_counted,
        replications=1,
        sources=sources,
    )


def trace(
    scenario: Scenario, derived: DerivedParams, rep_index: int = 0, slots: Optional[int] = None
) -> SimTrace:
    """Per-slot trajectory of slots 0..slots-1 built from the replication's event stream."""
    slots = slots if slots is not None else scenario.sim.slots
    log = draw_events(derived, [s.q for s in scenario.sources], slots, scenario.sim.seed, rep_index)
    t = np.arange(slots, dtype=np.int64)

    owner = np.full(slots, -1, dtype=np.int64)
    attempt = np.full(slots, -1, dtype=np.int64)
    busy = log.busy
    occupied = np.repeat(np.arange(log.start.size), busy)
    slot_of = np.repeat(log.start + 1, busy) + (
        np.arange(occupied.size) - np.repeat(np.cumsum(busy) - busy, busy)
    )
    owner[slot_of] = log.owner[occupied]
    attempt[slot_of] = slot_of - log.start[occupied]

    delivered = np.full(slots, -1, dtype=np.int64)
    delivered[log.delivery_slot[log.delivered]] = log.owner[log.delivered]

    aoi = []
    for i in range(derived.n_sources):
        d, g = delivery_chain(log, i)
        lengths = np.append(d[1:], slots - 1) - d
        lengths[-1] = max(slots - 1 - d[-1], 0)
        base = np.repeat(g, lengths)
        aoi.append(t - base[:slots])
    return SimTrace(aoi=aoi, owner=owner, attempt=attempt, delivered=delivered)


def merge(counters: Sequence[SimCounters]) -> SimCounters:
    if not counters:
        raise Mismatch("nothing to merge")
    first = counters[0]
    for other in counters[1:]:
        if other.fingerprint != first.fingerprint:
            raise Mismatch("cannot merge counters of different scenarios")
        if [s.cap for s in other.sources] != [s.cap for s in first.sources]:
            raise Mismatch("cannot merge counters with different histogram caps")

    sources = []
    for i in range(len(first.sources)):
        parts = [c.sources[i] for c in counters]
        sources.append(
            SourceCounters(
                aoi_histogram=np.sum([p.aoi_histogram for p in parts], axis=0),
                aoi_overflow=sum(p.aoi_overflow for p in parts),
                aoi_sum=sum(p.aoi_sum for p in parts),
                paoi_histogram=np.sum([p.paoi_histogram for p in parts], axis=0),
                paoi_overflow=sum(p.paoi_overflow for p in parts),
                paoi_sum=sum(p.paoi_sum for p in parts),
                tx_time_histogram=np.sum([p.tx_time_histogram for p in parts], axis=0),
                busy_slots=sum(p.busy_slots for p in parts),
                deliveries=sum(p.deliveries for p in parts),
                drops=sum(p.drops for p in parts),
                preemptions=sum(p.preemptions for p in parts),
                # exactly rounded, so the merge order never shows
                energy=math.fsum(p.energy for p in parts),
            )
        )
    return SimCounters(
        fingerprint=first.fingerprint,
        slots_counted=sum(c.slots_counted for c in counters),
        replications=sum(c.replications for c in counters),
        sources=sources,
    )


def _replicate(args: tuple[Scenario, DerivedParams, int]) -> SimCounters:
    scenario, derived, rep_index = args
    set_rep_index(rep_index)
    return run_replication(scenario, derived, rep_index)


def run_replications(
    scenario: Scenario, derived: DerivedParams, workers: Optional[int] = None
) -> SimCounters:
    workers = workers or get_settings().workers
    reps = scenario.sim.replications
    jobs = [(scenario, derived, r) for r in range(reps)]
    logger.info("Simulation started", extra={"replications": reps, "workers": workers})

    try:
        if workers > 1 and reps > 1:
            with ProcessPoolExecutor(max_workers=min(workers, reps)) as pool:
                results = list(pool.map(_replicate, jobs))
        else:
            results = [_replicate(job) for job in jobs]
    except Exception as e:
        logger.exception("Simulation failed", extra={"error": str(e)})
        raise

    merged = merge(results)
    logger.info(
        "Simulation finished",
        extra={"replications": reps, "slots_counted": merged.slots_counted},
    )
    return merged


def _histogram_pmf(hist: np.ndarray, overflow: int, total: int, first_index: int) -> Pmf:
    return Pmf(
        first_index=first_index,
        probs=np.asarray(hist[first_index:], dtype=float) / total,
        tail_mass=overflow / total,
    )


def empirical_source(counters: SimCounters, source: int, power: float) -> EmpiricalSource:
    c = counters.sources[source]
    slots = counters.slots_counted
    rate = c.deliveries / slots
    if c.deliveries == 0:
        raise NoDeliveries(f"source {source} delivered nothing in {slots} counted slots")
    if c.energy <= 0.0 or power <= 0.0:
        raise Degenerate(f"source {source} spent no energy; efficiency is undefined")

    tx_values = np.arange(len(c.tx_time_histogram))
    metrics = SourceMetrics(
        mean_aoi=c.aoi_sum / slots,
        mean_paoi=c.paoi_sum / c.deliveries,
        duty_cycle=c.busy_slots / slots,
        avg_power=c.energy / slots,
        ee=c.deliveries / c.energy,
        mean_tx_time=float(np.dot(tx_values, c.tx_time_histogram)) / c.deliveries,
        mean_success_interval=slots / c.deliveries,
    )
    return EmpiricalSource(
        source=source,
        delivery_rate=rate,
        metrics=metrics,
        aoi_pmf=_histogram_pmf(c.aoi_histogram, c.aoi_overflow, slots, 2),
        paoi_pmf=_histogram_pmf(c.paoi_histogram, c.paoi_overflow, c.deliveries, 2),
        tx_time_pmf=_histogram_pmf(c.tx_time_histogram, 0, c.deliveries, 1),
    )


def empirical_metrics(counters: SimCounters, powers: Sequence[float]) -> list[EmpiricalSource]:
    """Per-source empirical metrics; sources where they are undefined carry an error instead."""
    if counters.slots_counted <= 0:
        raise InvalidConfig("no slots were counted")
    out = []
    for i, power in enumerate(powers):
        try:
            out.append(empirical_source(counters, i, power))
        except (NoDeliveries, Degenerate) as e:
            logger.warning("Empirical metrics undefined", extra={"source": i, "error": str(e)})
            out.append(
                EmpiricalSource(
                    source=i,
                    delivery_rate=counters.sources[i].deliveries / counters.slots_counted,
                    error=f"{type(e).__name__}: {e}",
                )
            )
    return out
