"""
Exhaustive grid sweeps over attempt caps (L), generation probabilities (q) and
transmit powers (P), and the weighted-sum and overall-EE optimizers built on
them.
"""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

import pandas as pd

from tarqaoi.core.config import get_settings
from tarqaoi.core.context import set_grid_point
from tarqaoi.core.errors import EmptyGrid, InvalidConfig
from tarqaoi.domain.metrics import NormalizationContext
from tarqaoi.domain.optimization import (
    Assignment,
    Baseline,
    GridSpec,
    ObjectiveSpec,
    OptResult,
    SweepRow,
    SweepTable,
)
from tarqaoi.domain.scenario import ChannelSpec, DerivedParams, DerivedSource, Scenario
from tarqaoi.services.metrics_service import (
    is_degenerate,
    source_metrics,
    system_metrics,
    weighted_sum,
)
from tarqaoi.services.model_service import (
    gamma_from_power,
    hold_probability,
    overall_ugp,
    selection_probabilities,
)

logger = logging.getLogger(__name__)


def _template_assignment(template: Scenario) -> Assignment:
    return Assignment(
        L=tuple(s.L for s in template.sources),
        q=tuple(s.q for s in template.sources),
        P=tuple(s.channel.power for s in template.sources),
    )


def grid_points(template: Scenario, grid: GridSpec) -> list[Assignment]:
    """Grid assignments in deterministic order: swept (dimension, source) pairs vary last-fastest."""
    n = template.n_sources
    for dim in ("L", "q", "P"):
        ranges = getattr(grid, dim)
        if ranges is not None and len(ranges) != n:
            raise InvalidConfig(f"grid dimension {dim} lists {len(ranges)} ranges for {n} sources")

    swept = grid.swept()
    axes = [getattr(grid, dim)[i].values() for dim, i in swept]
    if any(len(axis) == 0 for axis in axes):
        raise EmptyGrid("a swept range has no values")

    base = _template_assignment(template)
    points = []
    for combo in itertools.product(*axes):
        values = {"L": list(base.L), "q": list(base.q), "P": list(base.P)}
        for (dim, i), v in zip(swept, combo):
            values[dim][i] = v
        points.append(Assignment(L=tuple(values["L"]), q=tuple(values["q"]), P=tuple(values["P"])))
    if not points:
        raise EmptyGrid("grid has no points")
    return points


def _gamma(channel: ChannelSpec, P: float) -> float:
    if channel.direct is not None:
        return channel.direct.gamma
    assert channel.rayleigh is not None
    return gamma_from_power(P, channel.rayleigh.R)


def derive_point(template: Scenario, a: Assignment) -> DerivedParams:
    """Derived parameters of the template with one grid assignment applied."""
    p = overall_ugp(a.q)
    sources = []
    for i, (spec, p_i) in enumerate(zip(template.sources, selection_probabilities(a.q))):
        gamma = _gamma(spec.channel, a.P[i])
        sources.append(
            DerivedSource(
                p_i=p_i,
                gamma=gamma,
                lam=hold_probability(gamma, p),
                L=a.L[i],
                P=a.P[i],
                k=spec.channel.k,
            )
        )
    return DerivedParams(p=p, sources=sources)


def evaluate_point(args: tuple[int, Scenario, Assignment]) -> SweepRow:
    index, template, a = args
    set_grid_point(index)
    derived = derive_point(template, a)
    sources = [source_metrics(s, derived.p, allow_degenerate=True) for s in derived.sources]
    system = system_metrics(sources, allow_degenerate=True)
    return SweepRow(
        index=index,
        assignment=a,
        sources=sources,
        source_avg_aoi=system.source_avg_aoi,
        total_power=system.total_power,
        overall_ee=system.overall_ee,
        harmonic_timeliness=system.harmonic_timeliness,
        degenerate_sources=[i for i, s in enumerate(derived.sources) if is_degenerate(s)],
    )


def normalization_bounds(rows: list[SweepRow]) -> NormalizationContext:
    admissible = [r for r in rows if not r.degenerate_sources]
    if not admissible:
        logger.warning("No admissible grid point; normalization bounds collapse to zero")
        return NormalizationContext(aoi_min=0.0, aoi_max=0.0, power_min=0.0, power_max=0.0)
    aoi = [r.source_avg_aoi for r in admissible]
    power = [r.total_power for r in admissible]
    return NormalizationContext(
        aoi_min=min(aoi), aoi_max=max(aoi), power_min=min(power), power_max=max(power)
    )


def sweep(template: Scenario, grid: GridSpec, workers: Optional[int] = None) -> SweepTable:
    points = grid_points(template, grid)
    workers = workers or get_settings().workers
    jobs = [(i, template, a) for i, a in enumerate(points)]
    logger.info("Sweep started", extra={"points": len(points), "workers": workers})

    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(evaluate_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        else:
            rows = [evaluate_point(job) for job in jobs]
    except Exception as e:
        logger.exception("Sweep failed", extra={"points": len(points), "error": str(e)})
        raise

    degenerate = sum(1 for r in rows if r.degenerate_sources)
    if degenerate:
        logger.warning("Sweep contains degenerate points", extra={"degenerate_points": degenerate})
    table = SweepTable(swept=grid.swept(), rows=rows, normalization=normalization_bounds(rows))
    logger.info("Sweep finished", extra={"rows": len(rows)})
    return table


# -- objectives ----------------------------------------------------------------

def ws_value(row: SweepRow, weight_aoi: float, norm: NormalizationContext) -> float:
    if row.degenerate_sources:
        return math.inf
    return weighted_sum(row.source_avg_aoi, row.total_power, weight_aoi, norm)


def _best(rows: list[SweepRow], score: Callable[[SweepRow], float], maximize: bool) -> Optional[tuple[SweepRow, float]]:
    """Best finite score; ties go to the lexicographically smallest assignment."""
    scored = [(score(r), r) for r in rows]
    scored = [(v, r) for v, r in scored if math.isfinite(v)]
    if not scored:
        return None
    value, row = min(scored, key=lambda vr: ((-vr[0] if maximize else vr[0]), vr[1].assignment.key()))
    return row, value


# -- baselines -----------------------------------------------------------------

def _nearest(values: list, target: float):
    return min(values, key=lambda v: (abs(v - target), v))


def baseline_subsets(table: SweepTable, grid: GridSpec) -> dict[str, Callable[[Assignment], bool]]:
    """Named subsets of the grid whose optima serve as comparison points."""
    swept = table.swept
    by_dim: dict[str, list[int]] = {}
    for dim, i in swept:
        by_dim.setdefault(dim, []).append(i)

    subsets: dict[str, Callable[[Assignment], bool]] = {}

    def equal_across(a: Assignment) -> bool:
        return all(len({getattr(a, dim)[i] for i in idx}) == 1 for dim, idx in by_dim.items())

    if any(len(idx) > 1 for idx in by_dim.values()):
        subsets["source_agnostic"] = equal_across

    if "L" in by_dim:
        idx = by_dim["L"]
        ranges = {i: grid.L[i] for i in idx}  # type: ignore[index]
        if all(ranges[i].min == 1 for i in idx):
            subsets["narq"] = lambda a: all(a.L[i] == 1 for i in idx)
        top = {i: ranges[i].values()[-1] for i in idx}
        subsets["near_carq"] = lambda a: all(a.L[i] == top[i] for i in idx)

    for dim in ("q", "P"):
        if dim not in by_dim:
            continue
        idx = by_dim[dim]
        ranges = {i: getattr(grid, dim)[i] for i in idx}
        picks = {
            "median": {i: _nearest(ranges[i].values(), ranges[i].midpoint) for i in idx},
            "min": {i: ranges[i].values()[0] for i in idx},
            "max": {i: ranges[i].values()[-1] for i in idx},
        }
        for name, chosen in picks.items():
            subsets[f"{name}_{dim}"] = (
                lambda a, dim=dim, chosen=chosen: all(getattr(a, dim)[i] == v for i, v in chosen.items())
            )
    return subsets


def _baselines(
    table: SweepTable, grid: GridSpec, score: Callable[[SweepRow], float], maximize: bool
) -> dict[str, Baseline]:
    out: dict[str, Baseline] = {}
    for name, member in baseline_subsets(table, grid).items():
        best = _best([r for r in table.rows if member(r.assignment)], score, maximize)
        if best is None:
            logger.debug("Baseline subset has no admissible point", extra={"baseline": name})
            continue
        row, value = best
        out[name] = Baseline(assignment=row.assignment, value=value)
    return out


# -- optimizers ----------------------------------------------------------------

def optimize_ws(
    template: Scenario,
    grid: GridSpec,
    weight_aoi: float = 0.5,
    table: Optional[SweepTable] = None,
) -> OptResult:
    objective = ObjectiveSpec(kind="ws", weight_aoi=weight_aoi)
    table = table or sweep(template, grid)
    norm = table.normalization

    def score(r: SweepRow) -> float:
        return ws_value(r, weight_aoi, norm)

    best = _best(table.rows, score, maximize=False)
    if best is None:
        raise EmptyGrid("no grid point has finite AoI for every source")
    row, value = best
    result = OptResult(
        objective=objective,
        argopt=row.assignment,
        value=value,
        baselines=_baselines(table, grid, score, maximize=False),
        normalization=norm,
    )
    logger.info(
        "WS optimum found",
        extra={"value": value, "argopt": str(row.assignment.key()), "baselines": list(result.baselines)},
    )
    return result


def degeneracy_flags(table: SweepTable, row: SweepRow) -> list[str]:
    """
    Warn when the EE optimum starves a source: zero q or P, or a swept value
    at its grid minimum while the source's own EE is dominated by another's.
    """
    flags: list[str] = []
    a = row.assignment
    ee = [m.ee for m in row.sources]
    for i in range(len(row.sources)):
        if a.q[i] == 0.0:
            flags.append(f"source {i}: optimal q is 0, its AoI is unbounded")
        if a.P[i] == 0.0:
            flags.append(f"source {i}: optimal P is 0, its AoI is unbounded")

        others = [e for j, e in enumerate(ee) if j != i and math.isfinite(e)]
        dominated = math.isfinite(ee[i]) and bool(others) and ee[i] < max(others)
        if not dominated:
            continue
        for dim, j in table.swept:
            if j != i:
                continue
            values = [getattr(r.assignment, dim)[i] for r in table.rows]
            if getattr(a, dim)[i] == min(values) and getattr(a, dim)[i] != 0.0:
                flags.append(
                    f"source {i}: optimal {dim} sits at the grid minimum {getattr(a, dim)[i]} "
                    f"while its EE is dominated"
                )
    return flags


def optimize_ee(template: Scenario, grid: GridSpec, table: Optional[SweepTable] = None) -> OptResult:
    objective = ObjectiveSpec(kind="ee")
    table = table or sweep(template, grid)

    def score(r: SweepRow) -> float:
        return r.overall_ee

    best = _best(table.rows, score, maximize=True)
    if best is None:
        raise EmptyGrid("no grid point has a defined overall EE")
    row, value = best
    flags = degeneracy_flags(table, row)
    for flag in flags:
        logger.warning("Degenerate EE optimum", extra={"flag": flag})

    result = OptResult(
        objective=objective,
        argopt=row.assignment,
        value=value,
        baselines=_baselines(table, grid, score, maximize=True),
        normalization=table.normalization,
        degeneracy_flags=flags,
    )
    logger.info("EE optimum found", extra={"value": value, "argopt": str(row.assignment.key())})
    return result


# -- tabular output ------------------------------------------------------------

def sweep_frame(table: SweepTable, weight_aoi: float) -> pd.DataFrame:
    """One row per grid point, in grid order."""
    records = []
    for row in table.rows:
        rec: dict = {}
        for dim, i in table.swept:
            rec[f"{dim}_{i}"] = getattr(row.assignment, dim)[i]
        for i, m in enumerate(row.sources):
            rec[f"s{i}_mean_aoi"] = m.mean_aoi
            rec[f"s{i}_mean_paoi"] = m.mean_paoi
            rec[f"s{i}_duty_cycle"] = m.duty_cycle
            rec[f"s{i}_avg_power"] = m.avg_power
            rec[f"s{i}_ee"] = m.ee
        rec["source_avg_aoi"] = row.source_avg_aoi
        rec["total_power"] = row.total_power
        rec["ws"] = ws_value(row, weight_aoi, table.normalization)
        rec["overall_ee"] = row.overall_ee
        rec["harmonic_timeliness"] = row.harmonic_timeliness
        rec["degenerate"] = ";".join(str(i) for i in row.degenerate_sources)
        records.append(rec)
    return pd.DataFrame.from_records(records)
