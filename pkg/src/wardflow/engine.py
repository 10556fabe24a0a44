"""Stochastic patient-flow simulation over a state graph.

Patients never interact: there are no capacity limits, queues or shared
resources, so the union of independently sampled per-patient trajectories
has exactly the distribution an event-calendar simulation of the whole
population would produce. The engine therefore walks one patient at a time
from the entry state to an absorbing state, accumulating resource occupancy
along the way, which keeps the hot loop small and trivially parallel.

Timing convention: a patient arriving on day d enters the start state at
time t = d. A visit with entry e and exit x occupies its state's resource
on every integer day t with e <= t < x. Absorbing states have no exit;
if such a state is mapped to a resource the patient holds it to the end
of the horizon.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .arrivals import CaseSeries
from .demand import DemandSeries
from .errors import SimulationError, ValidationError
from .scenario import (
    GAMMA_SHAPE,
    RESOURCE_KINDS,
    ParameterVector,
    ScenarioConfig,
    StateGraph,
    bind_probabilities,
    validate,
)
from .seeding import mix_seed, stream

#: walks longer than this abort, guarding cyclic graphs
HOP_LIMIT = 100


@dataclass(frozen=True)
class Visit:
    """One stay in one state; exit is +inf for absorbing states."""

    state: str
    entry: float
    exit: float


@dataclass(frozen=True)
class PatientPath:
    patient_id: int
    visits: tuple[Visit, ...]

    @property
    def final_state(self) -> str:
        return self.visits[-1].state


@dataclass(frozen=True)
class SimulationResult:
    demand: DemandSeries
    paths: tuple[PatientPath, ...] | None = None


def sample_duration(rng: np.random.Generator, mean_days: float, shape: float) -> float:
    """Gamma-distributed sojourn with the given mean; scale is mean/shape."""
    return float(rng.gamma(shape, mean_days / shape))


def _compile(graph: StateGraph, vector: ParameterVector):
    """Per-state sampling tables: cumulative branch probabilities plus
    (target, duration index) pairs, resolved against the vector layout."""
    bound = bind_probabilities(graph, vector)
    registry = vector.registry
    table = {}
    for state in graph.states:
        edges = graph.outgoing(state)
        if not edges:
            table[state] = None
            continue
        probs = np.array([bound[(e.source, e.target)] for e in edges])
        table[state] = (
            np.cumsum(probs),
            [(e.target, registry.index(e.duration_param)) for e in edges],
        )
    return table


def sample_patient_path(
    graph: StateGraph,
    vector: ParameterVector,
    patient_id: int,
    arrival_time: float,
    rng: np.random.Generator,
    _table=None,
) -> PatientPath:
    """Walk one patient from the entry state to absorption."""
    table = _table if _table is not None else _compile(graph, vector)
    shape = vector[GAMMA_SHAPE] if GAMMA_SHAPE in vector.registry else 1.0
    values = vector.values
    visits: list[Visit] = []
    state = graph.start_state
    now = arrival_time
    for _ in range(HOP_LIMIT):
        entry = table[state]
        if entry is None:
            visits.append(Visit(state, now, math.inf))
            return PatientPath(patient_id, tuple(visits))
        cumulative, branches = entry
        u = rng.random()
        idx = int(np.searchsorted(cumulative, u, side="right"))
        if idx >= len(branches):  # u landed in float round-off past the last edge
            idx = len(branches) - 1
        target, dur_idx = branches[idx]
        stay = sample_duration(rng, values[dur_idx], shape)
        visits.append(Visit(state, now, now + stay))
        now += stay
        state = target
    raise SimulationError(
        f"patient {patient_id} exceeded {HOP_LIMIT} transitions without absorbing"
    )


def occupancy(paths, mapping, horizon_days: int, start_offset: float = 0.0) -> np.ndarray:
    """Re-derive the (3, T) occupancy array from explicit paths."""
    values = np.zeros((len(RESOURCE_KINDS), horizon_days))
    kind_index = {kind: i for i, kind in enumerate(RESOURCE_KINDS)}
    for path in paths:
        for visit in path.visits:
            kind = mapping.kind_of(visit.state)
            if kind is None:
                continue
            a = max(math.ceil(visit.entry - start_offset), 0)
            b = horizon_days if math.isinf(visit.exit) else math.ceil(visit.exit - start_offset)
            b = min(b, horizon_days)
            if a < b:
                values[kind_index[kind], a:b] += 1
    return values


def simulate_once(
    config: ScenarioConfig,
    series: CaseSeries,
    vector: ParameterVector,
    seed: int,
    keep_paths: bool = False,
) -> SimulationResult:
    """One replication: sample every arriving patient and tally occupancy."""
    report = validate(config.graph, config.registry, vector)
    if not report.ok:
        raise ValidationError(f"cannot simulate invalid parameters: {report}")
    horizon = config.horizon_days
    counts = series.counts[:horizon]
    rng = stream(seed)
    table = _compile(config.graph, vector)
    paths: list[PatientPath] = []
    patient_id = 0
    for day, n_cases in enumerate(counts):
        for _ in range(int(n_cases)):
            paths.append(
                sample_patient_path(
                    config.graph, vector, patient_id, float(day), rng, _table=table
                )
            )
            patient_id += 1
    values = occupancy(paths, config.mapping, horizon)
    demand = DemandSeries(start_date=series.start_date, values=values)
    return SimulationResult(demand=demand, paths=tuple(paths) if keep_paths else None)


def replicate(
    config: ScenarioConfig,
    series: CaseSeries,
    vector: ParameterVector,
    n: int | None = None,
    master_seed: int | None = None,
    threads: int = 1,
) -> DemandSeries:
    """Median demand over n replications, with the min/max envelope attached.

    Replication i uses a decorrelated stream derived from the master seed,
    so repeated calls with identical arguments reproduce bit-identical
    output and different parameter vectors share their noise.
    """
    n = config.replication_count if n is None else n
    if n < 1:
        raise ValidationError(f"replication count must be >= 1, got {n}")
    master = config.master_seed if master_seed is None else master_seed
    seeds = [mix_seed(master, i) for i in range(n)]

    def run(seed: int) -> np.ndarray:
        return simulate_once(config, series, vector, seed).demand.values

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stack = np.stack(list(pool.map(run, seeds)))
    else:
        stack = np.stack([run(s) for s in seeds])
    return DemandSeries(
        start_date=series.start_date,
        values=np.median(stack, axis=0),
        low=stack.min(axis=0),
        high=stack.max(axis=0),
    )


def write_paths(paths, path) -> None:
    """Debug trace: one JSON object per patient, exit null while absorbing."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in paths:
            record = {
                "patient_id": p.patient_id,
                "visits": [
                    {
                        "state": v.state,
                        "entry": v.entry,
                        "exit": None if math.isinf(v.exit) else v.exit,
                    }
                    for v in p.visits
                ],
            }
            fh.write(json.dumps(record) + "\n")
