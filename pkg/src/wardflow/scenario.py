"""Patient-flow state graph, bounded parameter registry, and scenario config.

The flow model is pure data: states are symbolic identifiers and every edge
names the registry entries holding its transition probability and mean
sojourn duration. Numeric values are bound later from a ParameterVector, so
a single graph serves the entire plausible-interval search box. All types
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StructuralError

# Canonical state identifiers. Custom graphs may introduce their own.
INF = "INF"  # infected, not hospitalized
NOR = "NOR"  # normal ward
ICU = "ICU"  # intensive care without ventilation
VEN = "VEN"  # intensive care with ventilation
AFT = "AFT"  # post-intensive step-down care (occupies a normal ward bed)
HEA = "HEA"  # recovered, absorbing
DEA = "DEA"  # deceased, absorbing

RESOURCE_KINDS = ("bed", "icu", "vent")

PROBABILITY = "probability"
DURATION = "duration-days"
SHAPE = "shape"

GAMMA_SHAPE = "GammaShapeParameter"

#: tolerance for "outgoing probabilities sum to one" checks
PROB_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Transition:
    """Directed edge between two states.

    ``probability_param`` names the registry entry holding the branch
    probability; ``None`` marks the complement edge, whose probability is
    one minus the sum of its siblings. ``duration_param`` names the entry
    holding the mean sojourn in days for patients taking this edge.
    """

    source: str
    target: str
    probability_param: str | None
    duration_param: str

    @property
    def is_complement(self) -> bool:
        return self.probability_param is None


@dataclass(frozen=True)
class StateGraph:
    """Immutable directed graph of patient states."""

    states: tuple[str, ...]
    edges: tuple[Transition, ...]

    def __post_init__(self):
        if len(set(self.states)) != len(self.states):
            raise StructuralError("state identifiers must be unique")
        known = set(self.states)
        complements: dict[str, int] = {}
        for e in self.edges:
            if e.source not in known or e.target not in known:
                raise StructuralError(f"edge {e.source}->{e.target} references unknown state")
            if e.source == e.target:
                raise StructuralError(f"self-loop on state {e.source} is not allowed")
            if e.is_complement:
                complements[e.source] = complements.get(e.source, 0) + 1
        for state, count in complements.items():
            if count > 1:
                raise StructuralError(f"state {state} has {count} complement edges (at most one allowed)")

    def outgoing(self, state: str) -> tuple[Transition, ...]:
        return tuple(e for e in self.edges if e.source == state)

    @property
    def absorbing_states(self) -> frozenset[str]:
        sources = {e.source for e in self.edges}
        return frozenset(s for s in self.states if s not in sources)

    @property
    def start_state(self) -> str:
        """The unique state without incoming edges."""
        targets = {e.target for e in self.edges}
        sources = [s for s in self.states if s not in targets and self.outgoing(s)]
        if len(sources) != 1:
            raise StructuralError(f"graph must have exactly one entry state, found {sources}")
        return sources[0]

    def parameter_names(self) -> tuple[str, ...]:
        """All registry names referenced by edges, in edge order, deduplicated."""
        names: list[str] = []
        for e in self.edges:
            if e.probability_param is not None and e.probability_param not in names:
                names.append(e.probability_param)
        for e in self.edges:
            if e.duration_param not in names:
                names.append(e.duration_param)
        return tuple(names)


@dataclass(frozen=True)
class ParameterSpec:
    """One named model parameter with its plausible interval."""

    name: str
    lower: float
    upper: float
    default: float
    kind: str

    def __post_init__(self):
        if self.kind not in (PROBABILITY, DURATION, SHAPE):
            raise ParameterError(f"{self.name}: unknown parameter kind {self.kind!r}")
        if not self.lower <= self.default <= self.upper:
            raise ParameterError(
                f"{self.name}: default {self.default} outside [{self.lower}, {self.upper}]"
            )
        if self.kind == PROBABILITY and not (0.0 <= self.lower and self.upper <= 1.0):
            raise ParameterError(f"{self.name}: probability bounds must lie within [0, 1]")


@dataclass(frozen=True)
class ParameterRegistry:
    """Ordered collection of ParameterSpec entries; defines the vector layout."""

    entries: tuple[ParameterSpec, ...]

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise StructuralError(f"duplicate registry names: {dupes}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise StructuralError(f"unknown parameter name {name!r}") from None

    def spec(self, name: str) -> ParameterSpec:
        return self.entries[self.index(name)]

    def lower(self) -> np.ndarray:
        return np.array([e.lower for e in self.entries])

    def upper(self) -> np.ndarray:
        return np.array([e.upper for e in self.entries])

    def defaults(self) -> "ParameterVector":
        return ParameterVector(self, np.array([e.default for e in self.entries]))

    def vector(self, values) -> "ParameterVector":
        return ParameterVector(self, np.asarray(values, dtype=float))

    def vector_from(self, mapping: dict) -> "ParameterVector":
        """Build a vector from a name->value mapping, defaults fill the rest."""
        values = np.array([e.default for e in self.entries])
        for name, value in mapping.items():
            values[self.index(name)] = float(value)
        return ParameterVector(self, values)


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Concrete parameter values in registry order, bounds-checked on construction."""

    registry: ParameterRegistry
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or len(values) != len(self.registry):
            raise StructuralError(
                f"vector length {values.size} does not match registry size {len(self.registry)}"
            )
        lo, hi = self.registry.lower(), self.registry.upper()
        bad = np.flatnonzero((values < lo) | (values > hi))
        if bad.size:
            names = self.registry.names()
            offenders = ", ".join(
                f"{names[i]}={values[i]} outside [{lo[i]}, {hi[i]}]" for i in bad
            )
            raise ParameterError(f"out-of-bounds parameter values: {offenders}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.registry.index(name)])

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParameterVector):
            return NotImplemented
        return self.registry == other.registry and np.array_equal(self.values, other.values)

    def to_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.registry.names(), self.values)}


@dataclass(frozen=True)
class ResourceMapping:
    """Partial map from state identifier to the resource kind it consumes."""

    assignments: tuple[tuple[str, str], ...]

    def __post_init__(self):
        states = [s for s, _ in self.assignments]
        if len(set(states)) != len(states):
            raise StructuralError("a state may be mapped to at most one resource kind")
        for state, kind in self.assignments:
            if kind not in RESOURCE_KINDS:
                raise ParameterError(f"unknown resource kind {kind!r} for state {state}")

    def kind_of(self, state: str) -> str | None:
        for s, kind in self.assignments:
            if s == state:
                return kind
        return None

    def items(self):
        return iter(self.assignments)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to run one calibration scenario."""

    graph: StateGraph
    registry: ParameterRegistry
    mapping: ResourceMapping
    horizon_days: int
    start_date: dt.date
    rates: tuple[float, float, float]  # ground-truth (bed, icu, vent) fractions
    replication_count: int
    master_seed: int

    def __post_init__(self):
        if self.horizon_days < 1:
            raise ParameterError(f"horizon_days must be >= 1, got {self.horizon_days}")
        if self.replication_count < 1:
            raise ParameterError(f"replication_count must be >= 1, got {self.replication_count}")
        if len(self.rates) != len(RESOURCE_KINDS):
            raise StructuralError("rates must supply one value per resource kind")
        for kind, r in zip(RESOURCE_KINDS, self.rates):
            if not 0.0 <= r <= 1.0:
                raise ParameterError(f"rate for {kind} must lie in [0, 1], got {r}")


@dataclass(frozen=True)
class ValidationReport:
    """Collected invariant violations; empty means the binding is valid."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "; ".join(self.violations)


def bind_probabilities(graph: StateGraph, vector: ParameterVector) -> dict[tuple[str, str], float]:
    """Resolve every edge's probability, computing complements. No validity checks."""
    bound: dict[tuple[str, str], float] = {}
    for state in graph.states:
        edges = graph.outgoing(state)
        if not edges:
            continue
        free = [e for e in edges if not e.is_complement]
        total = sum(vector[e.probability_param] for e in free)
        for e in free:
            bound[(e.source, e.target)] = vector[e.probability_param]
        for e in edges:
            if e.is_complement:
                bound[(e.source, e.target)] = 1.0 - total
    return bound


def validate(graph: StateGraph, registry: ParameterRegistry, values) -> ValidationReport:
    """Check a candidate vector against every model invariant.

    ``values`` may be a ParameterVector or a raw sequence in registry order;
    raw sequences are accepted so that out-of-bounds candidates can be
    *reported* instead of rejected at construction. A length mismatch is a
    structural error, not a validation failure.
    """
    if isinstance(values, ParameterVector):
        vals = values.values
    else:
        vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size != len(registry):
        raise StructuralError(
            f"vector length {vals.size} does not match registry size {len(registry)}"
        )

    violations: list[str] = []
    lo, hi = registry.lower(), registry.upper()
    names = registry.names()
    for i, spec in enumerate(registry):
        v = vals[i]
        if not np.isfinite(v):
            violations.append(f"{names[i]}: value {v} is not finite")
            continue
        if v < lo[i] or v > hi[i]:
            violations.append(f"{names[i]}: value {v} outside [{lo[i]}, {hi[i]}]")
        if spec.kind == DURATION and v <= 0.0:
            violations.append(f"{names[i]}: duration must be > 0 (got {v})")
        if spec.kind == SHAPE and v <= 0.0:
            violations.append(f"{names[i]}: shape must be > 0 (got {v})")

    def value_of(name: str) -> float:
        return float(vals[registry.index(name)])

    for state in graph.states:
        edges = graph.outgoing(state)
        if not edges:
            continue
        free_sum = sum(value_of(e.probability_param) for e in edges if not e.is_complement)
        has_complement = any(e.is_complement for e in edges)
        if has_complement:
            if free_sum > 1.0 + PROB_SUM_TOL:
                violations.append(
                    f"state {state}: outgoing probabilities sum to {free_sum} > 1"
                )
        elif abs(free_sum - 1.0) > PROB_SUM_TOL:
            violations.append(
                f"state {state}: outgoing probabilities sum to {free_sum}, expected 1"
            )
        for e in edges:
            if not e.is_complement and value_of(e.probability_param) < 0.0:
                violations.append(f"state {state}: negative probability on edge to {e.target}")
    return ValidationReport(tuple(violations))


# Canonical seven-state flow model. Each row: (source, target,
# probability entry or None for the complement edge, duration entry);
# entry tuples are (name, default, lower, upper). The three free branch
# probabilities leaving NOR are capped at 1/3 so that any point of the
# search box leaves the complement edge non-negative.
_CANONICAL_EDGES = (
    (INF, NOR, ("PercentageInfectedToHospital", 0.135, 0.05, 0.30),
               ("DaysInfectedToHospital", 7.0, 3.0, 14.0)),
    (INF, HEA, None,
               ("DaysInfectedToHealthy", 14.0, 7.0, 21.0)),
    (NOR, ICU, ("PercentageNormalToIntensive", 0.10, 0.0, 1.0 / 3.0),
               ("DaysNormalToIntensive", 3.0, 1.0, 10.0)),
    (NOR, VEN, ("PercentageHospitalToVentilation", 0.10, 0.0, 1.0 / 3.0),
               ("DaysHospitalToVentilation", 2.0, 1.0, 10.0)),
    (NOR, DEA, ("PercentageNormalToDeceased", 0.10, 0.0, 1.0 / 3.0),
               ("DaysNormalToDeceased", 12.0, 3.0, 25.0)),
    (NOR, HEA, None,
               ("DaysNormalToHealthy", 10.0, 5.0, 20.0)),
    (ICU, VEN, ("PercentageIntensiveToVentilation", 0.10, 0.0, 0.5),
               ("DaysIntensiveToVentilation", 2.0, 1.0, 8.0)),
    (ICU, DEA, ("PercentageIntensiveToDeceased", 0.10, 0.0, 0.5),
               ("DaysIntensiveToDeceased", 7.0, 2.0, 20.0)),
    (ICU, AFT, None,
               ("DaysIntensiveToAftercare", 5.0, 2.0, 14.0)),
    (VEN, DEA, ("PercentageVentilationToDeceased", 0.10, 0.0, 0.5),
               ("DaysVentilationToDeceased", 6.0, 2.0, 16.0)),
    (VEN, AFT, None,
               ("DaysVentilationToAftercare", 8.0, 3.0, 21.0)),
    (AFT, DEA, ("PercentageAftercareToDeceased", 0.10, 0.0, 0.5),
               ("DaysAftercareToDeceased", 5.0, 2.0, 14.0)),
    (AFT, HEA, None,
               ("DaysAftercareToHealthy", 7.0, 3.0, 14.0)),
)

_CANONICAL_STATES = (INF, NOR, ICU, VEN, AFT, HEA, DEA)


def build_canonical_graph() -> StateGraph:
    """The seven-state hospital flow graph with thirteen edges."""
    edges = tuple(
        Transition(src, dst, prob[0] if prob else None, dur[0])
        for src, dst, prob, dur in _CANONICAL_EDGES
    )
    return StateGraph(states=_CANONICAL_STATES, edges=edges)


def canonical_registry() -> ParameterRegistry:
    """Registry matching the canonical graph: 8 free probabilities, 13
    sojourn means, and the global Gamma shape — 22 entries."""
    entries: list[ParameterSpec] = []
    for _, _, prob, _ in _CANONICAL_EDGES:
        if prob is not None:
            name, default, lower, upper = prob
            entries.append(ParameterSpec(name, lower, upper, default, PROBABILITY))
    for _, _, _, dur in _CANONICAL_EDGES:
        name, default, lower, upper = dur
        entries.append(ParameterSpec(name, lower, upper, default, DURATION))
    entries.append(ParameterSpec(GAMMA_SHAPE, 0.5, 5.0, 1.0, SHAPE))
    return ParameterRegistry(tuple(entries))


def canonical_mapping() -> ResourceMapping:
    return ResourceMapping(((NOR, "bed"), (AFT, "bed"), (ICU, "icu"), (VEN, "vent")))


def canonical_scenario(
    horizon_days: int = 91,
    start_date: dt.date = dt.date(2020, 9, 1),
    rates: tuple[float, float, float] = (0.10, 0.03, 0.015),
    replication_count: int = 10,
    master_seed: int = 20200901,
) -> ScenarioConfig:
    return ScenarioConfig(
        graph=build_canonical_graph(),
        registry=canonical_registry(),
        mapping=canonical_mapping(),
        horizon_days=horizon_days,
        start_date=start_date,
        rates=tuple(rates),
        replication_count=replication_count,
        master_seed=master_seed,
    )


# --- scenario file (JSON) ---------------------------------------------------

_TOP_KEYS = {"graph", "registry", "mapping", "horizon", "start_date", "rates",
             "replications", "seed"}
_GRAPH_KEYS = {"states", "edges"}
_EDGE_KEYS = {"source", "target", "probability", "duration"}
_ENTRY_KEYS = {"name", "lower", "upper", "default", "kind"}


def _reject_unknown(mapping: dict, allowed: set, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise StructuralError(f"unknown key(s) in {context}: {sorted(unknown)}")
    missing = allowed - set(mapping)
    if missing:
        raise StructuralError(f"missing key(s) in {context}: {sorted(missing)}")


def scenario_to_dict(config: ScenarioConfig) -> dict:
    return {
        "graph": {
            "states": list(config.graph.states),
            "edges": [
                {
                    "source": e.source,
                    "target": e.target,
                    "probability": e.probability_param,
                    "duration": e.duration_param,
                }
                for e in config.graph.edges
            ],
        },
        "registry": [
            {"name": e.name, "lower": e.lower, "upper": e.upper,
             "default": e.default, "kind": e.kind}
            for e in config.registry
        ],
        "mapping": {state: kind for state, kind in config.mapping.items()},
        "horizon": config.horizon_days,
        "start_date": config.start_date.isoformat(),
        "rates": {kind: r for kind, r in zip(RESOURCE_KINDS, config.rates)},
        "replications": config.replication_count,
        "seed": config.master_seed,
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    _reject_unknown(data, _TOP_KEYS, "scenario file")
    _reject_unknown(data["graph"], _GRAPH_KEYS, "graph section")
    edges = []
    for raw in data["graph"]["edges"]:
        _reject_unknown(raw, _EDGE_KEYS, f"edge {raw.get('source')}->{raw.get('target')}")
        edges.append(Transition(raw["source"], raw["target"],
                                raw["probability"], raw["duration"]))
    graph = StateGraph(tuple(data["graph"]["states"]), tuple(edges))
    entries = []
    for raw in data["registry"]:
        _reject_unknown(raw, _ENTRY_KEYS, f"registry entry {raw.get('name')}")
        entries.append(ParameterSpec(raw["name"], float(raw["lower"]), float(raw["upper"]),
                                     float(raw["default"]), raw["kind"]))
    registry = ParameterRegistry(tuple(entries))
    mapping = ResourceMapping(tuple(sorted(data["mapping"].items())))
    rates_raw = data["rates"]
    _reject_unknown(rates_raw, set(RESOURCE_KINDS), "rates section")
    return ScenarioConfig(
        graph=graph,
        registry=registry,
        mapping=mapping,
        horizon_days=int(data["horizon"]),
        start_date=dt.date.fromisoformat(data["start_date"]),
        rates=tuple(float(rates_raw[k]) for k in RESOURCE_KINDS),
        replication_count=int(data["replications"]),
        master_seed=int(data["seed"]),
    )


def save_scenario(config: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(config), fh, indent=2)
        fh.write("\n")


def load_scenario(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return scenario_from_dict(data)
