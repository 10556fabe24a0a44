"""Weighted RMSE objective scoring simulated demand against the reference.

The score is a weighted sum over resource kinds of the per-kind root mean
squared error across days. Each evaluation runs a fixed set of replications
seeded from a master seed, so candidate parameter vectors are compared
under common random numbers.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .arrivals import CaseSeries
from .demand import DemandSeries, ground_truth_demand
from .engine import replicate
from .errors import IngestionError, ParameterError, StructuralError
from .scenario import RESOURCE_KINDS, ParameterVector, ScenarioConfig

DEFAULT_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)

EVAL_LOG_FIXED = ["eval_id", "epsilon", "rmse_bed", "rmse_icu", "rmse_vent", "seed"]


def weighted_rmse(
    simulated, reference, weights: tuple[float, float, float] = DEFAULT_WEIGHTS
) -> tuple[float, tuple[float, ...]]:
    """Return (score, per-kind rmse). Inputs are DemandSeries or (3, T) arrays."""
    sim = simulated.values if isinstance(simulated, DemandSeries) else np.asarray(simulated, float)
    ref = reference.values if isinstance(reference, DemandSeries) else np.asarray(reference, float)
    if sim.shape != ref.shape:
        raise ParameterError(f"shape mismatch: simulated {sim.shape} vs reference {ref.shape}")
    if sim.ndim != 2 or sim.shape[0] != len(RESOURCE_KINDS):
        raise ParameterError(f"expected (3, T) demand arrays, got {sim.shape}")
    if len(weights) != len(RESOURCE_KINDS):
        raise ParameterError("weights must supply one value per resource kind")
    per_kind = np.sqrt(np.mean((sim - ref) ** 2, axis=1))
    score = float(np.dot(weights, per_kind))
    return score, tuple(float(r) for r in per_kind)


@dataclass(frozen=True)
class EvaluationRecord:
    """One objective evaluation: the candidate, its score, and bookkeeping."""

    values: np.ndarray
    epsilon: float
    rmse: tuple[float, ...] | None
    replications: int
    wall_time: float
    seed: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Callable objective binding a scenario, a case series and the reference."""

    config: ScenarioConfig
    series: CaseSeries
    reference: DemandSeries
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS
    replications: int | None = None
    master_seed: int | None = None
    threads: int = 1

    @classmethod
    def from_scenario(
        cls,
        config: ScenarioConfig,
        series: CaseSeries,
        weights: tuple[float, float, float] = DEFAULT_WEIGHTS,
        replications: int | None = None,
        master_seed: int | None = None,
        threads: int = 1,
    ) -> "ObjectiveSpec":
        if len(series) < config.horizon_days:
            raise ParameterError(
                f"case series covers {len(series)} days, horizon needs {config.horizon_days}"
            )
        reference = ground_truth_demand(series, config.rates)
        return cls(
            config=config,
            series=series,
            reference=reference,
            weights=weights,
            replications=replications,
            master_seed=master_seed,
            threads=threads,
        )

    @property
    def dimension(self) -> int:
        return len(self.config.registry)

    @property
    def names(self) -> tuple[str, ...]:
        return self.config.registry.names()

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.config.registry.lower(), self.config.registry.upper()

    def _vector(self, x) -> ParameterVector:
        if isinstance(x, ParameterVector):
            return x
        return self.config.registry.vector(x)

    def evaluate(self, x) -> EvaluationRecord:
        vector = self._vector(x)
        n = self.config.replication_count if self.replications is None else self.replications
        seed = self.config.master_seed if self.master_seed is None else self.master_seed
        started = time.perf_counter()
        demand = replicate(
            self.config, self.series, vector, n=n, master_seed=seed, threads=self.threads
        )
        ref = self.reference.values[:, : self.config.horizon_days]
        epsilon, per_kind = weighted_rmse(demand.values, ref, self.weights)
        return EvaluationRecord(
            values=vector.values,
            epsilon=epsilon,
            rmse=per_kind,
            replications=n,
            wall_time=time.perf_counter() - started,
            seed=seed,
        )

    def __call__(self, x) -> float:
        return self.evaluate(x).epsilon


def write_eval_log(records, path) -> None:
    """Persist evaluations as CSV: eval_id, x_1..x_d, epsilon, rmses, seed."""
    rows = []
    for i, rec in enumerate(records, start=1):
        row: dict[str, object] = {"eval_id": i}
        for j, v in enumerate(rec.values, start=1):
            row[f"x_{j}"] = v
        row["epsilon"] = rec.epsilon
        rmse = rec.rmse if rec.rmse is not None else (np.nan,) * len(RESOURCE_KINDS)
        for kind, value in zip(RESOURCE_KINDS, rmse):
            row[f"rmse_{kind}"] = value
        row["seed"] = rec.seed
        rows.append(row)
    if not rows:
        raise ParameterError("cannot write an empty evaluation log")
    d = len(records[0].values)
    columns = ["eval_id"] + [f"x_{j}" for j in range(1, d + 1)] + EVAL_LOG_FIXED[1:]
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False)


def read_eval_log(path) -> pd.DataFrame:
    """Load an evaluation log, checking the column contract."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestionError(f"cannot read evaluation log {path}: {exc}") from exc
    cols = list(frame.columns)
    x_cols = [c for c in cols if c.startswith("x_")]
    expected_x = [f"x_{j}" for j in range(1, len(x_cols) + 1)]
    if x_cols != expected_x:
        raise StructuralError(
            f"evaluation log {path}: coordinate columns must be x_1..x_{len(x_cols)} "
            f"in order, found {x_cols}"
        )
    expected = ["eval_id"] + expected_x + EVAL_LOG_FIXED[1:]
    if cols != expected:
        raise StructuralError(
            f"evaluation log {path}: expected columns {expected}, found {cols}"
        )
    if len(frame) == 0:
        raise StructuralError(f"evaluation log {path}: no data rows")
    return frame
