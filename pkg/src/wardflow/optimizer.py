"""Surrogate-based sequential optimization on a box-bounded domain.

The loop is the classical one for expensive noisy objectives: evaluate a
space-filling initial design, fit a Kriging surrogate to everything seen so
far, then repeatedly evaluate the point maximizing expected improvement and
refit. All randomness (design, kernel restarts, infill search) derives from
a single seed plus the iteration index, so an interrupted run resumed from
its checkpoint retraces the uninterrupted run exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import FitError, ParameterError, StructuralError
from .kriging import Kriging
from .objective import EvaluationRecord
from .seeding import mix_seed, stream

#: stream tags: keep design, kernel-restart and infill randomness apart
_TAG_DESIGN = 1
_TAG_FIT = 1_000_000
_TAG_INFILL = 2_000_000

CHECKPOINT_VERSION = 1


def latin_hypercube(n_points: int, lower, upper, rng: np.random.Generator) -> np.ndarray:
    """Stratified design: one point per axis-aligned slice in every dimension."""
    if n_points < 2:
        raise ParameterError(f"a Latin hypercube needs at least 2 points, got {n_points}")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise StructuralError("lower and upper bounds must be 1-d arrays of equal length")
    if np.any(lower > upper):
        raise ParameterError("lower bound exceeds upper bound")
    d = lower.size
    unit = np.empty((n_points, d))
    for j in range(d):
        perm = rng.permutation(n_points)
        unit[:, j] = (perm + rng.uniform(size=n_points)) / n_points
    return lower + unit * (upper - lower)


def fit_surrogate(
    X,
    y,
    nugget: float | None = None,
    n_restarts: int = 10,
    random_state: int | None = None,
    warm_model: Kriging | None = None,
) -> Kriging:
    """Fit a Kriging model to observed evaluations.

    Passing ``warm_model`` refits that model in place, reusing its kernel
    optimum as a starting point; ``n_restarts`` then counts the extra
    random starts.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise FitError(f"X must be 2-d, got shape {X.shape}")
    n_distinct = np.unique(X, axis=0).shape[0]
    if n_distinct < X.shape[1] + 1:
        raise FitError(
            f"need at least {X.shape[1] + 1} distinct points for {X.shape[1]} "
            f"dimensions, got {n_distinct}"
        )
    if warm_model is not None:
        warm_model.set_params(warm_start=True, random_state=random_state)
        return warm_model.fit(X, y, n_restarts=n_restarts)
    model = Kriging(nugget=nugget, n_restarts=n_restarts, random_state=random_state)
    return model.fit(X, y)


def _neg_ei_batched(x, model, best, upper, h):
    """EI and forward-difference gradient from one batched prediction."""
    steps = np.where(x + h <= upper, h, -h)
    pts = np.vstack([x, x + np.diag(steps)])
    ei = model.expected_improvement_at(pts, best)
    grad = (ei[1:] - ei[0]) / steps
    return -ei[0], -grad


def _neg_mean_batched(x, model, upper, h):
    steps = np.where(x + h <= upper, h, -h)
    pts = np.vstack([x, x + np.diag(steps)])
    mean = model.predict(pts)
    grad = (mean[1:] - mean[0]) / steps
    return mean[0], grad


def propose_infill(
    model: Kriging,
    lower,
    upper,
    rng: np.random.Generator,
    existing: np.ndarray | None = None,
    n_starts: int = 100,
    n_refine: int = 5,
    maxiter: int = 15,
) -> np.ndarray:
    """Next point to evaluate: maximize expected improvement.

    A random candidate sweep finds promising basins, the best few are
    polished with a bounded quasi-Newton search, and near-duplicates of
    already-evaluated points are nudged away so the surrogate never
    receives a repeated row.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    span = upper - lower
    best = float(np.min(model.y_train_))
    h = 1e-6 * np.where(span > 0, span, 1.0)

    candidates = lower + rng.uniform(size=(n_starts, lower.size)) * span
    ei = model.expected_improvement_at(candidates, best)
    order = np.argsort(ei)[::-1]
    bounds = list(zip(lower, upper))

    best_x, best_ei = candidates[order[0]], float(ei[order[0]])
    for idx in order[:n_refine]:
        res = minimize(
            _neg_ei_batched,
            candidates[idx],
            args=(model, best, upper, h),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": maxiter},
        )
        if -res.fun > best_ei:
            best_ei, best_x = float(-res.fun), res.x

    if best_ei <= 1e-16:
        # surrogate sees no room for improvement anywhere; exploit its mean
        mean = model.predict(candidates)
        start = candidates[int(np.argmin(mean))]
        res = minimize(
            _neg_mean_batched,
            start,
            args=(model, upper, h),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": maxiter},
        )
        best_x = res.x

    best_x = np.clip(best_x, lower, upper)
    if existing is not None and len(existing):
        tol = 1e-9 * np.where(span > 0, span, 1.0)
        delta = 1e-6
        for _ in range(30):
            dup = np.all(np.abs(existing - best_x) <= tol, axis=1).any()
            if not dup:
                break
            noise = rng.uniform(-delta, delta, size=best_x.size) * np.where(span > 0, span, 1.0)
            best_x = np.clip(best_x + noise, lower, upper)
            delta *= 4.0
        else:
            best_x = lower + rng.uniform(size=lower.size) * span
    return best_x


@dataclass
class OptimizationResult:
    best_values: np.ndarray
    best_epsilon: float
    records: list[EvaluationRecord]
    seed: int
    design_size: int

    @property
    def n_evaluations(self) -> int:
        return len(self.records)


class _CallableObjective:
    """Adapter giving a bare function the evaluate/bounds interface."""

    def __init__(self, fn, lower, upper, seed: int = 0):
        self._fn = fn
        self._lower = np.asarray(lower, dtype=float)
        self._upper = np.asarray(upper, dtype=float)
        self._seed = seed

    def bounds(self):
        return self._lower, self._upper

    def evaluate(self, x) -> EvaluationRecord:
        started = time.perf_counter()
        value = float(self._fn(np.asarray(x, dtype=float)))
        return EvaluationRecord(
            values=np.asarray(x, dtype=float),
            epsilon=value,
            rmse=None,
            replications=0,
            wall_time=time.perf_counter() - started,
            seed=self._seed,
        )


def _record_to_dict(rec: EvaluationRecord) -> dict:
    return {
        "values": [float(v) for v in rec.values],
        "epsilon": rec.epsilon,
        "rmse": list(rec.rmse) if rec.rmse is not None else None,
        "replications": rec.replications,
        "wall_time": rec.wall_time,
        "seed": rec.seed,
    }


def _record_from_dict(data: dict) -> EvaluationRecord:
    return EvaluationRecord(
        values=np.array(data["values"], dtype=float),
        epsilon=float(data["epsilon"]),
        rmse=tuple(data["rmse"]) if data["rmse"] is not None else None,
        replications=int(data["replications"]),
        wall_time=float(data["wall_time"]),
        seed=int(data["seed"]),
    )


def save_checkpoint(path, seed, design_size, lower, upper, records, theta) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "seed": seed,
        "design_size": design_size,
        "lower": [float(v) for v in lower],
        "upper": [float(v) for v in upper],
        "records": [_record_to_dict(r) for r in records],
        "surrogate_theta": [float(v) for v in theta] if theta is not None else None,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    tmp.replace(path)


def load_checkpoint(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if data.get("version") != CHECKPOINT_VERSION:
        raise StructuralError(
            f"checkpoint {path}: unsupported version {data.get('version')!r}"
        )
    return data


def optimize(
    objective,
    budget: int = 200,
    seed: int = 0,
    *,
    bounds: tuple | None = None,
    design_size: int | None = None,
    checkpoint_path=None,
    resume: bool = False,
    callback=None,
    n_restarts: int = 10,
    infill_starts: int = 100,
    infill_refine: int = 5,
) -> OptimizationResult:
    """Run the full design-then-infill loop within an evaluation budget.

    ``objective`` is either an object exposing ``bounds()`` and
    ``evaluate(x)`` or a plain callable, in which case ``bounds`` must
    supply (lower, upper). The budget counts every evaluation including
    the initial design.
    """
    if callable(getattr(objective, "evaluate", None)) and callable(getattr(objective, "bounds", None)):
        obj = objective
    elif callable(objective):
        if bounds is None:
            raise ParameterError("a bare callable objective needs explicit bounds")
        obj = _CallableObjective(objective, bounds[0], bounds[1], seed=seed)
    else:
        raise ParameterError("objective must be callable or expose evaluate() and bounds()")

    lower, upper = obj.bounds()
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    d = lower.size
    if design_size is None:
        design_size = max(2 * d, 10)
    if design_size < 2:
        raise ParameterError(f"design_size must be >= 2, got {design_size}")
    if budget < design_size:
        raise ParameterError(
            f"budget {budget} is smaller than the initial design size {design_size}"
        )

    records: list[EvaluationRecord] = []
    theta = None
    if resume:
        if checkpoint_path is None:
            raise ParameterError("resume requires a checkpoint path")
        data = load_checkpoint(checkpoint_path)
        if int(data["seed"]) != seed:
            raise StructuralError(
                f"checkpoint seed {data['seed']} does not match requested seed {seed}"
            )
        if not (np.allclose(data["lower"], lower) and np.allclose(data["upper"], upper)):
            raise StructuralError("checkpoint bounds do not match the objective")
        design_size = int(data["design_size"])
        records = [_record_from_dict(r) for r in data["records"]]
        theta = np.array(data["surrogate_theta"]) if data["surrogate_theta"] else None
        if budget < design_size:
            raise ParameterError(
                f"budget {budget} is smaller than the checkpointed design size {design_size}"
            )

    if budget > design_size and design_size < d + 1:
        raise ParameterError(
            f"design_size {design_size} cannot support a surrogate in {d} "
            f"dimensions; need at least {d + 1} design points"
        )

    design = latin_hypercube(design_size, lower, upper, stream(mix_seed(seed, _TAG_DESIGN)))

    def note(rec):
        if callback is not None:
            callback(len(records), rec)
        if checkpoint_path is not None:
            save_checkpoint(checkpoint_path, seed, design_size, lower, upper,
                            records, theta)

    while len(records) < min(design_size, budget):
        rec = obj.evaluate(design[len(records)])
        records.append(rec)
        note(rec)

    model: Kriging | None = None
    while len(records) < budget:
        i = len(records)
        X = np.vstack([r.values for r in records])
        y = np.array([r.epsilon for r in records])
        fit_seed = mix_seed(seed, _TAG_FIT + i)
        if model is None and theta is None:
            model = fit_surrogate(X, y, n_restarts=n_restarts, random_state=fit_seed)
        else:
            if model is None:
                # resumed run: rebuild the warm chain from the checkpoint
                model = Kriging()
                model._theta = theta
            extra = 3 if i % 10 == 0 else 1
            model = fit_surrogate(X, y, n_restarts=extra, random_state=fit_seed,
                                  warm_model=model)
        theta = model._theta
        x_next = propose_infill(
            model, lower, upper, stream(mix_seed(seed, _TAG_INFILL + i)),
            existing=X, n_starts=infill_starts, n_refine=infill_refine,
        )
        rec = obj.evaluate(x_next)
        records.append(rec)
        note(rec)

    best_idx = int(np.argmin([r.epsilon for r in records]))
    return OptimizationResult(
        best_values=records[best_idx].values,
        best_epsilon=records[best_idx].epsilon,
        records=records,
        seed=seed,
        design_size=design_size,
    )


def random_search(objective, budget: int, seed: int, *, bounds: tuple | None = None) -> OptimizationResult:
    """Uniform random sampling baseline under the same interface."""
    if callable(getattr(objective, "evaluate", None)) and callable(getattr(objective, "bounds", None)):
        obj = objective
    elif callable(objective):
        if bounds is None:
            raise ParameterError("a bare callable objective needs explicit bounds")
        obj = _CallableObjective(objective, bounds[0], bounds[1], seed=seed)
    else:
        raise ParameterError("objective must be callable or expose evaluate() and bounds()")
    if budget < 1:
        raise ParameterError(f"budget must be >= 1, got {budget}")
    lower, upper = obj.bounds()
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rng = stream(mix_seed(seed, _TAG_DESIGN))
    records = [
        obj.evaluate(lower + rng.uniform(size=lower.size) * (upper - lower))
        for _ in range(budget)
    ]
    best_idx = int(np.argmin([r.epsilon for r in records]))
    return OptimizationResult(
        best_values=records[best_idx].values,
        best_epsilon=records[best_idx].epsilon,
        records=records,
        seed=seed,
        design_size=0,
    )
