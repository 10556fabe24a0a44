import math

import numpy as np
import pytest

from wardflow import (
    EvaluationRecord,
    ObjectiveSpec,
    ParameterError,
    StructuralError,
    canonical_scenario,
    read_eval_log,
    synthetic_series,
    weighted_rmse,
    write_eval_log,
)


def rmse_slow(sim, ref, weights):
    """Reference computation with explicit loops."""
    total = 0.0
    per_kind = []
    for k in range(3):
        acc = 0.0
        for t in range(sim.shape[1]):
            acc += (sim[k, t] - ref[k, t]) ** 2
        per_kind.append(math.sqrt(acc / sim.shape[1]))
        total += weights[k] * per_kind[-1]
    return total, per_kind


def test_rmse_zero_on_identical_inputs(rng):
    x = rng.uniform(0, 50, size=(3, 91))
    score, per_kind = weighted_rmse(x, x)
    assert score == 0.0
    assert per_kind == (0.0, 0.0, 0.0)


def test_rmse_two_day_worked_example():
    ref = np.zeros((3, 2))
    sim = np.zeros((3, 2))
    sim[0] = [3.0, 4.0]  # squared errors 9 and 16 average to 12.5
    score, per_kind = weighted_rmse(sim, ref)
    assert abs(score - math.sqrt(12.5) / 3.0) < 1e-12
    assert per_kind[0] == pytest.approx(math.sqrt(12.5), abs=1e-12)
    assert per_kind[1] == 0.0 and per_kind[2] == 0.0


def test_rmse_matches_slow_reference(rng):
    for _ in range(20):
        sim = rng.uniform(0, 30, size=(3, 17))
        ref = rng.uniform(0, 30, size=(3, 17))
        weights = tuple(rng.uniform(0.1, 1.0, size=3))
        score, per_kind = weighted_rmse(sim, ref, weights)
        exp_score, exp_kind = rmse_slow(sim, ref, weights)
        assert score == pytest.approx(exp_score, rel=1e-12)
        assert np.allclose(per_kind, exp_kind)


def test_rmse_validates_shapes():
    with pytest.raises(ParameterError, match="mismatch"):
        weighted_rmse(np.zeros((3, 5)), np.zeros((3, 6)))
    with pytest.raises(ParameterError, match="\\(3, T\\)"):
        weighted_rmse(np.zeros((4, 5)), np.zeros((4, 5)))
    with pytest.raises(ParameterError, match="weights"):
        weighted_rmse(np.zeros((3, 5)), np.zeros((3, 5)), weights=(1.0,))


def test_objective_evaluation(config, series):
    obj = ObjectiveSpec.from_scenario(config, series)
    rec = obj.evaluate(config.registry.defaults())
    assert rec.epsilon > 0
    assert len(rec.rmse) == 3
    assert rec.replications == config.replication_count
    assert rec.wall_time > 0
    assert rec.seed == config.master_seed
    # scalar call agrees with the record
    assert obj(config.registry.defaults()) == rec.epsilon


def test_objective_common_random_numbers(config, series):
    obj = ObjectiveSpec.from_scenario(config, series)
    vec = config.registry.defaults()
    assert obj(vec) == obj(vec)
    other = config.registry.vector_from({"DaysInfectedToHospital": 9.0})
    assert obj(other) != obj(vec)


def test_objective_accepts_raw_arrays(config, series):
    obj = ObjectiveSpec.from_scenario(config, series)
    vec = config.registry.defaults()
    assert obj(np.array(vec.values)) == obj(vec)


def test_objective_rejects_short_series(config):
    short = synthetic_series(horizon_days=30, seed=1, peaks=())
    with pytest.raises(ParameterError, match="horizon"):
        ObjectiveSpec.from_scenario(config, short)


def test_objective_bounds_match_registry(config, series):
    obj = ObjectiveSpec.from_scenario(config, series)
    lower, upper = obj.bounds()
    np.testing.assert_array_equal(lower, config.registry.lower())
    np.testing.assert_array_equal(upper, config.registry.upper())
    assert obj.dimension == 22


def _records(rng, d=4, n=6):
    out = []
    for i in range(n):
        out.append(
            EvaluationRecord(
                values=rng.uniform(0, 1, size=d),
                epsilon=float(rng.uniform(1, 5)),
                rmse=(1.0, 2.0, 3.0),
                replications=10,
                wall_time=0.5,
                seed=99,
            )
        )
    return out


def test_eval_log_roundtrip(tmp_path, rng):
    records = _records(rng)
    path = tmp_path / "eval_log.csv"
    write_eval_log(records, path)
    frame = read_eval_log(path)
    assert list(frame.columns) == [
        "eval_id", "x_1", "x_2", "x_3", "x_4",
        "epsilon", "rmse_bed", "rmse_icu", "rmse_vent", "seed",
    ]
    assert list(frame["eval_id"]) == [1, 2, 3, 4, 5, 6]
    np.testing.assert_allclose(frame["x_3"], [r.values[2] for r in records])
    np.testing.assert_allclose(frame["epsilon"], [r.epsilon for r in records])
    assert (frame["seed"] == 99).all()


def test_eval_log_rejects_empty(tmp_path):
    with pytest.raises(ParameterError, match="empty"):
        write_eval_log([], tmp_path / "log.csv")


def test_read_eval_log_rejects_bad_columns(tmp_path):
    path = tmp_path / "log.csv"
    path.write_text("eval_id,x_1,x_3,epsilon,rmse_bed,rmse_icu,rmse_vent,seed\n"
                    "1,0.1,0.2,3.0,1,1,1,5\n")
    with pytest.raises(StructuralError, match="x_1"):
        read_eval_log(path)
    path.write_text("eval_id,epsilon\n1,3.0\n")
    with pytest.raises(StructuralError, match="columns"):
        read_eval_log(path)
    path.write_text("eval_id,x_1,epsilon,rmse_bed,rmse_icu,rmse_vent,seed\n")
    with pytest.raises(StructuralError, match="no data"):
        read_eval_log(path)
