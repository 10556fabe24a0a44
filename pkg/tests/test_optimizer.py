import numpy as np
import pytest

from wardflow import (
    FitError,
    Kriging,
    ParameterError,
    StructuralError,
    fit_surrogate,
    latin_hypercube,
    load_checkpoint,
    optimize,
    propose_infill,
    random_search,
    stream,
)


def quadratic(x):
    return float(np.sum((x - 0.3) ** 2))


def test_latin_hypercube_stratification():
    m, d = 16, 3
    lower, upper = np.zeros(d), np.ones(d)
    points = latin_hypercube(m, lower, upper, stream(4))
    assert points.shape == (m, d)
    for j in range(d):
        strata = np.floor(points[:, j] * m).astype(int)
        # exactly one point per slice in every dimension
        assert sorted(strata) == list(range(m))


def test_latin_hypercube_respects_bounds():
    lower = np.array([-5.0, 2.0])
    upper = np.array([-1.0, 8.0])
    points = latin_hypercube(10, lower, upper, stream(1))
    assert (points >= lower).all() and (points <= upper).all()


def test_latin_hypercube_is_deterministic():
    a = latin_hypercube(8, np.zeros(2), np.ones(2), stream(7))
    b = latin_hypercube(8, np.zeros(2), np.ones(2), stream(7))
    np.testing.assert_array_equal(a, b)


def test_latin_hypercube_validation():
    with pytest.raises(ParameterError, match="at least 2"):
        latin_hypercube(1, np.zeros(2), np.ones(2), stream(0))
    with pytest.raises(ParameterError, match="exceeds"):
        latin_hypercube(4, np.ones(2), np.zeros(2), stream(0))
    with pytest.raises(StructuralError):
        latin_hypercube(4, np.zeros(2), np.ones(3), stream(0))


def test_fit_surrogate_needs_enough_distinct_points(rng):
    X = np.tile(rng.uniform(size=(2, 4)), (3, 1))  # 6 rows, 2 distinct
    y = rng.normal(size=6)
    with pytest.raises(FitError, match="distinct"):
        fit_surrogate(X, y)
    X = rng.uniform(size=(12, 4))
    model = fit_surrogate(X, X.sum(axis=1), random_state=0)
    assert isinstance(model, Kriging)


def test_propose_infill_stays_in_bounds(rng):
    X = rng.uniform(-1, 1, size=(20, 2))
    y = np.array([quadratic(x) for x in X])
    model = fit_surrogate(X, y, random_state=0)
    lower, upper = -np.ones(2), np.ones(2)
    for seed in range(5):
        x = propose_infill(model, lower, upper, stream(seed), existing=X)
        assert (x >= lower).all() and (x <= upper).all()


def test_propose_infill_avoids_duplicates(rng):
    X = rng.uniform(-1, 1, size=(15, 2))
    y = np.array([quadratic(x) for x in X])
    model = fit_surrogate(X, y, random_state=0)
    lower, upper = -np.ones(2), np.ones(2)
    first = propose_infill(model, lower, upper, stream(3), existing=X)
    blocked = np.vstack([X, first])
    second = propose_infill(model, lower, upper, stream(3), existing=blocked)
    assert np.max(np.abs(second - first)) > 1e-9 * 2.0
    assert (second >= lower).all() and (second <= upper).all()


def test_optimize_improves_on_design(tmp_path):
    res = optimize(quadratic, budget=30, seed=2,
                   bounds=(-np.ones(3), np.ones(3)), design_size=10)
    assert res.n_evaluations == 30
    design_best = min(r.epsilon for r in res.records[:10])
    assert res.best_epsilon < design_best
    assert res.best_epsilon < 0.05
    np.testing.assert_allclose(res.best_values,
                               res.records[int(np.argmin([r.epsilon for r in res.records]))].values)


def test_optimize_validates_budget():
    bounds = (-np.ones(2), np.ones(2))
    with pytest.raises(ParameterError, match="budget"):
        optimize(quadratic, budget=5, seed=0, bounds=bounds, design_size=10)
    with pytest.raises(ParameterError, match="design_size"):
        optimize(quadratic, budget=5, seed=0, bounds=bounds, design_size=1)
    with pytest.raises(ParameterError, match="bounds"):
        optimize(quadratic, budget=5, seed=0)
    with pytest.raises(ParameterError, match="objective"):
        optimize(42, budget=5, seed=0, bounds=bounds)


def test_optimize_is_deterministic():
    bounds = (-np.ones(2), np.ones(2))
    a = optimize(quadratic, budget=18, seed=13, bounds=bounds, design_size=8)
    b = optimize(quadratic, budget=18, seed=13, bounds=bounds, design_size=8)
    np.testing.assert_array_equal(
        np.vstack([r.values for r in a.records]),
        np.vstack([r.values for r in b.records]),
    )
    assert a.best_epsilon == b.best_epsilon


def test_checkpoint_resume_matches_uninterrupted(tmp_path):
    bounds = (-np.ones(2), np.ones(2))
    full_ck = tmp_path / "full.json"
    full = optimize(quadratic, budget=22, seed=5, bounds=bounds,
                    design_size=8, checkpoint_path=full_ck)

    part_ck = tmp_path / "part.json"
    optimize(quadratic, budget=14, seed=5, bounds=bounds,
             design_size=8, checkpoint_path=part_ck)
    resumed = optimize(quadratic, budget=22, seed=5, bounds=bounds,
                       design_size=8, checkpoint_path=part_ck, resume=True)

    assert len(resumed.records) == len(full.records) == 22
    np.testing.assert_array_equal(
        np.vstack([r.values for r in resumed.records]),
        np.vstack([r.values for r in full.records]),
    )
    np.testing.assert_array_equal(
        [r.epsilon for r in resumed.records], [r.epsilon for r in full.records]
    )


def test_checkpoint_contents(tmp_path):
    ck = tmp_path / "ck.json"
    optimize(quadratic, budget=12, seed=3, bounds=(-np.ones(2), np.ones(2)),
             design_size=8, checkpoint_path=ck)
    data = load_checkpoint(ck)
    assert data["seed"] == 3
    assert data["design_size"] == 8
    assert len(data["records"]) == 12
    assert data["surrogate_theta"] is not None
    rec = data["records"][0]
    assert set(rec) == {"values", "epsilon", "rmse", "replications", "wall_time", "seed"}


def test_resume_rejects_mismatches(tmp_path):
    bounds = (-np.ones(2), np.ones(2))
    ck = tmp_path / "ck.json"
    optimize(quadratic, budget=10, seed=3, bounds=bounds, design_size=8,
             checkpoint_path=ck)
    with pytest.raises(StructuralError, match="seed"):
        optimize(quadratic, budget=12, seed=4, bounds=bounds, design_size=8,
                 checkpoint_path=ck, resume=True)
    with pytest.raises(StructuralError, match="bounds"):
        optimize(quadratic, budget=12, seed=3, bounds=(-2 * np.ones(2), np.ones(2)),
                 checkpoint_path=ck, resume=True)
    with pytest.raises(ParameterError, match="checkpoint"):
        optimize(quadratic, budget=12, seed=3, bounds=bounds, resume=True)


def test_resume_can_extend_budget(tmp_path):
    bounds = (-np.ones(2), np.ones(2))
    ck = tmp_path / "ck.json"
    optimize(quadratic, budget=12, seed=3, bounds=bounds, design_size=8,
             checkpoint_path=ck)
    extended = optimize(quadratic, budget=16, seed=3, bounds=bounds,
                        checkpoint_path=ck, resume=True)
    assert extended.n_evaluations == 16


def test_random_search_baseline():
    bounds = (-np.ones(4), np.ones(4))
    res = random_search(quadratic, budget=25, seed=9, bounds=bounds)
    assert res.n_evaluations == 25
    again = random_search(quadratic, budget=25, seed=9, bounds=bounds)
    assert res.best_epsilon == again.best_epsilon
    for rec in res.records:
        assert (rec.values >= bounds[0]).all() and (rec.values <= bounds[1]).all()
    with pytest.raises(ParameterError, match="budget"):
        random_search(quadratic, budget=0, seed=1, bounds=bounds)


def test_callback_sees_every_evaluation():
    seen = []
    optimize(quadratic, budget=14, seed=1, bounds=(-np.ones(2), np.ones(2)),
             design_size=8, callback=lambda i, rec: seen.append((i, rec.epsilon)))
    assert [i for i, _ in seen] == list(range(1, 15))
