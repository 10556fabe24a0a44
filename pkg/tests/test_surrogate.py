import numpy as np
import pytest
from sklearn.base import clone

from wardflow import FitError, Kriging, expected_improvement


def nll_reference(theta, X, y, fixed_nugget=None, jitter=0.0):
    """Concentrated negative log likelihood from first principles.

    Built directly on inv/slogdet rather than Cholesky so that it shares
    no code path with the implementation under test.
    """
    n, d = X.shape
    scales = np.exp(theta[:d])
    eta = fixed_nugget if fixed_nugget is not None else np.exp(theta[d])
    diff = X[:, None, :] - X[None, :, :]
    R = np.exp(-0.5 * ((diff / scales) ** 2).sum(axis=-1))
    K = R + (eta + jitter) * np.eye(n)
    Kinv = np.linalg.inv(K)
    ones = np.ones(n)
    mu = (ones @ Kinv @ y) / (ones @ Kinv @ ones)
    r = y - mu
    sigma2 = (r @ Kinv @ r) / n
    _, logdet = np.linalg.slogdet(K)
    return 0.5 * n * np.log(sigma2) + 0.5 * logdet


def _scaled_training_set(rng, n=15, d=2):
    X = rng.uniform(0, 1, size=(n, d))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2 + 0.05 * rng.normal(size=n)
    ys = (y - y.mean()) / y.std()
    return X, ys


def test_likelihood_matches_reference(rng):
    X, ys = _scaled_training_set(rng)
    model = Kriging()
    model._fixed_nugget = False
    model._jitter = 0.0
    sq = (X[:, None, :] - X[None, :, :]) ** 2
    for _ in range(10):
        theta = rng.uniform(np.log(0.05), np.log(5.0), size=3)
        got, _ = model._neg_log_likelihood(theta, sq, ys)
        want = nll_reference(theta, X, ys)
        assert got == pytest.approx(want, rel=1e-9)


def test_likelihood_matches_reference_fixed_nugget(rng):
    X, ys = _scaled_training_set(rng)
    model = Kriging(nugget=1e-6)
    model._fixed_nugget = True
    model._jitter = 0.0
    sq = (X[:, None, :] - X[None, :, :]) ** 2
    theta = np.array([np.log(0.4), np.log(1.2)])
    got, _ = model._neg_log_likelihood(theta, sq, ys)
    want = nll_reference(theta, X, ys, fixed_nugget=1e-6)
    assert got == pytest.approx(want, rel=1e-9)


def test_likelihood_gradient_matches_finite_differences(rng):
    X, ys = _scaled_training_set(rng)
    model = Kriging()
    model._fixed_nugget = False
    model._jitter = 0.0
    sq = (X[:, None, :] - X[None, :, :]) ** 2
    theta = np.array([np.log(0.3), np.log(0.8), np.log(1e-3)])
    _, grad = model._neg_log_likelihood(theta, sq, ys)
    h = 1e-6
    for j in range(theta.size):
        up = theta.copy()
        up[j] += h
        down = theta.copy()
        down[j] -= h
        fd = (model._neg_log_likelihood(up, sq, ys)[0]
              - model._neg_log_likelihood(down, sq, ys)[0]) / (2 * h)
        assert grad[j] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_zero_nugget_interpolates(rng):
    X = rng.uniform(-2, 2, size=(20, 2))
    y = np.sin(X[:, 0]) + 0.3 * np.cos(2 * X[:, 1])
    model = Kriging(nugget=0.0, random_state=1).fit(X, y)
    pred = model.predict(X)
    rel = np.abs(pred - y) / np.maximum(np.abs(y), 1e-12)
    assert rel.max() < 1e-6


def test_predictions_track_a_smooth_function(rng):
    X = np.linspace(0, 1, 25)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    model = Kriging(nugget=0.0, random_state=0).fit(X, y)
    probe = rng.uniform(0.05, 0.95, size=(40, 1))
    pred = model.predict(probe)
    assert np.max(np.abs(pred - np.sin(2 * np.pi * probe[:, 0]))) < 1e-3


def test_predictive_std_zero_at_training_points(rng):
    X = rng.uniform(0, 1, size=(12, 2))
    y = X[:, 0] + X[:, 1] ** 2
    model = Kriging(nugget=0.0, random_state=0).fit(X, y)
    _, std_train = model.predict(X, return_std=True)
    assert std_train.max() < 1e-5
    _, std_away = model.predict(np.full((1, 2), 0.5), return_std=True)
    # a gap point keeps residual uncertainty unless it collides with data
    assert std_away[0] >= 0.0


def test_expected_improvement_matches_monte_carlo(rng):
    best = 1.0
    cases = [(0.5, 0.4), (1.2, 0.3), (2.0, 0.1), (0.9, 1.5)]
    draws = rng.normal(size=500_000)
    for mean, std in cases:
        samples = mean + std * draws
        mc = np.maximum(best - samples, 0.0).mean()
        ei = expected_improvement(np.array([mean]), np.array([std]), best)[0]
        assert ei == pytest.approx(mc, rel=0.02, abs=1e-4)


def test_expected_improvement_edge_cases():
    ei = expected_improvement(np.array([0.5, 3.0]), np.array([0.0, 0.0]), 1.0)
    assert (ei == 0.0).all()
    ei = expected_improvement(np.array([-50.0]), np.array([1e-6]), 0.0)
    assert ei[0] == pytest.approx(50.0, rel=1e-6)
    assert (expected_improvement(np.linspace(-3, 3, 10), np.full(10, 0.5), 0.0) >= 0).all()


def test_estimated_nugget_absorbs_noise(rng):
    X = rng.uniform(0, 1, size=(60, 1))
    y = np.sin(2 * np.pi * X[:, 0]) + 0.2 * rng.normal(size=60)
    model = Kriging(random_state=3).fit(X, y)
    assert model.nugget_ > 1e-6
    probe = np.linspace(0.1, 0.9, 30)[:, None]
    pred = model.predict(probe)
    rmse = np.sqrt(np.mean((pred - np.sin(2 * np.pi * probe[:, 0])) ** 2))
    assert rmse < 0.2


def test_fit_rejects_degenerate_inputs(rng):
    with pytest.raises(FitError, match="at least 2"):
        Kriging().fit(np.zeros((1, 2)), np.zeros(1))
    X = np.tile(rng.uniform(size=(1, 3)), (5, 1))
    with pytest.raises(FitError, match="identical"):
        Kriging().fit(X, rng.normal(size=5))


def test_zero_nugget_rejects_duplicate_rows(rng):
    X = rng.uniform(size=(6, 2))
    X[3] = X[0]
    y = rng.normal(size=6)
    with pytest.raises(FitError, match="duplicate"):
        Kriging(nugget=0.0).fit(X, y)
    # an estimated nugget copes with replicated observations
    Kriging(random_state=0).fit(X, y)


def test_warm_start_refit(rng):
    X = rng.uniform(size=(15, 2))
    y = np.sin(4 * X[:, 0]) + X[:, 1]
    model = Kriging(warm_start=True, random_state=0).fit(X, y)
    first_theta = model._theta.copy()
    X2 = np.vstack([X, rng.uniform(size=(1, 2))])
    y2 = np.append(y, np.sin(4 * X2[-1, 0]) + X2[-1, 1])
    model.fit(X2, y2, n_restarts=0)
    assert np.isfinite(model.log_likelihood_)
    assert model._theta.shape == first_theta.shape
    assert len(model.y_train_) == 16


def test_fitted_attributes(rng):
    X = rng.uniform(2, 8, size=(18, 3))
    y = X[:, 0] * 2 + np.sin(X[:, 1])
    model = Kriging(random_state=1).fit(X, y)
    assert model.length_scales_.shape == (3,)
    assert (model.length_scales_ > 0).all()
    assert model.process_variance_ > 0
    assert np.isfinite(model.mean_)
    assert np.isfinite(model.log_likelihood_)
    assert model.n_features_in_ == 3


def test_sklearn_protocol(rng):
    model = Kriging(nugget=1e-8, n_restarts=3)
    params = model.get_params()
    assert params["nugget"] == 1e-8
    assert params["n_restarts"] == 3
    cloned = clone(model)
    assert cloned.get_params() == params
    X = rng.uniform(size=(10, 2))
    y = X.sum(axis=1)
    cloned.fit(X, y)
    assert cloned.score(X, y) > 0.99
