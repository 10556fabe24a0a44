"""Ordinary-Kriging surrogate with anisotropic squared-exponential kernel.

The model interpolates (or, with a nugget, smooths) scalar observations of
an expensive function. A constant trend and the process variance are
profiled out of the Gaussian likelihood, leaving only per-dimension length
scales and optionally the nugget to optimize; that concentrated likelihood
is maximized with analytic gradients from multiple starting points.

Inputs are rescaled to the unit cube and outputs standardized internally,
so kernel bounds are expressed in scaled units regardless of the original
parameter ranges.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky
from scipy.optimize import minimize
from scipy.stats import norm
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import FitError
from .seeding import stream

_PENALTY = 1e25
_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


def expected_improvement(mean, std, best: float) -> np.ndarray:
    """Closed-form expected improvement below ``best`` for a minimizer."""
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    out = np.zeros_like(mean)
    active = std > 1e-12
    if np.any(active):
        m, s = mean[active], std[active]
        z = (best - m) / s
        out[active] = (best - m) * norm.cdf(z) + s * norm.pdf(z)
    return np.maximum(out, 0.0)


def _sq_diffs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape (n_a, n_b, d)."""
    return (a[:, None, :] - b[None, :, :]) ** 2


class Kriging(RegressorMixin, BaseEstimator):
    """Gaussian-process interpolator with estimated constant trend.

    Parameters
    ----------
    nugget : float or None
        Fixed noise-to-signal variance ratio; None estimates it from data.
    length_scale_bounds : pair of float
        Box for each per-dimension length scale, in unit-cube units.
    nugget_bounds : pair of float
        Box for the estimated nugget (ignored when nugget is fixed).
    n_restarts : int
        Random restarts for the likelihood search on a cold fit.
    warm_start : bool
        Reuse the previous kernel optimum as the first start on refit.
    max_opt_iter : int
        L-BFGS-B iteration cap per start.
    random_state : int or None
        Seed for restart sampling.
    """

    def __init__(
        self,
        nugget: float | None = None,
        length_scale_bounds: tuple[float, float] = (1e-2, 1e2),
        nugget_bounds: tuple[float, float] = (1e-10, 1.0),
        n_restarts: int = 10,
        warm_start: bool = False,
        max_opt_iter: int = 50,
        random_state: int | None = None,
    ):
        self.nugget = nugget
        self.length_scale_bounds = length_scale_bounds
        self.nugget_bounds = nugget_bounds
        self.n_restarts = n_restarts
        self.warm_start = warm_start
        self.max_opt_iter = max_opt_iter
        self.random_state = random_state

    # --- internals ----------------------------------------------------------

    def _correlation(self, sq: np.ndarray, scales: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * (sq / scales**2).sum(axis=-1))

    def _neg_log_likelihood(self, theta: np.ndarray, sq: np.ndarray, y: np.ndarray):
        """Concentrated -log L and its gradient w.r.t. theta = log params."""
        n = y.size
        d = sq.shape[-1]
        scales = np.exp(theta[:d])
        eta = self.nugget if self._fixed_nugget else float(np.exp(theta[d]))
        R = self._correlation(sq, scales)
        K = R + (eta + self._jitter) * np.eye(n)
        try:
            L = cholesky(K, lower=True)
        except LinAlgError:
            return _PENALTY, np.zeros_like(theta)
        Kinv_y = cho_solve((L, True), y)
        Kinv_1 = cho_solve((L, True), np.ones(n))
        mu = float(Kinv_y.sum() / Kinv_1.sum())
        r = y - mu
        alpha = Kinv_y - mu * Kinv_1  # = K^-1 r
        sigma2 = float(r @ alpha) / n
        if sigma2 <= 0.0 or not np.isfinite(sigma2):
            return _PENALTY, np.zeros_like(theta)
        nll = 0.5 * n * np.log(sigma2) + np.log(np.diag(L)).sum()
        if not np.isfinite(nll):
            return _PENALTY, np.zeros_like(theta)

        Kinv = cho_solve((L, True), np.eye(n))
        W = np.outer(alpha, alpha) / sigma2 - Kinv
        grad = np.empty_like(theta)
        for j in range(d):
            dK = R * sq[:, :, j] / scales[j] ** 2
            grad[j] = -0.5 * float((W * dK).sum())
        if not self._fixed_nugget:
            grad[d] = -0.5 * eta * (float(alpha @ alpha) / sigma2 - np.trace(Kinv))
        return float(nll), grad

    def _starts(self, d: int, rng: np.random.Generator, n_starts: int) -> np.ndarray:
        lo = np.log(self.length_scale_bounds[0])
        hi = np.log(self.length_scale_bounds[1])
        nlo, nhi = np.log(self.nugget_bounds[0]), np.log(self.nugget_bounds[1])
        first = np.clip(np.full(d, np.log(0.5)), lo, hi)
        if not self._fixed_nugget:
            first = np.append(first, np.clip(np.log(1e-4), nlo, nhi))
        starts = [first]
        for _ in range(max(n_starts - 1, 0)):
            t = rng.uniform(lo, hi, size=d)
            if not self._fixed_nugget:
                t = np.append(t, rng.uniform(nlo, nhi))
            starts.append(t)
        return np.array(starts)

    def _optimize_kernel(self, sq, y, starts, bounds):
        best_theta, best_nll = None, np.inf
        for start in starts:
            res = minimize(
                self._neg_log_likelihood,
                start,
                args=(sq, y),
                jac=True,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": self.max_opt_iter},
            )
            if res.fun < best_nll:
                best_nll, best_theta = float(res.fun), res.x
        if best_theta is None or best_nll >= _PENALTY:
            raise FitError("kernel likelihood optimization failed from every start")
        return best_theta, best_nll

    # --- estimator API ------------------------------------------------------

    def fit(self, X, y, n_restarts: int | None = None):
        """Fit length scales (and nugget) by maximum likelihood.

        ``n_restarts`` overrides the constructor value for this call only;
        with warm_start it sets how many *extra* random starts accompany
        the carried-over optimum.
        """
        X, y = check_X_y(X, y, y_numeric=True)
        n, d = X.shape
        if n < 2:
            raise FitError(f"need at least 2 observations, got {n}")

        self._fixed_nugget = self.nugget is not None
        if self._fixed_nugget and self.nugget < 0:
            raise FitError(f"nugget must be >= 0, got {self.nugget}")

        self._x_lo = X.min(axis=0)
        span = X.max(axis=0) - self._x_lo
        self._x_span = np.where(span > 0, span, 1.0)
        Xs = (X - self._x_lo) / self._x_span
        if np.unique(Xs, axis=0).shape[0] < 2:
            raise FitError("all training inputs are identical; surrogate is undefined")
        if self._fixed_nugget and self.nugget < 1e-8:
            if np.unique(Xs, axis=0).shape[0] < n:
                raise FitError(
                    "duplicate training inputs with a zero nugget make the "
                    "correlation matrix singular; drop duplicates or set a nugget"
                )

        self._y_mu = float(y.mean())
        sd = float(y.std())
        self._y_sd = sd if sd > 0 else 1.0
        ys = (y - self._y_mu) / self._y_sd

        sq = _sq_diffs(Xs, Xs)
        restarts = self.n_restarts if n_restarts is None else n_restarts
        rng = stream(self.random_state if self.random_state is not None else 0)
        warm = self.warm_start and getattr(self, "_theta", None) is not None \
            and self._theta.size == d + (0 if self._fixed_nugget else 1)
        if warm:
            extra = self._starts(d, rng, restarts + 1)[1:]
            starts = np.vstack([self._theta[None, :], extra]) if len(extra) \
                else self._theta[None, :]
        else:
            starts = self._starts(d, rng, restarts)

        log_lsb = (np.log(self.length_scale_bounds[0]), np.log(self.length_scale_bounds[1]))
        bounds = [log_lsb] * d
        if not self._fixed_nugget:
            bounds.append((np.log(self.nugget_bounds[0]), np.log(self.nugget_bounds[1])))

        last_error = None
        for jitter in _JITTERS:
            self._jitter = jitter
            try:
                theta, nll = self._optimize_kernel(sq, ys, starts, bounds)
                self._finalize(Xs, ys, sq, theta, nll)
                break
            except (FitError, LinAlgError) as exc:
                last_error = exc
        else:
            raise FitError(f"surrogate fit failed at every jitter level: {last_error}")

        self.X_train_ = X
        self.y_train_ = y
        self.n_features_in_ = d
        return self

    def _finalize(self, Xs, ys, sq, theta, nll):
        d = Xs.shape[1]
        scales = np.exp(theta[:d])
        eta = self.nugget if self._fixed_nugget else float(np.exp(theta[d]))
        n = ys.size
        R = self._correlation(sq, scales)
        K = R + (eta + self._jitter) * np.eye(n)
        L = cholesky(K, lower=True)  # succeeded inside the optimizer already
        Kinv_y = cho_solve((L, True), ys)
        Kinv_1 = cho_solve((L, True), np.ones(n))
        one_Kinv_1 = float(Kinv_1.sum())
        mu = float(Kinv_y.sum() / one_Kinv_1)
        alpha = Kinv_y - mu * Kinv_1
        sigma2 = float((ys - mu) @ alpha) / n

        self._theta = theta
        self._Xs = Xs
        self._L = L
        self._alpha = alpha
        self._Kinv_1 = Kinv_1
        self._one_Kinv_1 = one_Kinv_1
        self._mu = mu
        self._sigma2 = max(sigma2, 0.0)
        self._scales = scales

        self.length_scales_ = scales * self._x_span
        self.nugget_ = eta
        self.mean_ = self._y_mu + self._y_sd * mu
        self.process_variance_ = self._sigma2 * self._y_sd**2
        self.log_likelihood_ = -nll

    def predict(self, X, return_std: bool = False):
        check_is_fitted(self, "X_train_")
        X = check_array(X)
        Xs = (X - self._x_lo) / self._x_span
        sq = _sq_diffs(Xs, self._Xs)
        r_star = self._correlation(sq, self._scales)  # (m, n)
        mean = self._mu + r_star @ self._alpha
        mean = self._y_mu + self._y_sd * mean
        if not return_std:
            return mean
        v = cho_solve((self._L, True), r_star.T)  # (n, m)
        quad = np.einsum("mn,nm->m", r_star, v)
        trend = (1.0 - r_star @ self._Kinv_1) ** 2 / self._one_Kinv_1
        var = self._sigma2 * np.maximum(1.0 - quad + trend, 0.0)
        std = self._y_sd * np.sqrt(var)
        return mean, std

    def expected_improvement_at(self, X, best: float) -> np.ndarray:
        mean, std = self.predict(X, return_std=True)
        return expected_improvement(mean, std, best)
