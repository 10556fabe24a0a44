"""Which parameters drive the objective: regression, tree, and contour views.

Three complementary analyses run over a log of objective evaluations.
Backward-elimination least squares keeps only statistically significant
linear effects and reports a classical coefficient table. A small
variance-reduction regression tree captures non-additive structure. A
two-variable grid export supports contour plots around an anchor point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import linalg as sla
from scipy import stats
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import AnalysisError, ParameterError
from .scenario import ParameterRegistry, ParameterVector

#: residual sum of squares below this fraction of total is treated as exact fit
_EXACT_FIT_RATIO = 1e-20


def _default_names(d: int) -> list[str]:
    return [f"x_{j}" for j in range(1, d + 1)]


def _check_rank(X: np.ndarray, names: list[str]) -> None:
    """Refuse collinear designs, naming the offending columns."""
    _, R, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank < X.shape[1]:
        dependent = sorted(names[j] for j in piv[rank:])
        raise AnalysisError(
            f"design matrix is rank deficient; linearly dependent column(s): {dependent}"
        )


def _ols(X: np.ndarray, y: np.ndarray):
    """Coefficients, standard errors, t statistics and p values with intercept.

    When the model fits the data exactly the usual t statistics are
    undefined; coefficients whose standardized magnitude is non-negligible
    then get p = 0 and the rest p = 1, which lets elimination proceed.
    """
    n, k = X.shape
    Xd = np.column_stack([np.ones(n), X])
    coef, _, _, _ = np.linalg.lstsq(Xd, y, rcond=None)
    resid = y - Xd @ coef
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    df = n - (k + 1)
    XtX_inv = np.linalg.inv(Xd.T @ Xd)

    if rss <= _EXACT_FIT_RATIO * max(tss, 1.0):
        scale = np.concatenate([[1.0], X.std(axis=0)])
        y_sd = max(float(y.std()), 1.0)
        effect = np.abs(coef) * np.where(scale > 0, scale, 1.0)
        p = np.where(effect > 1e-10 * y_sd, 0.0, 1.0)
        se = np.zeros_like(coef)
        t = np.where(p == 0.0, np.inf, 0.0)
    else:
        sigma2 = rss / df
        se = np.sqrt(np.clip(np.diag(XtX_inv) * sigma2, 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(se > 0, coef / se, np.inf * np.sign(coef))
        p = 2.0 * stats.t.sf(np.abs(t), df)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return coef, se, t, p, r2


@dataclass(frozen=True)
class RegressionRow:
    variable: str
    estimate: float
    std_error: float
    t_value: float
    p_value: float


@dataclass(frozen=True)
class RegressionReport:
    """Coefficient table for the selected model plus the elimination trace."""

    rows: tuple[RegressionRow, ...]
    r_squared: float
    eliminated: tuple[tuple[str, float], ...]  # (name, p value when dropped)
    alpha: float

    @property
    def selected(self) -> tuple[str, ...]:
        return tuple(r.variable for r in self.rows if r.variable != "(Intercept)")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "Variable": [r.variable for r in self.rows],
                "Estimate": [r.estimate for r in self.rows],
                "Std. Error": [r.std_error for r in self.rows],
                "t value": [r.t_value for r in self.rows],
                "Pr(>|t|)": [r.p_value for r in self.rows],
            }
        )

    def to_markdown(self) -> str:
        lines = [
            "| Variable | Estimate | Std. Error | t value | Pr(>|t|) |",
            "| --- | --- | --- | --- | --- |",
        ]
        for r in self.rows:
            lines.append(
                f"| {r.variable} | {r.estimate:.6g} | {r.std_error:.6g} "
                f"| {r.t_value:.6g} | {r.p_value:.6g} |"
            )
        lines.append("")
        lines.append(f"R-squared: {self.r_squared:.6g}")
        if self.eliminated:
            dropped = ", ".join(f"{n} (p={p:.3g})" for n, p in self.eliminated)
            lines.append(f"Eliminated at alpha={self.alpha}: {dropped}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        frame = self.to_frame().rename(
            columns={
                "Variable": "variable",
                "Estimate": "estimate",
                "Std. Error": "std_error",
                "t value": "t_value",
                "Pr(>|t|)": "p_value",
            }
        )
        frame.to_csv(path, index=False)


class StepwiseRegression(RegressorMixin, BaseEstimator):
    """Ordinary least squares with backward elimination of weak terms.

    Starting from the full linear model, the term with the largest p value
    above ``alpha`` is dropped and the model refit until every remaining
    term is significant. The intercept is never eliminated.
    """

    def __init__(self, alpha: float = 0.05):
        self.alpha = alpha

    def fit(self, X, y, feature_names=None):
        X, y = check_X_y(X, y, y_numeric=True)
        n, d = X.shape
        if not 0.0 < self.alpha < 1.0:
            raise AnalysisError(f"alpha must lie in (0, 1), got {self.alpha}")
        if n < d + 2:
            raise AnalysisError(
                f"need at least {d + 2} observations for {d} variables, got {n}"
            )
        names = list(feature_names) if feature_names is not None else _default_names(d)
        if len(names) != d:
            raise AnalysisError(f"got {len(names)} names for {d} columns")
        _check_rank(np.column_stack([np.ones(n), X]), ["(Intercept)"] + names)

        active = list(range(d))
        eliminated: list[tuple[str, float]] = []
        while active:
            coef, se, t, p, r2 = _ols(X[:, active], y)
            worst = int(np.argmax(p[1:]))  # skip the intercept
            if p[1 + worst] <= self.alpha:
                break
            eliminated.append((names[active[worst]], float(p[1 + worst])))
            del active[worst]
        if active:
            coef, se, t, p, r2 = _ols(X[:, active], y)
        else:
            coef, se, t, p, r2 = _ols(np.empty((n, 0)), y)

        self.n_features_in_ = d
        self.feature_names_ = names
        self.selected_idx_ = tuple(active)
        self.intercept_ = float(coef[0])
        self.coef_ = coef[1:]
        self.report_ = RegressionReport(
            rows=tuple(
                [RegressionRow("(Intercept)", float(coef[0]), float(se[0]),
                               float(t[0]), float(p[0]))]
                + [
                    RegressionRow(names[j], float(coef[1 + i]), float(se[1 + i]),
                                  float(t[1 + i]), float(p[1 + i]))
                    for i, j in enumerate(active)
                ]
            ),
            r_squared=float(r2),
            eliminated=tuple(eliminated),
            alpha=self.alpha,
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise AnalysisError(
                f"expected {self.n_features_in_} columns, got {X.shape[1]}"
            )
        return self.intercept_ + X[:, list(self.selected_idx_)] @ self.coef_


def stepwise_regression(X, y, feature_names=None, alpha: float = 0.05) -> RegressionReport:
    """Fit-and-report convenience wrapper around StepwiseRegression."""
    model = StepwiseRegression(alpha=alpha)
    model.fit(X, y, feature_names=feature_names)
    return model.report_


# --- regression tree ----------------------------------------------------------


@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature is set) or leaf (feature is None)."""

    value: float
    n_samples: int
    feature: int | None = None
    name: str | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def _best_split(X: np.ndarray, y: np.ndarray, min_leaf: int):
    """Exhaustive scan: the (feature, threshold) cutting SSE the most.

    Ties break toward the lowest feature index, then the lowest threshold,
    so refits on identical data give identical trees.
    """
    n, d = X.shape
    total_sum = y.sum()
    total_sq = float(y @ y)
    best = None  # (gain, feature, threshold)
    for j in range(d):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys**2)
        # candidate cut after position i: left = first i+1 rows
        i = np.arange(n - 1)
        n_left = i + 1
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf) & (xs[:-1] < xs[1:])
        if not valid.any():
            continue
        sse_left = csq[:-1] - csum[:-1] ** 2 / n_left
        right_sum = total_sum - csum[:-1]
        sse_right = (total_sq - csq[:-1]) - right_sum**2 / n_right
        gain = (total_sq - total_sum**2 / n) - (sse_left + sse_right)
        gain[~valid] = -np.inf
        k = int(np.argmax(gain))
        if gain[k] <= 1e-12:
            continue
        threshold = float((xs[k] + xs[k + 1]) / 2.0)
        cand = (float(gain[k]), j, threshold)
        if best is None or cand[0] > best[0] + 1e-12:
            best = cand
    return best


class RegressionTree(RegressorMixin, BaseEstimator):
    """Depth-limited variance-reduction tree for objective landscapes.

    Splits minimize the summed squared error of the two children; leaves
    predict the mean of their samples. Kept deliberately shallow so the
    printout stays readable as a sensitivity summary.
    """

    def __init__(self, max_depth: int = 4, min_leaf: int = 20):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y, feature_names=None):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.max_depth < 1:
            raise AnalysisError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_leaf < 1:
            raise AnalysisError(f"min_leaf must be >= 1, got {self.min_leaf}")
        n, d = X.shape
        if n < 2 * self.min_leaf:
            raise AnalysisError(
                f"need at least {2 * self.min_leaf} rows to place a single split, got {n}"
            )
        names = list(feature_names) if feature_names is not None else _default_names(d)
        if len(names) != d:
            raise AnalysisError(f"got {len(names)} names for {d} columns")
        self.feature_names_ = names
        self.n_features_in_ = d
        self.tree_ = self._grow(X, y, depth=0)
        return self

    def _grow(self, X: np.ndarray, y: np.ndarray, depth: int) -> TreeNode:
        node_value = float(y.mean())
        n = y.size
        if depth >= self.max_depth or n < 2 * self.min_leaf or np.ptp(y) == 0.0:
            return TreeNode(value=node_value, n_samples=n)
        found = _best_split(X, y, self.min_leaf)
        if found is None:
            return TreeNode(value=node_value, n_samples=n)
        _, j, threshold = found
        mask = X[:, j] <= threshold
        return TreeNode(
            value=node_value,
            n_samples=n,
            feature=j,
            name=self.feature_names_[j],
            threshold=threshold,
            left=self._grow(X[mask], y[mask], depth + 1),
            right=self._grow(X[~mask], y[~mask], depth + 1),
        )

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X)
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = self.tree_
            while not node.is_leaf:
                node = node.left if row[node.feature] <= node.threshold else node.right
            out[i] = node.value
        return out

    def used_features(self) -> tuple[str, ...]:
        """Names of every feature appearing in some split, sorted."""
        check_is_fitted(self, "tree_")
        seen: set[str] = set()

        def walk(node: TreeNode):
            if node.is_leaf:
                return
            seen.add(node.name)
            walk(node.left)
            walk(node.right)

        walk(self.tree_)
        return tuple(sorted(seen))


def fit_tree(X, y, feature_names=None, max_depth: int = 4, min_leaf: int = 20) -> RegressionTree:
    return RegressionTree(max_depth=max_depth, min_leaf=min_leaf).fit(
        X, y, feature_names=feature_names
    )


def tree_to_text(node: TreeNode) -> str:
    lines: list[str] = []

    def walk(n: TreeNode, prefix: str):
        if n.is_leaf:
            lines.append(f"{prefix}value={n.value:.6g} [n={n.n_samples}]")
            return
        lines.append(f"{prefix}{n.name} <= {n.threshold:.6g} [n={n.n_samples}]")
        walk(n.left, prefix + "|  ")
        walk(n.right, prefix + "|  ")

    walk(node, "")
    return "\n".join(lines) + "\n"


def tree_to_dot(node: TreeNode) -> str:
    lines = ["digraph regression_tree {", '  node [shape=box, fontname="monospace"];']
    counter = [0]

    def walk(n: TreeNode) -> int:
        idx = counter[0]
        counter[0] += 1
        if n.is_leaf:
            label = f"value = {n.value:.4g}\\nn = {n.n_samples}"
        else:
            label = f"{n.name} <= {n.threshold:.4g}\\nn = {n.n_samples}"
        lines.append(f'  n{idx} [label="{label}"];')
        if not n.is_leaf:
            left = walk(n.left)
            right = walk(n.right)
            lines.append(f'  n{idx} -> n{left} [label="yes"];')
            lines.append(f'  n{idx} -> n{right} [label="no"];')
        return idx

    walk(node)
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- contour export -----------------------------------------------------------


@dataclass(frozen=True)
class ContourGrid:
    """Objective values over a 2-d slice of the parameter box."""

    x_name: str
    y_name: str
    x_values: np.ndarray
    y_values: np.ndarray
    epsilon: np.ndarray  # shape (len(y_values), len(x_values))

    def to_frame(self) -> pd.DataFrame:
        xs, ys, zs = [], [], []
        for iy, yv in enumerate(self.y_values):
            for ix, xv in enumerate(self.x_values):
                xs.append(float(xv))
                ys.append(float(yv))
                zs.append(float(self.epsilon[iy, ix]))
        return pd.DataFrame({"x": xs, "y": ys, "epsilon": zs})

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def contour_grid(
    fn,
    registry: ParameterRegistry,
    var_x: str,
    var_y: str,
    anchor: ParameterVector | None = None,
    grid_size: int = 11,
) -> ContourGrid:
    """Evaluate ``fn`` over a grid in two registry variables.

    Remaining coordinates are frozen at the anchor (registry defaults when
    omitted). ``fn`` maps a full parameter array to a scalar; pass a
    surrogate's prediction for a cheap landscape or the real objective for
    an exact one. A grid size of one degenerates to the interval midpoint.
    """
    if var_x == var_y:
        raise ParameterError("contour variables must differ")
    for var in (var_x, var_y):
        if var not in registry:
            raise ParameterError(f"unknown parameter name {var!r}")
    if grid_size < 1:
        raise ParameterError(f"grid_size must be >= 1, got {grid_size}")
    anchor = registry.defaults() if anchor is None else anchor
    base = np.array(anchor.values)

    def axis(name: str) -> np.ndarray:
        spec = registry.spec(name)
        if grid_size == 1:
            return np.array([(spec.lower + spec.upper) / 2.0])
        return np.linspace(spec.lower, spec.upper, grid_size)

    xs, ys = axis(var_x), axis(var_y)
    ix, iy = registry.index(var_x), registry.index(var_y)
    values = np.empty((ys.size, xs.size))
    for a, yv in enumerate(ys):
        for b, xv in enumerate(xs):
            point = base.copy()
            point[ix] = xv
            point[iy] = yv
            values[a, b] = float(fn(point))
    return ContourGrid(x_name=var_x, y_name=var_y, x_values=xs, y_values=ys, epsilon=values)
