"""Binary classifiers: regularized logistic regression and a random forest.

Both are deliberately dependency-free so that fits are bit-reproducible from
the derived RNG streams. The logistic model is a Newton solver on the
L2-penalized log-likelihood over standardized features; the forest grows
CART trees on bootstrapped rows with a random feature subset per split.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SingularFit


@dataclass(frozen=True)
class LogisticConfig:
    l2: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 1000


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    min_leaf: int = 2


@dataclass
class Scaler:
    """Column standardization fitted on training data only."""

    means: np.ndarray
    sds: np.ndarray
    kept: np.ndarray  # indices of non-constant columns

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        means = X.mean(axis=0)
        sds = X.std(axis=0, ddof=0)
        kept = np.flatnonzero(sds > 0)
        return cls(means=means[kept], sds=sds[kept], kept=kept)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X[:, self.kept] - self.means) / self.sds


def _require_two_per_class(y: np.ndarray) -> None:
    positives = int(np.sum(y == 1.0))
    if positives < 2 or len(y) - positives < 2:
        raise SingularFit("training needs at least 2 rows per class")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LogisticModel:
    weights: np.ndarray  # over scaled kept columns
    intercept: float
    scaler: Scaler
    n_features: int
    converged: bool = True

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Xs = self.scaler.transform(np.asarray(X, dtype=float))
        return _sigmoid(Xs @ self.weights + self.intercept)

    def coefficients_original_scale(self) -> tuple[np.ndarray, float]:
        """Weights and intercept mapped back to unscaled feature units.

        Dropped (constant) columns get coefficient zero.
        """
        coef = np.zeros(self.n_features)
        coef[self.scaler.kept] = self.weights / self.scaler.sds
        intercept = self.intercept - float(np.sum(self.weights * self.scaler.means / self.scaler.sds))
        return coef, intercept


def _penalized_nll(Xs, y, w, b, l2):
    z = Xs @ w + b
    # log(1 + exp(-|z|)) formulation avoids overflow
    nll = float(np.sum(np.logaddexp(0.0, z) - y * z))
    return nll + 0.5 * l2 * float(w @ w)


def train_logistic(
    X: np.ndarray, y: np.ndarray, config: LogisticConfig = LogisticConfig()
) -> LogisticModel:
    """Newton fit of the L2-penalized logistic likelihood.

    Constant feature columns are dropped with a warning before fitting;
    training fails only when no informative column remains. Convergence is
    declared when every gradient component is below ``config.tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D and aligned with y")
    _require_two_per_class(y)
    scaler = Scaler.fit(X)
    if len(scaler.kept) == 0:
        raise SingularFit("all feature columns are constant")
    if len(scaler.kept) < X.shape[1]:
        dropped = sorted(set(range(X.shape[1])) - set(scaler.kept.tolist()))
        warnings.warn(f"dropping constant feature columns {dropped}", stacklevel=2)
    Xs = scaler.transform(X)
    n, p = Xs.shape

    w = np.zeros(p)
    b = 0.0
    converged = False
    loss = _penalized_nll(Xs, y, w, b, config.l2)
    for _ in range(config.max_iter):
        prob = _sigmoid(Xs @ w + b)
        grad_w = Xs.T @ (prob - y) + config.l2 * w
        grad_b = float(np.sum(prob - y))
        if max(np.max(np.abs(grad_w)), abs(grad_b)) < config.tol:
            converged = True
            break
        weight = prob * (1.0 - prob)
        Xw = Xs * weight[:, None]
        H = np.empty((p + 1, p + 1))
        H[:p, :p] = Xs.T @ Xw + config.l2 * np.eye(p)
        H[:p, p] = Xw.sum(axis=0)
        H[p, :p] = H[:p, p]
        H[p, p] = float(weight.sum()) + config.l2
        grad = np.concatenate([grad_w, [grad_b]])
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(50):
            w_new = w - scale * step[:p]
            b_new = b - scale * step[p]
            loss_new = _penalized_nll(Xs, y, w_new, b_new, config.l2)
            if loss_new <= loss + 1e-12:
                break
            scale *= 0.5
        w, b, loss = w_new, b_new, loss_new
    return LogisticModel(weights=w, intercept=float(b), scaler=scaler,
                         n_features=X.shape[1], converged=converged)


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    prob: np.ndarray

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            f = self.feature[node]
            if f < 0:
                out[idx] = self.prob[node]
                continue
            mask = X[idx, f] <= self.threshold[node]
            stack.append((self.left[node], idx[mask]))
            stack.append((self.right[node], idx[~mask]))
        return out


def _best_split(Xf: np.ndarray, y: np.ndarray, min_leaf: int) -> Optional[tuple[float, float]]:
    """Best (impurity, threshold) Gini split of one feature, or None."""
    order = np.argsort(Xf, kind="mergesort")
    xs = Xf[order]
    ys = y[order]
    m = len(ys)
    pos_left = np.cumsum(ys)[:-1]
    n_left = np.arange(1, m)
    valid = (xs[1:] != xs[:-1]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
    if not np.any(valid):
        return None
    n_right = m - n_left
    pos_right = pos_left[-1] + ys[-1] - pos_left
    with np.errstate(invalid="ignore"):
        gini_left = 2.0 * pos_left * (n_left - pos_left) / n_left
        gini_right = 2.0 * pos_right * (n_right - pos_right) / n_right
    impurity = (gini_left + gini_right) / m
    impurity[~valid] = np.inf
    best = int(np.argmin(impurity))
    if not np.isfinite(impurity[best]):
        return None
    threshold = 0.5 * (xs[best] + xs[best + 1])
    return float(impurity[best]), threshold


def _grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, config: ForestConfig) -> _Tree:
    n, p = X.shape
    n_candidates = max(1, int(math.sqrt(p)))
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    prob: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        prob.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n))]
    while stack:
        node, idx = stack.pop()
        ys = y[idx]
        pos = float(ys.sum())
        prob[node] = pos / len(ys)
        if pos == 0 or pos == len(ys) or len(ys) < 2 * config.min_leaf:
            continue
        parent_gini = 2.0 * prob[node] * (1.0 - prob[node])
        candidates = rng.choice(p, size=n_candidates, replace=False)
        best = None
        for f in candidates:
            split = _best_split(X[idx, f], ys, config.min_leaf)
            if split is None:
                continue
            if best is None or split[0] < best[1]:
                best = (int(f), split[0], split[1])
        if best is None or best[1] >= parent_gini - 1e-15:
            continue
        f, _, thr = best
        mask = X[idx, f] <= thr
        # adjacent float values can collapse the midpoint onto one side
        if not mask.any() or mask.all():
            continue
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((left[node], idx[mask]))
        stack.append((right[node], idx[~mask]))
    return _Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        prob=np.array(prob, dtype=float),
    )


@dataclass
class ForestModel:
    trees: list[_Tree] = field(default_factory=list)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    config: ForestConfig = ForestConfig(),
) -> ForestModel:
    """Random forest of Gini CART trees on bootstrapped rows.

    Each tree draws a row bootstrap and examines sqrt(p) features per split;
    nodes split until pure or below twice the minimum leaf size.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _require_two_per_class(y)
    n = len(X)
    model = ForestModel()
    for _ in range(config.n_trees):
        rows = rng.integers(0, n, size=n)
        model.trees.append(_grow_tree(X[rows], y[rows], rng, config))
    return model
