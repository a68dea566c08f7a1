"""Quantile regression forest.

Trees are grown CART-style on bootstrap samples with a variance split rule.
Leaves keep the in-bag training indices (with bootstrap multiplicity) so that
conditional quantiles can be read off the weighted empirical CDF of the
training responses.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .qr import check_tau

# Slack on the cumulative-weight comparison. Weights are float averages over
# trees, so a CDF that is exactly tau in rational arithmetic can land one or
# two ulps below it.
CDF_TOL = 1e-10


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry: int | None = None  # None means floor(sqrt(p))
    min_node_size: int = 5
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be positive")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def resolve_mtry(self, p: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, math.isqrt(p))
        if mtry > p:
            raise ValueError(f"mtry={mtry} exceeds the number of covariates ({p})")
        return mtry


@dataclass(frozen=True)
class RegressionTree:
    """Array-backed binary tree. ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray  # node -> index into ``leaves`` (-1 for internal nodes)
    leaves: tuple  # per leaf: sorted in-bag training indices, repeats kept
    inbag: np.ndarray  # bootstrap draw (or 0..n-1 without bootstrap)
    n_train: int
    # per training row: leaf it was routed to in-bag (-1 if out of bag), and
    # its weight multiplicity / leaf total
    train_leaf: np.ndarray = field(repr=False)
    train_weight: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = self.feature[node]
            active = f >= 0
            if not active.any():
                return self.leaf_id[node]
            na = node[active]
            go_left = X[active, f[active]] <= self.threshold[na]
            node[active] = np.where(go_left, self.left[na], self.right[na])

    def to_dict(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            if self.feature[i] < 0:
                nodes.append({"leaf": self.leaves[self.leaf_id[i]].tolist()})
            else:
                nodes.append({
                    "var": int(self.feature[i]),
                    "threshold": float(self.threshold[i]),
                    "left": int(self.left[i]),
                    "right": int(self.right[i]),
                })
        return {"nodes": nodes, "inbag": self.inbag.tolist()}


def _best_split(Xn: np.ndarray, yn: np.ndarray, features):
    """Return ``(feature, threshold)`` minimising child SSE, or None.

    Minimising the summed within-child SSE is the same as maximising
    ``S_L^2/n_L + S_R^2/n_R``. Ties go to the lower feature index, then the
    lower threshold.
    """
    best = None
    best_score = -np.inf
    m = len(yn)
    total = yn.sum()
    for f in features:
        order = np.argsort(Xn[:, f], kind="stable")
        xs = Xn[order, f]
        ys = yn[order]
        cut = np.nonzero(xs[:-1] < xs[1:])[0]
        if len(cut) == 0:
            continue
        s_left = np.cumsum(ys)[cut]
        n_left = cut + 1.0
        score = s_left**2 / n_left + (total - s_left) ** 2 / (m - n_left)
        k = int(np.argmax(score))
        if score[k] > best_score:
            lo, hi = xs[cut[k]], xs[cut[k] + 1]
            thr = lo + (hi - lo) / 2.0
            if not thr < hi:
                thr = lo
            best_score = score[k]
            best = (int(f), float(thr))
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, cfg: ForestConfig, tree_index: int) -> RegressionTree:
    """Grow one tree on its own RNG stream derived from ``(cfg.seed, tree_index)``."""
    n, p = X.shape
    mtry = cfg.resolve_mtry(p)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(tree_index,))))
    inbag = rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)

    feature, threshold, left, right, leaf_id = [], [], [], [], []
    leaves = []

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        leaf_id.append(-1)
        return len(feature) - 1

    stack = [(new_node(), np.sort(inbag))]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        split = None
        if len(idx) >= 2 * cfg.min_node_size and not np.all(yn == yn[0]):
            features = np.sort(rng.choice(p, size=mtry, replace=False))
            split = _best_split(X[idx], yn, features)
        if split is None:
            leaf_id[node] = len(leaves)
            leaves.append(idx)
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(), new_node()
        # right pushed first so the left subtree is expanded first
        stack.append((right[node], idx[~mask]))
        stack.append((left[node], idx[mask]))

    train_leaf = np.full(n, -1, dtype=np.int64)
    leaf_size = np.array([len(idx) for idx in leaves], dtype=float)
    for j, idx in enumerate(leaves):
        train_leaf[idx] = j
    counts = np.bincount(inbag, minlength=n)
    train_weight = np.where(train_leaf >= 0, counts / leaf_size[train_leaf], 0.0)

    return RegressionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        leaf_id=np.array(leaf_id, dtype=np.int64),
        leaves=tuple(leaves),
        inbag=inbag,
        n_train=n,
        train_leaf=train_leaf,
        train_weight=train_weight,
    )


@dataclass(frozen=True)
class QuantileForest:
    trees: tuple
    X: np.ndarray
    y: np.ndarray
    config: ForestConfig
    _order: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "_order", np.argsort(self.y, kind="stable"))

    def weights(self, X) -> np.ndarray:
        """Weight matrix of shape (m, n): row j is the weight vector for ``X[j]``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.X.shape[1]:
            raise ValueError(f"expected {self.X.shape[1]} covariates, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        W = np.zeros((len(X), len(self.y)))
        for tree in self.trees:
            hit = tree.apply(X)[:, None] == tree.train_leaf[None, :]
            W += hit * tree.train_weight[None, :]
        return W / len(self.trees)

    def predict_quantiles(self, X, taus) -> np.ndarray:
        """Conditional quantiles, shape (m, len(taus)).

        Each entry is ``inf{y : sum_i w_i 1(y_i <= y) >= tau}``.
        """
        taus = [check_tau(t) for t in np.atleast_1d(taus)]
        W = self.weights(X)
        ys = self.y[self._order]
        cdf = np.cumsum(W[:, self._order], axis=1)
        out = np.empty((len(W), len(taus)))
        for j, row in enumerate(cdf):
            k = np.searchsorted(row, np.asarray(taus) - CDF_TOL, side="left")
            out[j] = ys[np.minimum(k, len(ys) - 1)]
        return out

    def dump(self, directory) -> None:
        """Write one JSON document per tree, for debugging."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for t, tree in enumerate(self.trees):
            path = directory / f"tree_{t:04d}.json"
            path.write_text(json.dumps(tree.to_dict()), encoding="utf-8")


def fit_forest(X, y, cfg: ForestConfig = ForestConfig(), n_jobs: int | None = None) -> QuantileForest:
    """Grow a quantile regression forest.

    Tree ``t`` draws from an RNG seeded by ``(cfg.seed, t)``, so the result
    does not depend on ``n_jobs``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if len(y) == 0:
        raise ValueError("cannot fit a forest on empty data")
    if X.shape[0] != len(y):
        raise ValueError("X and y have different numbers of rows")
    if X.shape[1] < 1:
        raise ValueError("at least one covariate is required")
    if len(y) < cfg.min_node_size:
        raise ValueError(f"need at least min_node_size={cfg.min_node_size} rows, got {len(y)}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data must be finite")
    cfg.resolve_mtry(X.shape[1])

    if n_jobs in (None, 1):
        trees = [grow_tree(X, y, cfg, t) for t in range(cfg.n_trees)]
    else:
        trees = Parallel(n_jobs=n_jobs)(delayed(grow_tree)(X, y, cfg, t) for t in range(cfg.n_trees))
    return QuantileForest(trees=tuple(trees), X=X, y=y, config=cfg)


def forest_weights(f: QuantileForest, x) -> np.ndarray:
    return f.weights(np.asarray(x, dtype=float).reshape(1, -1))[0]


def predict_forest_quantile(f: QuantileForest, x, tau: float) -> float:
    return float(f.predict_quantiles(np.asarray(x, dtype=float).reshape(1, -1), [tau])[0, 0])
