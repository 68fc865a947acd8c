"""Random survival forest with log-rank splitting and Nelson-Aalen leaves."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import FitError, ValidationError


def nelson_aalen(times, status):
    """Nelson-Aalen cumulative hazard ``sum d_j / n_j`` at the distinct event times."""
    times = np.asarray(times, dtype=float)
    status = np.asarray(status, dtype=int)
    ev = np.unique(times[status == 1])
    if ev.size == 0:
        return ev, np.zeros(0)
    n_risk = np.sum(times[None, :] >= ev[:, None], axis=1)
    d = np.sum((times[None, :] == ev[:, None]) & (status[None, :] == 1), axis=1)
    return ev, np.cumsum(d / n_risk)


def logrank_split(times, status, x, threshold):
    """Absolute standardized two-sample log-rank statistic for ``x <= threshold``.

    Returns None when either side is empty (the split is not admissible) and
    0.0 when the variance vanishes.
    """
    times = np.asarray(times, dtype=float)
    status = np.asarray(status, dtype=int)
    left = np.asarray(x, dtype=float) <= threshold
    if left.all() or not left.any():
        return None
    num = 0.0
    var = 0.0
    for t in np.unique(times[status == 1]):
        at_risk = times >= t
        n = at_risk.sum()
        d = np.sum(at_risk & (times == t) & (status == 1))
        n1 = np.sum(at_risk & left)
        d1 = np.sum(at_risk & left & (times == t) & (status == 1))
        num += d1 - n1 * d / n
        if n > 1:
            var += (n1 / n) * (1 - n1 / n) * d * (n - d) / (n - 1)
    if var <= 0:
        return 0.0
    return float(abs(num) / math.sqrt(var))


TIE_TOL = 1e-12


@njit(cache=True)
def _best_split(X, rows, times, status, cand):
    """Best ``(statistic, feature, threshold)`` over candidate features.

    One sweep per feature over the rows sorted by that feature, keeping the
    left group's at-risk and event counts per distinct event time. Ties go to
    the first feature in ``cand`` and then the lowest threshold, treating
    statistics within ``TIE_TOL`` (relative) as equal. Returns
    feature -1 when no cut has a positive statistic.
    """
    n = rows.shape[0]
    ts = times[rows]
    ds = status[rows]
    ev = np.unique(ts[ds == 1])
    K = ev.shape[0]
    # row r is at risk at ev[0 .. n_at[r]-1]; it fails at ev[ev_idx[r]]
    n_at = np.searchsorted(ev, ts, side="right")
    ev_idx = np.full(n, -1)
    for r in range(n):
        if ds[r] == 1:
            ev_idx[r] = n_at[r] - 1
    N = np.zeros(K)
    D = np.zeros(K)
    for r in range(n):
        for k in range(n_at[r]):
            N[k] += 1.0
        if ev_idx[r] >= 0:
            D[ev_idx[r]] += 1.0
    W = np.zeros(K)
    for k in range(K):
        if N[k] > 1.0:
            W[k] = D[k] * (N[k] - D[k]) / (N[k] - 1.0)
    best_stat = 0.0
    best_f = -1
    best_thr = 0.0
    N1 = np.empty(K)
    D1 = np.empty(K)
    for f in cand:
        xs = X[rows, f]
        order = np.argsort(xs, kind="mergesort")
        N1[:] = 0.0
        D1[:] = 0.0
        for s in range(n - 1):
            r = order[s]
            for k in range(n_at[r]):
                N1[k] += 1.0
            if ev_idx[r] >= 0:
                D1[ev_idx[r]] += 1.0
            lo = xs[r]
            hi = xs[order[s + 1]]
            if not lo < hi:
                continue
            num = 0.0
            var = 0.0
            for k in range(K):
                frac = N1[k] / N[k]
                num += D1[k] - frac * D[k]
                var += frac * (1.0 - frac) * W[k]
            if var > 0.0:
                stat = abs(num) / np.sqrt(var)
                # a later candidate must win by more than rounding noise
                if stat > best_stat + TIE_TOL * max(1.0, best_stat):
                    best_stat = stat
                    best_f = f
                    best_thr = 0.5 * (lo + hi)
    return best_stat, best_f, best_thr


@dataclass(frozen=True)
class SurvivalTree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf; ``leaf[i]`` indexes
    ``leaf_times`` / ``leaf_chf``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf: np.ndarray
    leaf_times: tuple
    leaf_chf: tuple

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.leaf[node]

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_times)

    def leaf_chf_on(self, grid) -> np.ndarray:
        """Leaf CHFs evaluated on ``grid``; shape (n_leaves, len(grid))."""
        out = np.zeros((self.n_leaves, len(grid)))
        for k, (t, h) in enumerate(zip(self.leaf_times, self.leaf_chf)):
            if len(t):
                pos = np.searchsorted(t, grid, side="right")
                out[k] = np.concatenate([[0.0], h])[pos]
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf": self.leaf.tolist(),
            "leaf_times": [list(map(float, t)) for t in self.leaf_times],
            "leaf_chf": [list(map(float, h)) for h in self.leaf_chf],
        }

    @classmethod
    def from_dict(cls, d) -> "SurvivalTree":
        return cls(
            np.asarray(d["feature"], dtype=int),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=int),
            np.asarray(d["right"], dtype=int),
            np.asarray(d["leaf"], dtype=int),
            tuple(np.asarray(t, dtype=float) for t in d["leaf_times"]),
            tuple(np.asarray(h, dtype=float) for h in d["leaf_chf"]),
        )


def grow_tree(X, times, status, rng, mtry, min_node_events=3, max_depth=None) -> SurvivalTree:
    """Grow one tree on the given (already resampled) rows."""
    n, p = X.shape
    feature, threshold, left, right, leaf = [], [], [], [], []
    leaf_times, leaf_chf = [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf.append(-1)
        return len(feature) - 1

    def make_leaf(node, rows):
        t, h = nelson_aalen(times[rows], status[rows])
        leaf[node] = len(leaf_times)
        leaf_times.append(t)
        leaf_chf.append(h)

    stack = [(new_node(), np.arange(n), 0)]
    while stack:
        node, rows, depth = stack.pop()
        ds = status[rows]
        if ds.sum() < min_node_events or (max_depth is not None and depth >= max_depth):
            make_leaf(node, rows)
            continue
        cand = np.sort(rng.choice(p, size=mtry, replace=False))
        best = _best_split(X, rows, times, status, cand)
        if best[1] < 0:
            make_leaf(node, rows)
            continue
        _, f, thr = best
        go_left = X[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is numbered first
        stack.append((rnode, rows[~go_left], depth + 1))
        stack.append((lnode, rows[go_left], depth + 1))
    return SurvivalTree(
        np.asarray(feature, dtype=int),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=int),
        np.asarray(right, dtype=int),
        np.asarray(leaf, dtype=int),
        tuple(leaf_times),
        tuple(leaf_chf),
    )


@dataclass
class RSFConfig:
    n_trees: int = 200
    mtry: int | None = None  # default ceil(sqrt(p))
    min_node_events: int = 3
    max_depth: int | None = None
    seed: int = 0


@dataclass(frozen=True)
class RSFModel:
    trees: tuple
    event_grid: np.ndarray
    seed: int
    mtry: int
    min_node_events: int
    max_depth: int | None
    feature_names: tuple

    def __post_init__(self):
        object.__setattr__(self, "_leaf_grid", tuple(t.leaf_chf_on(self.event_grid) for t in self.trees))

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def to_dict(self) -> dict:
        return {
            "model": "rsf",
            "version": 1,
            "config": {
                "n_trees": len(self.trees),
                "mtry": self.mtry,
                "min_node_events": self.min_node_events,
                "max_depth": self.max_depth,
                "seed": self.seed,
            },
            "event_grid": [float(t) for t in self.event_grid],
            "features": list(self.feature_names),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d) -> "RSFModel":
        c = d["config"]
        return cls(
            tuple(SurvivalTree.from_dict(t) for t in d["trees"]),
            np.asarray(d["event_grid"], dtype=float),
            int(c["seed"]),
            int(c["mtry"]),
            int(c["min_node_events"]),
            c["max_depth"],
            tuple(d["features"]),
        )


def fit_rsf(train, config: RSFConfig | None = None, **kwargs) -> RSFModel:
    """Bootstrap forest of log-rank survival trees.

    Tree ``b`` draws its bootstrap sample and feature subsets from the
    ``b``-th child of ``SeedSequence(seed)``, so the forest does not depend on
    the order trees are grown in.
    """
    cfg = config or RSFConfig(**kwargs)
    X = train.covariates()
    times, status = train.times, train.status
    if status.sum() == 0:
        raise FitError("no events")
    if cfg.n_trees < 1:
        raise ValidationError("n_trees must be >= 1")
    n, p = X.shape
    mtry = cfg.mtry if cfg.mtry is not None else max(1, math.ceil(math.sqrt(p)))
    if not 1 <= mtry <= p:
        raise ValidationError(f"mtry must be in [1, {p}], got {mtry}")
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)
    trees = []
    for ss in children:
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[idx], times[idx], status[idx], rng, mtry,
                               cfg.min_node_events, cfg.max_depth))
    grid = np.unique(times[status == 1])
    return RSFModel(tuple(trees), grid, cfg.seed, mtry, cfg.min_node_events, cfg.max_depth,
                    tuple(train.feature_names))


def predict_chf_matrix(model: RSFModel, X) -> np.ndarray:
    """Ensemble cumulative hazard on ``model.event_grid``; shape (n, grid)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValidationError(f"expected {model.n_features} covariates, got {X.shape[1]}")
    total = np.zeros((len(X), len(model.event_grid)))
    for tree, leaf_grid in zip(model.trees, model._leaf_grid):
        total += leaf_grid[tree.apply(X)]
    return total / len(model.trees)


def predict_chf(model: RSFModel, x):
    """``(event_grid, H(t|x))`` for one covariate vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("x must be a single covariate vector")
    return model.event_grid, predict_chf_matrix(model, x[None, :])[0]


def risk_scores_rsf(model: RSFModel, X) -> np.ndarray:
    return predict_chf_matrix(model, X).sum(axis=1)


def risk_score_rsf(model: RSFModel, x) -> float:
    """Mortality: the predicted CHF summed over the event grid."""
    return float(predict_chf(model, x)[1].sum())
