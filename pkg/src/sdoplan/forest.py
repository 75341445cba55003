"""Decision trees and random forests built from scratch on numpy.

Used to predict, from a bound vector alone, whether its model solves and
what coverage / conformity / beam-on time the solution would score.
Classification trees split on Gini impurity, regression trees on variance
reduction; forests bootstrap rows and subsample features per tree.  All
randomness flows from one seed through per-tree spawned generators, so a
model is reproducible bit-for-bit regardless of scheduling.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyData, ShapeMismatch, TooFewRows

FOREST_FORMAT = "sdo-forest/1"


@dataclass(frozen=True)
class ForestHyper:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    feature_subsample: int | None = None  # per tree; default ceil(sqrt(p))
    row_subsample: float = 1.0            # bootstrap fraction, with replacement


def _check_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("need a nonempty (rows, features) matrix")
    if y.shape != (X.shape[0],):
        raise ShapeMismatch("labels do not align with rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y.astype(float)))):
        raise ValueError("non-finite training value")
    return X, y


def _best_split(X, y, features, mode, min_leaf):
    """Exhaustive midpoint split search over the given features.

    Returns (score, feature, threshold) with score = +inf when no split is
    admissible.  Ties resolve by (score, feature index, threshold), which
    makes tree construction independent of row order.
    """
    n = X.shape[0]
    best = (np.inf, -1, np.nan)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        cut = np.flatnonzero(xs[1:] != xs[:-1]) + 1  # left part sizes
        if cut.size == 0:
            continue
        ok = (cut >= min_leaf) & (n - cut >= min_leaf)
        cut = cut[ok]
        if cut.size == 0:
            continue
        left_n = cut.astype(float)
        right_n = n - left_n
        if mode == "regress":
            ysf = ys.astype(float)
            csum = np.cumsum(ysf)
            csq = np.cumsum(ysf * ysf)
            lsum = csum[cut - 1]
            lsq = csq[cut - 1]
            rsum = csum[-1] - lsum
            rsq = csq[-1] - lsq
            score = (lsq - lsum * lsum / left_n) + \
                    (rsq - rsum * rsum / right_n)
        else:
            onehot = (ys[:, None] == np.arange(ys.max() + 1)[None, :])
            counts = np.cumsum(onehot, axis=0).astype(float)
            lcounts = counts[cut - 1]
            rcounts = counts[-1] - lcounts
            score = (left_n - (lcounts ** 2).sum(axis=1) / left_n) + \
                    (right_n - (rcounts ** 2).sum(axis=1) / right_n)
        k = int(np.argmin(score))
        thr = 0.5 * (xs[cut[k] - 1] + xs[cut[k]])
        cand = (float(score[k]), int(f), float(thr))
        if cand < best:
            best = cand
    return best


class DecisionTree:
    """Binary tree in flat arrays; leaves carry feature index -1."""

    def __init__(self, mode):
        if mode not in ("classify", "regress"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _new_node(self):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _leaf_value(self, y):
        if self.mode == "regress":
            return float(y.mean())
        counts = np.bincount(y)
        return int(np.argmax(counts))  # ties go to the smallest label

    def fit(self, X, y, features=None, max_depth=None, min_leaf=1):
        X, y = _check_data(X, y)
        if self.mode == "classify":
            y = y.astype(int)
        features = (np.arange(X.shape[1]) if features is None
                    else np.sort(np.asarray(features, dtype=int)))
        self._grow(X, y, features, 0,
                   np.inf if max_depth is None else max_depth, min_leaf)
        return self

    def _grow(self, X, y, features, depth, max_depth, min_leaf):
        node = self._new_node()
        homogeneous = bool(np.all(y == y[0]))
        if homogeneous or depth >= max_depth or X.shape[0] < 2 * min_leaf:
            self.value[node] = self._leaf_value(y)
            return node
        score, f, thr = _best_split(X, y, features, self.mode, min_leaf)
        if f < 0:
            self.value[node] = self._leaf_value(y)
            return node
        mask = X[:, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(X[mask], y[mask], features,
                                     depth + 1, max_depth, min_leaf)
        self.right[node] = self._grow(X[~mask], y[~mask], features,
                                      depth + 1, max_depth, min_leaf)
        return node

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = (self.left[node] if row[self.feature[node]]
                        <= self.threshold[node] else self.right[node])
            out[i] = self.value[node]
        return out if self.mode == "regress" else out.astype(int)


def train_tree(X, y, hyper: ForestHyper = ForestHyper(),
               mode: str = "classify") -> DecisionTree:
    """Single deterministic tree on the full data, no sampling."""
    return DecisionTree(mode).fit(X, y, max_depth=hyper.max_depth,
                                  min_leaf=hyper.min_leaf)


@dataclass
class ForestModel:
    trees: list
    mode: str
    seed: int
    hyper: ForestHyper
    n_features: int = 0
    labels: np.ndarray | None = None  # classification label universe

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.trees and X.shape[1] != self.n_features:
            raise ShapeMismatch(
                f"expected {self.n_features} features, got {X.shape[1]}")
        votes = np.stack([t.predict(X) for t in self.trees])
        if self.mode == "regress":
            return votes.mean(axis=0)
        # majority vote; ties go to the smallest label (the conservative
        # side when 0 encodes "infeasible")
        out = np.empty(X.shape[0], dtype=int)
        for i in range(X.shape[0]):
            counts = np.bincount(votes[:, i].astype(int))
            out[i] = int(np.argmax(counts))
        return out

    def predict_one(self, eps):
        return self.predict(np.asarray(eps, dtype=float)[None, :])[0]


def train_forest(X, y, hyper: ForestHyper = ForestHyper(), seed: int = 0,
                 mode: str = "classify") -> ForestModel:
    """Bootstrap-aggregated trees; deterministic for a fixed seed."""
    X, y = _check_data(X, y)
    if hyper.n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    n, p = X.shape
    fs = hyper.feature_subsample
    if fs is None:
        fs = int(np.ceil(np.sqrt(p)))
    fs = min(max(1, fs), p)
    trees = []
    sample_n = max(1, int(round(hyper.row_subsample * n)))
    for seq in np.random.SeedSequence(seed).spawn(hyper.n_trees):
        rng = np.random.default_rng(seq)
        rows = rng.integers(0, n, size=sample_n)  # bootstrap
        feats = np.sort(rng.choice(p, size=fs, replace=False))
        tree = DecisionTree(mode).fit(X[rows], y[rows], features=feats,
                                      max_depth=hyper.max_depth,
                                      min_leaf=hyper.min_leaf)
        trees.append(tree)
    return ForestModel(trees=trees, mode=mode, seed=seed, hyper=hyper,
                       n_features=p,
                       labels=np.unique(y) if mode == "classify" else None)


def cross_validate(X, y, hyper: ForestHyper = ForestHyper(), k: int = 5,
                   reps: int = 10, seed: int = 0,
                   mode: str = "classify") -> dict:
    """Repeated k-fold score: mean accuracy (classify) or MAE (regress)."""
    X, y = _check_data(X, y)
    n = X.shape[0]
    if k < 2:
        raise ValueError("need at least two folds")
    if n < k:
        raise TooFewRows(f"{n} rows cannot fill {k} folds")
    scores = []
    seqs = np.random.SeedSequence(seed).spawn(reps)
    for rep, seq in enumerate(seqs):
        rng = np.random.default_rng(seq)
        order = rng.permutation(n)
        folds = np.array_split(order, k)
        for fold in folds:
            mask = np.ones(n, dtype=bool)
            mask[fold] = False
            model = train_forest(X[mask], y[mask], hyper,
                                 seed=seed + 7919 * rep, mode=mode)
            pred = model.predict(X[fold])
            if mode == "classify":
                scores.append(float(np.mean(pred == y[fold])))
            else:
                scores.append(float(np.mean(np.abs(pred - y[fold]))))
    key = "accuracy" if mode == "classify" else "mae"
    return {key: float(np.mean(scores)), "folds": k, "reps": reps}


# --- persistence -------------------------------------------------------------


def save_forest(model: ForestModel, path) -> None:
    doc = {
        "format": FOREST_FORMAT,
        "mode": model.mode,
        "seed": model.seed,
        "hyper": asdict(model.hyper),
        "n_features": model.n_features,
        "labels": None if model.labels is None else model.labels.tolist(),
        "trees": [{"feature": t.feature, "threshold": t.threshold,
                   "left": t.left, "right": t.right, "value": t.value}
                  for t in model.trees],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_forest(path) -> ForestModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != FOREST_FORMAT:
        raise ValueError(f"format: expected {FOREST_FORMAT!r}, "
                         f"got {doc.get('format')!r}")
    trees = []
    for tdoc in doc["trees"]:
        tree = DecisionTree(doc["mode"])
        tree.feature = list(tdoc["feature"])
        tree.threshold = list(tdoc["threshold"])
        tree.left = list(tdoc["left"])
        tree.right = list(tdoc["right"])
        tree.value = list(tdoc["value"])
        trees.append(tree)
    return ForestModel(trees=trees, mode=doc["mode"], seed=doc["seed"],
                       hyper=ForestHyper(**doc["hyper"]),
                       n_features=doc["n_features"],
                       labels=(None if doc["labels"] is None
                               else np.asarray(doc["labels"])))
