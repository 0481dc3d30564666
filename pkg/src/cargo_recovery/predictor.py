"""Cost-sensitive classification tree that flags connections likely to become short.

The tree is grown with Gini impurity. The cost of a missed positive (IR, the
imbalance ratio) against a false alarm (1) enters only through leaf labels
and through minimal cost-complexity pruning, whose complexity parameter is
chosen by stratified K-fold cross-validation.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

FEATURES = ("h1_min", "h1_sd", "h2_min", "h2_max", "h2_mean", "h2_sd")
CSV_HEADER = ("connection_id",) + FEATURES + ("label",)
FORMAT_TAG = "cargo-recovery-tree v1"


class EmptyLog(Exception):
    pass


class MissingFeature(KeyError):
    pass


class ModelMissing(Exception):
    pass


@dataclass(frozen=True)
class ConnectionSample:
    connection_id: str
    h1_min: float
    h1_sd: float
    h2_min: float
    h2_max: float
    h2_mean: float
    h2_sd: float
    label: int

    def vector(self) -> list[float]:
        return [getattr(self, name) for name in FEATURES]


# --- features ------------------------------------------------------------------


def aggregate(h1: Sequence[float], h2: Sequence[float]) -> dict[str, float]:
    a1 = np.asarray(h1, dtype=float)
    a2 = np.asarray(h2, dtype=float)
    return {
        "h1_min": float(a1.min()),
        "h1_sd": float(a1.std()),
        "h2_min": float(a2.min()),
        "h2_max": float(a2.max()),
        "h2_mean": float(a2.mean()),
        "h2_sd": float(a2.std()),
    }


def samples_from_observations(rows: Iterable[Mapping], tag: str = "") -> list[ConnectionSample]:
    """Turn per-iteration connection observations into one sample per connection.

    ``rows`` carry ``iteration``, ``connection_id``, ``h1``, ``h2`` and
    ``selected``. A connection that is ever selected is a positive, described
    only by the iterations before its first selection; one selected straight
    away has nothing to describe it and is dropped.
    """
    by_con: dict[str, list[tuple[int, float, float, bool]]] = {}
    for r in rows:
        by_con.setdefault(str(r["connection_id"]), []).append(
            (int(r["iteration"]), float(r["h1"]), float(r["h2"]), _truthy(r["selected"]))
        )
    out = []
    for con in sorted(by_con):
        obs = sorted(by_con[con])
        first = next((it for it, _, _, sel in obs if sel), None)
        if first is not None:
            obs = [o for o in obs if o[0] < first]
            if not obs:
                continue
        feats = aggregate([o[1] for o in obs], [o[2] for o in obs])
        out.append(ConnectionSample(tag + con, label=int(first is not None), **feats))
    return out


def _truthy(v) -> bool:
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes")
    return bool(v)


def extract_features(logs) -> list[ConnectionSample]:
    """Samples from one or more iteration logs (objects or ``*_connections.csv`` paths)."""
    if not isinstance(logs, (list, tuple)):
        logs = [logs]
    out = []
    for k, item in enumerate(logs):
        if isinstance(item, (str, Path)):
            with open(item, newline="", encoding="utf-8") as fh:
                rows = list(csv.DictReader(fh))
        else:
            rows = item.connection_rows()
        tag = f"{k}:" if len(logs) > 1 else ""
        out.extend(samples_from_observations(rows, tag))
    if not out:
        raise EmptyLog("no connection observations in the given logs")
    return out


def imbalance_ratio(n_samples: int, n_positive: int) -> float:
    """Negatives per positive, rounded to two decimals."""
    if n_positive <= 0:
        raise ValueError("need at least one positive sample")
    return round((n_samples - n_positive) / n_positive, 2)


def write_samples(samples: Sequence[ConnectionSample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in samples:
            w.writerow([s.connection_id] + [repr(float(v)) for v in s.vector()] + [s.label])


def read_samples(path) -> list[ConnectionSample]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        ConnectionSample(r["connection_id"], *(float(r[name]) for name in FEATURES), int(r["label"]))
        for r in rows
    ]


def as_arrays(samples: Sequence[ConnectionSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([s.vector() for s in samples], dtype=float).reshape(len(samples), len(FEATURES))
    y = np.array([s.label for s in samples], dtype=np.int64)
    return x, y


# --- tree ----------------------------------------------------------------------


def leaf_class(n0: float, n1: float, ir: float) -> int:
    """Cheaper label for a leaf: calling it 1 costs n0, calling it 0 costs ir * n1. Ties go to 1."""
    return 1 if n0 <= ir * n1 else 0


def leaf_cost(n0: float, n1: float, ir: float) -> float:
    return min(n0, ir * n1)


@dataclass
class _Grown:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[tuple[int, int]] = field(default_factory=list)

    def add(self, n0, n1) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append((int(n0), int(n1)))
        return len(self.counts) - 1


def grow_tree(x: np.ndarray, y: np.ndarray, min_leaf: int = 5) -> _Grown:
    """Full Gini tree; a node splits while some split lowers impurity and leaves >= min_leaf."""
    split = kernels.active().gini_split
    tree = _Grown()
    root = tree.add((y == 0).sum(), (y == 1).sum())
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        n0, n1 = tree.counts[node]
        if n0 == 0 or n1 == 0 or len(idx) < 2 * min_leaf:
            continue
        n = len(idx)
        p = n1 / n
        parent = 2.0 * p * (1.0 - p)
        best = (parent - 1e-12, -1, -1, None)
        for feat in range(x.shape[1]):
            order = idx[np.argsort(x[idx, feat], kind="mergesort")]
            xs = np.ascontiguousarray(x[order, feat])
            ys = np.ascontiguousarray(y[order].astype(np.float64))
            impurity, k = split(xs, ys, min_leaf)
            if k > 0 and impurity < best[0]:
                best = (impurity, feat, k, (order, xs))
        if best[1] < 0:
            continue
        _, feat, k, (order, xs) = best
        thr = 0.5 * (xs[k - 1] + xs[k])
        left_idx, right_idx = order[:k], order[k:]
        yl, yr = y[left_idx], y[right_idx]
        tree.feature[node] = feat
        tree.threshold[node] = float(thr)
        tree.left[node] = tree.add((yl == 0).sum(), (yl == 1).sum())
        tree.right[node] = tree.add((yr == 0).sum(), (yr == 1).sum())
        stack.append((tree.right[node], right_idx))
        stack.append((tree.left[node], left_idx))
    return tree


def _subtree_stats(tree: _Grown, collapsed: set[int], ir: float):
    """Per node: cost of its pruned branch and its leaf count, as raw sample costs."""
    cost, leaves = {}, {}

    def visit(node):
        n0, n1 = tree.counts[node]
        if tree.left[node] < 0 or node in collapsed:
            cost[node], leaves[node] = leaf_cost(n0, n1, ir), 1
            return
        visit(tree.left[node])
        visit(tree.right[node])
        cost[node] = cost[tree.left[node]] + cost[tree.right[node]]
        leaves[node] = leaves[tree.left[node]] + leaves[tree.right[node]]

    visit(0)
    return cost, leaves


def _internal(tree: _Grown, collapsed: set[int]) -> list[int]:
    out, stack = [], [0]
    while stack:
        node = stack.pop()
        if tree.left[node] < 0 or node in collapsed:
            continue
        out.append(node)
        stack.extend((tree.left[node], tree.right[node]))
    return out


def pruning_sequence(tree: _Grown, ir: float) -> list[tuple[float, frozenset[int]]]:
    """Weakest-link pruning: (cp, collapsed internal nodes) from the full tree down to the root.

    Costs are normalised by the training-set size so cp is on the scale of
    misclassification cost per sample.
    """
    total = sum(tree.counts[0])
    collapsed: set[int] = set()
    cost, leaves = _subtree_stats(tree, collapsed, ir)
    for node in _internal(tree, collapsed):
        n0, n1 = tree.counts[node]
        if leaf_cost(n0, n1, ir) <= cost[node] + 1e-12:
            collapsed.add(node)
    seq = [(0.0, frozenset(collapsed))]
    while True:
        cost, leaves = _subtree_stats(tree, collapsed, ir)
        nodes = _internal(tree, collapsed)
        if not nodes:
            break
        g = {}
        for node in nodes:
            n0, n1 = tree.counts[node]
            g[node] = (leaf_cost(n0, n1, ir) - cost[node]) / total / (leaves[node] - 1)
        weakest = min(g.values())
        for node in nodes:
            if g[node] <= weakest + 1e-15:
                collapsed.add(node)
        seq.append((max(weakest, seq[-1][0]), frozenset(collapsed)))
    return seq


@dataclass
class TreeModel:
    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    counts: list[tuple[int, int]]
    ir: float
    cp: float = 0.0
    sequence: list[tuple[float, int]] = field(default_factory=list)

    def leaf_of(self, vec) -> int:
        node = 0
        while self.left[node] >= 0:
            node = self.left[node] if vec[self.feature[node]] <= self.threshold[node] else self.right[node]
        return node

    def classes(self) -> dict[int, int]:
        return {n: leaf_class(*self.counts[n], self.ir) for n in self.leaves()}

    def leaves(self) -> list[int]:
        return [n for n in range(len(self.counts)) if self.left[n] < 0]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def predict_vector(self, vec) -> int:
        n0, n1 = self.counts[self.leaf_of(vec)]
        return leaf_class(n0, n1, self.ir)

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.predict_vector(row) for row in x], dtype=np.int64)


def _extract(tree: _Grown, collapsed: Iterable[int], ir: float, cp: float) -> TreeModel:
    """Copy of the tree with ``collapsed`` nodes turned into leaves, renumbered depth-first."""
    collapsed = set(collapsed)
    model = TreeModel([], [], [], [], [], ir, cp)

    def copy(node) -> int:
        k = len(model.counts)
        model.feature.append(-1)
        model.threshold.append(0.0)
        model.left.append(-1)
        model.right.append(-1)
        model.counts.append(tree.counts[node])
        if tree.left[node] >= 0 and node not in collapsed:
            model.feature[k] = tree.feature[node]
            model.threshold[k] = tree.threshold[node]
            model.left[k] = copy(tree.left[node])
            model.right[k] = copy(tree.right[node])
        return k

    copy(0)
    return model


def prune_at(tree: _Grown, seq, cp: float, ir: float) -> TreeModel:
    """Subtree of the sequence for complexity parameter ``cp``."""
    chosen = seq[0]
    for item in seq:
        if item[0] <= cp:
            chosen = item
    return _extract(tree, chosen[1], ir, cp)


def misclassification_cost(y: np.ndarray, pred: np.ndarray, ir: float) -> float:
    if len(y) == 0:
        return 0.0
    fn = np.sum((y == 1) & (pred == 0))
    fp = np.sum((y == 0) & (pred == 1))
    return float(ir * fn + fp) / len(y)


def _cp_candidates(seq) -> list[float]:
    """One cp per subtree: the geometric mean of its interval ends (the midpoint when it starts at 0)."""
    cps = [c for c, _ in seq]
    out = []
    for c, nxt in zip(cps, cps[1:]):
        out.append(math.sqrt(c * nxt) if c > 0 else 0.5 * nxt)
    out.append(cps[-1])
    return out


def constant_model(label: int, n0: int, n1: int, ir: float) -> TreeModel:
    counts = (n0, n1)
    model = TreeModel([-1], [0.0], [-1], [-1], [counts], ir, math.inf)
    if leaf_class(n0, n1, ir) != label:
        # keep the requested label even when the counts disagree
        model.counts = [(0, 1) if label else (1, 0)]
    return model


def train(samples: Sequence[ConnectionSample], k_folds: int = 10, min_leaf: int = 5, seed: int = 0,
          ir: float | None = None) -> TreeModel:
    from sklearn.model_selection import StratifiedKFold

    if k_folds < 2:
        raise ValueError("k_folds must be at least 2")
    x, y = as_arrays(samples)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        log.warning("training data holds a single class; returning a constant classifier")
        return constant_model(int(n_pos > 0), n_neg, n_pos, ir if ir is not None else 1.0)
    if ir is None:
        ir = imbalance_ratio(len(y), n_pos)
    full = grow_tree(x, y, min_leaf)
    seq = pruning_sequence(full, ir)
    candidates = _cp_candidates(seq)
    folds = min(k_folds, n_pos, n_neg)
    if folds < 2:
        best_cp = seq[0][0]
    else:
        skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
        errors = np.zeros(len(candidates))
        for train_idx, test_idx in skf.split(x, y):
            tree_k = grow_tree(x[train_idx], y[train_idx], min_leaf)
            seq_k = pruning_sequence(tree_k, ir)
            for c, cp in enumerate(candidates):
                model_k = prune_at(tree_k, seq_k, cp, ir)
                errors[c] += misclassification_cost(y[test_idx], model_k.predict_many(x[test_idx]), ir)
        errors /= folds
        # smallest error; among equals, the most pruned tree
        best = min(range(len(candidates)), key=lambda c: (round(errors[c], 12), -c))
        best_cp = candidates[best]
    model = prune_at(full, seq, best_cp, ir)
    model.sequence = [(cp, _extract(full, col, ir, cp).n_leaves) for cp, col in seq]
    return model


def nested_sequence(samples: Sequence[ConnectionSample], min_leaf: int = 5, ir: float | None = None):
    """Full tree and its pruning sequence, for inspecting the pruning path."""
    x, y = as_arrays(samples)
    if ir is None:
        ir = imbalance_ratio(len(y), int(y.sum()))
    full = grow_tree(x, y, min_leaf)
    return full, pruning_sequence(full, ir), ir


def predict(model: TreeModel, features: Mapping[str, float]) -> int:
    missing = [name for name in FEATURES if name not in features]
    if missing:
        raise MissingFeature(", ".join(missing))
    return model.predict_vector([float(features[name]) for name in FEATURES])


def evaluate(model: TreeModel, samples: Sequence[ConnectionSample]) -> dict[str, float]:
    if not samples:
        raise ValueError("empty test set")
    x, y = as_arrays(samples)
    pred = model.predict_many(x)
    tp = int(np.sum((y == 1) & (pred == 1)))
    fn = int(np.sum((y == 1) & (pred == 0)))
    return {
        "misclassification_cost": misclassification_cost(y, pred, model.ir),
        "sensitivity": tp / (tp + fn) if tp + fn else 1.0,
        "n_samples": len(y),
        "n_positive": int(y.sum()),
    }


def split_samples(samples: Sequence[ConnectionSample], test_size: float = 0.2, seed: int = 0):
    """Stratified train/test split."""
    from sklearn.model_selection import train_test_split

    labels = [s.label for s in samples]
    strat = labels if 0 < sum(labels) < len(labels) else None
    train_s, test_s = train_test_split(list(samples), test_size=test_size, random_state=seed, stratify=strat)
    return train_s, test_s


def planted_samples(n: int, noise: float = 0.05, seed: int = 0) -> list[ConnectionSample]:
    """Synthetic corpus whose label is positive iff h1_min < 0 and h2_max > 0, with flipped labels."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        h1_min = float(rng.integers(-150, 100))
        h1_sd = float(rng.uniform(0, 60))
        h2_max = float(rng.integers(1, 20)) if rng.random() < 0.9 else 0.0
        h2_min = float(rng.uniform(0, h2_max)) if h2_max else 0.0
        h2_mean = 0.5 * (h2_min + h2_max)
        h2_sd = 0.5 * (h2_max - h2_min)
        label = int(h1_min < 0 and h2_max > 0)
        if rng.random() < noise:
            label = 1 - label
        out.append(ConnectionSample(f"c{k:05d}", h1_min, h1_sd, h2_min, h2_max, h2_mean, h2_sd, label))
    return out


# --- persistence ------------------------------------------------------------------


def dumps_model(model: TreeModel) -> str:
    lines = [FORMAT_TAG, f"ir {model.ir!r}", f"cp {model.cp!r}", "features " + " ".join(FEATURES)]
    lines.append("sequence " + " ".join(f"{cp!r}:{n}" for cp, n in model.sequence))
    for k in range(len(model.counts)):
        n0, n1 = model.counts[k]
        if model.left[k] < 0:
            lines.append(f"node {k} leaf {leaf_class(n0, n1, model.ir)} {n0} {n1}")
        else:
            lines.append(
                f"node {k} split {model.feature[k]} {model.threshold[k]!r} {model.left[k]} {model.right[k]} {n0} {n1}"
            )
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> TreeModel:
    lines = text.strip().splitlines()
    if not lines or lines[0].strip() != FORMAT_TAG:
        raise ValueError("not a tree model file (or an unsupported version)")
    ir = cp = None
    sequence = []
    nodes = {}
    for line in lines[1:]:
        parts = line.split()
        if parts[0] == "ir":
            ir = float(parts[1])
        elif parts[0] == "cp":
            cp = float(parts[1])
        elif parts[0] == "features":
            if tuple(parts[1:]) != FEATURES:
                raise ValueError("feature list differs from this version")
        elif parts[0] == "sequence":
            for item in parts[1:]:
                a, b = item.rsplit(":", 1)
                sequence.append((float(a), int(b)))
        elif parts[0] == "node":
            nodes[int(parts[1])] = parts[2:]
    model = TreeModel([], [], [], [], [], ir, cp, sequence)
    for k in range(len(nodes)):
        p = nodes[k]
        if p[0] == "leaf":
            model.feature.append(-1)
            model.threshold.append(0.0)
            model.left.append(-1)
            model.right.append(-1)
            model.counts.append((int(p[2]), int(p[3])))
        else:
            model.feature.append(int(p[1]))
            model.threshold.append(float(p[2]))
            model.left.append(int(p[3]))
            model.right.append(int(p[4]))
            model.counts.append((int(p[5]), int(p[6])))
    return model


def save_model(model: TreeModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path) -> TreeModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
