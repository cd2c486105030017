"""CART decision-tree classifier with mean-decrease-impurity importances.

Implemented from scratch so every rule is explicit and deterministic:

* candidate thresholds are midpoints between consecutive distinct sorted
  values; samples with x <= threshold go left;
* the `best` splitter maximizes the weighted impurity decrease, ties broken
  by (lower feature index, lower threshold); the `random` splitter draws one
  uniform threshold per sampled feature and keeps the best legal one;
* growth stops on purity, min_samples_split, max_depth, or leaf budget;
  with a finite max_leaf_nodes growth is best-first by weighted decrease
  (frontier ties broken by node creation order);
* `log_loss` is an alias of Shannon entropy (base 2) - they coincide for
  classification impurity;
* prediction ties at a leaf go to the smallest class label.

All impurity arithmetic uses plain float64 numpy ops so that candidates
with identical class-count partitions compare bitwise equal, which keeps
the tie rules meaningful.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError

CRITERIA = ("gini", "entropy", "log_loss")
SPLITTERS = ("best", "random")
MAX_FEATURES_MODES = (None, "sqrt", "log2")

LEAF = -1


@dataclass(frozen=True)
class HyperParams:
    criterion: str = "gini"
    splitter: str = "best"
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_features: str | None = None
    max_leaf_nodes: int | None = None
    min_weight_fraction_leaf: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValidationError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.splitter not in SPLITTERS:
            raise ValidationError(f"splitter must be one of {SPLITTERS}, got {self.splitter!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValidationError("max_depth must be None or >= 1")
        if self.min_samples_split < 2:
            raise ValidationError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")
        if self.max_features not in MAX_FEATURES_MODES:
            raise ValidationError(
                f"max_features must be one of {MAX_FEATURES_MODES}, got {self.max_features!r}"
            )
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise ValidationError("max_leaf_nodes must be None or >= 2")
        if not 0.0 <= self.min_weight_fraction_leaf <= 0.5:
            raise ValidationError("min_weight_fraction_leaf must lie in [0, 0.5]")

    def with_seed(self, rng_seed: int) -> "HyperParams":
        return replace(self, rng_seed=int(rng_seed))

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "splitter": self.splitter,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
            "max_leaf_nodes": self.max_leaf_nodes,
            "min_weight_fraction_leaf": self.min_weight_fraction_leaf,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        return cls(**d)


def impurity(counts, criterion: str = "gini") -> float:
    """Node impurity from a class-count vector.

    gini = 1 - sum(p^2); entropy / log_loss = -sum(p * log2(p)).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size == 0 or np.any(counts < 0):
        raise ValidationError("counts must be a nonnegative, nonempty vector")
    n = counts.sum()
    if n <= 0:
        raise ValidationError("impurity of an empty node is undefined")
    p = counts / n
    if criterion == "gini":
        return float(1.0 - np.sum(p * p))
    if criterion in ("entropy", "log_loss"):
        safe = np.where(p > 0, p, 1.0)
        return float(-np.sum(np.where(p > 0, p * np.log2(safe), 0.0)))
    raise ValidationError(f"unknown criterion {criterion!r}")


def _impurity_rows(counts: np.ndarray, totals: np.ndarray, criterion: str) -> np.ndarray:
    # Row-wise version of `impurity`; identical op structure keeps results
    # bitwise equal to the scalar path for equal count partitions.
    p = counts / totals[:, None]
    if criterion == "gini":
        return 1.0 - np.sum(p * p, axis=1)
    safe = np.where(p > 0, p, 1.0)
    return -np.sum(np.where(p > 0, p * np.log2(safe), 0.0), axis=1)


@dataclass
class Node:
    counts: np.ndarray
    impurity: float
    feature: int = LEAF
    threshold: float = math.nan
    left: int = LEAF
    right: int = LEAF

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())


@dataclass
class TreeModel:
    """A fitted tree: flat node array (index 0 = root) plus importances."""

    nodes: list[Node]
    classes: np.ndarray
    n_features: int
    importances: np.ndarray
    params: HyperParams = field(default_factory=HyperParams)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValidationError(
                f"expected {self.n_features} feature columns, got "
                f"{X.shape[1] if X.ndim == 2 else 'non-2D input'}"
            )
        out = np.empty(len(X), dtype=self.classes.dtype)
        for i, x in enumerate(X):
            node = self.nodes[0]
            while not node.is_leaf:
                node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
            out[i] = self.classes[int(np.argmax(node.counts))]
        return out

    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    def depth(self) -> int:
        def walk(idx: int) -> int:
            node = self.nodes[idx]
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(0)

    def structure(self):
        """Canonical nested-tuple form, for exact tree comparisons."""

        def walk(idx: int):
            node = self.nodes[idx]
            if node.is_leaf:
                return ("leaf", tuple(int(c) for c in node.counts))
            return (
                "split",
                node.feature,
                node.threshold,
                walk(node.left),
                walk(node.right),
            )

        return walk(0)

    def to_dict(self) -> dict:
        return {
            "classes": [int(c) for c in self.classes],
            "n_features": self.n_features,
            "params": self.params.to_dict(),
            "importances": [float(v) for v in self.importances],
            "nodes": [
                {
                    "feature": node.feature,
                    "threshold": None if node.is_leaf else float(node.threshold),
                    "left": node.left,
                    "right": node.right,
                    "counts": [int(c) for c in node.counts],
                    "impurity": float(node.impurity),
                }
                for node in self.nodes
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeModel":
        nodes = [
            Node(
                counts=np.asarray(nd["counts"], dtype=np.float64),
                impurity=float(nd["impurity"]),
                feature=int(nd["feature"]),
                threshold=math.nan if nd["threshold"] is None else float(nd["threshold"]),
                left=int(nd["left"]),
                right=int(nd["right"]),
            )
            for nd in d["nodes"]
        ]
        return cls(
            nodes=nodes,
            classes=np.asarray(d["classes"], dtype=np.int64),
            n_features=int(d["n_features"]),
            importances=np.asarray(d["importances"], dtype=np.float64),
            params=HyperParams.from_dict(d["params"]),
        )


def resolve_max_features(mode: str | None, n_features: int) -> int:
    if mode is None:
        return n_features
    if mode == "sqrt":
        return min(n_features, math.ceil(math.sqrt(n_features)))
    if mode == "log2":
        return min(n_features, max(1, math.floor(math.log2(n_features))))
    raise ValidationError(f"unknown max_features mode {mode!r}")


def _min_leaf_samples(hp: HyperParams, n_total: int) -> int:
    frac = hp.min_weight_fraction_leaf * n_total
    # guard binary-float fuzz around integers (e.g. 0.1 * 90)
    nearest = round(frac)
    from_frac = nearest if abs(frac - nearest) < 1e-9 else math.ceil(frac)
    return max(hp.min_samples_leaf, int(from_frac))


class _Grower:
    def __init__(self, X: np.ndarray, y_idx: np.ndarray, n_classes: int, hp: HyperParams):
        self.X = X
        self.y_idx = y_idx
        self.k = n_classes
        self.hp = hp
        self.n_total = len(y_idx)
        self.d = X.shape[1]
        self.min_leaf = _min_leaf_samples(hp, self.n_total)
        self.max_depth = math.inf if hp.max_depth is None else hp.max_depth
        self.rng = np.random.default_rng(hp.rng_seed)
        self.n_sampled = resolve_max_features(hp.max_features, self.d)
        self.nodes: list[Node] = []

    # -- split search ------------------------------------------------------

    def _counts(self, indices: np.ndarray) -> np.ndarray:
        return np.bincount(self.y_idx[indices], minlength=self.k).astype(np.float64)

    def _candidate_features(self) -> np.ndarray:
        if self.n_sampled >= self.d:
            return np.arange(self.d)
        # ascending order so the lower-feature-index tie rule falls out of
        # the strictly-greater comparison below
        return np.sort(self.rng.choice(self.d, size=self.n_sampled, replace=False))

    def _scan_best(self, col: np.ndarray, y_sub: np.ndarray, n_node: int):
        order = np.argsort(col, kind="stable")
        v = col[order]
        boundaries = np.nonzero(v[1:] != v[:-1])[0]
        if boundaries.size == 0:
            return None
        n_left = boundaries + 1
        legal = (n_left >= self.min_leaf) & ((n_node - n_left) >= self.min_leaf)
        boundaries = boundaries[legal]
        if boundaries.size == 0:
            return None
        onehot = np.zeros((n_node, self.k), dtype=np.float64)
        onehot[np.arange(n_node), y_sub[order]] = 1.0
        cum = np.cumsum(onehot, axis=0)
        left = cum[boundaries]
        right = cum[-1] - left
        n_left = (boundaries + 1).astype(np.float64)
        n_right = n_node - n_left
        child_cost = (n_left / n_node) * _impurity_rows(left, n_left, self.hp.criterion) + (
            n_right / n_node
        ) * _impurity_rows(right, n_right, self.hp.criterion)
        j = int(np.argmin(child_cost))  # first minimum -> lowest threshold
        b = int(boundaries[j])
        threshold = (v[b] + v[b + 1]) / 2.0
        return float(child_cost[j]), threshold

    def _eval_random(self, col: np.ndarray, y_sub: np.ndarray, n_node: int):
        lo = float(col.min())
        hi = float(col.max())
        if lo == hi:
            return None
        threshold = float(self.rng.uniform(lo, hi))
        go_left = col <= threshold
        n_left = int(np.count_nonzero(go_left))
        if n_left < self.min_leaf or (n_node - n_left) < self.min_leaf:
            return None
        left = np.bincount(y_sub[go_left], minlength=self.k).astype(np.float64)
        right = np.bincount(y_sub[~go_left], minlength=self.k).astype(np.float64)
        nl = float(n_left)
        nr = float(n_node - n_left)
        child_cost = (nl / n_node) * impurity(left, self.hp.criterion) + (
            nr / n_node
        ) * impurity(right, self.hp.criterion)
        return child_cost, threshold

    def find_split(self, indices: np.ndarray):
        """Best (feature, threshold, weighted child impurity) or None."""
        n_node = len(indices)
        y_sub = self.y_idx[indices]
        best = None  # (child_cost, feature, threshold)
        for f in self._candidate_features():
            col = self.X[indices, int(f)]
            if self.hp.splitter == "best":
                res = self._scan_best(col, y_sub, n_node)
            else:
                res = self._eval_random(col, y_sub, n_node)
            if res is None:
                continue
            child_cost, threshold = res
            if best is None or child_cost < best[0]:
                best = (child_cost, int(f), threshold)
        return best

    def _splittable(self, counts: np.ndarray, n_node: int, depth: int) -> bool:
        return (
            n_node >= self.hp.min_samples_split
            and n_node >= 2 * self.min_leaf
            and depth < self.max_depth
            and int(np.count_nonzero(counts)) > 1
        )

    # -- growth strategies ---------------------------------------------------

    def grow_depth_first(self, indices: np.ndarray, depth: int = 0) -> int:
        counts = self._counts(indices)
        node_impurity = impurity(counts, self.hp.criterion)
        nid = len(self.nodes)
        self.nodes.append(Node(counts=counts, impurity=node_impurity))
        best = self.find_split(indices) if self._splittable(counts, len(indices), depth) else None
        if best is None:
            return nid
        _, feature, threshold = best
        go_left = self.X[indices, feature] <= threshold
        left_id = self.grow_depth_first(indices[go_left], depth + 1)
        right_id = self.grow_depth_first(indices[~go_left], depth + 1)
        node = self.nodes[nid]
        node.feature, node.threshold = feature, threshold
        node.left, node.right = left_id, right_id
        return nid

    def grow_best_first(self, indices: np.ndarray) -> None:
        budget = self.hp.max_leaf_nodes
        heap: list[tuple[float, int, int, np.ndarray, int, float, int]] = []
        ticket = 0

        def consider(nid: int, node_indices: np.ndarray, depth: int) -> None:
            nonlocal ticket
            node = self.nodes[nid]
            if not self._splittable(node.counts, len(node_indices), depth):
                return
            best = self.find_split(node_indices)
            if best is None:
                return
            child_cost, feature, threshold = best
            n_node = len(node_indices)
            weighted_decrease = (n_node / self.n_total) * (node.impurity - child_cost)
            heapq.heappush(
                heap, (-weighted_decrease, ticket, nid, node_indices, feature, threshold, depth)
            )
            ticket += 1

        counts = self._counts(indices)
        self.nodes.append(Node(counts=counts, impurity=impurity(counts, self.hp.criterion)))
        consider(0, indices, 0)
        n_leaves = 1
        while heap and n_leaves < budget:
            _, _, nid, node_indices, feature, threshold, depth = heapq.heappop(heap)
            go_left = self.X[node_indices, feature] <= threshold
            child_ids = []
            for child_indices in (node_indices[go_left], node_indices[~go_left]):
                child_counts = self._counts(child_indices)
                child_ids.append(len(self.nodes))
                self.nodes.append(
                    Node(counts=child_counts, impurity=impurity(child_counts, self.hp.criterion))
                )
            node = self.nodes[nid]
            node.feature, node.threshold = feature, threshold
            node.left, node.right = child_ids
            n_leaves += 1
            consider(node.left, node_indices[go_left], depth + 1)
            consider(node.right, node_indices[~go_left], depth + 1)


def fit(X, y, hp: HyperParams | None = None) -> TreeModel:
    """Grow a CART tree on (X, y) under the given hyperparameters."""
    hp = hp or HyperParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValidationError("X must be 2-D (samples x features)")
    if len(X) != len(y):
        raise ValidationError(f"X has {len(X)} rows but y has {len(y)} labels")
    if len(y) < 1:
        raise ValidationError("cannot fit on an empty dataset")
    if X.shape[1] < 1:
        raise ValidationError("need at least one feature")

    classes, y_idx = np.unique(y, return_inverse=True)
    grower = _Grower(X, y_idx.astype(np.intp), len(classes), hp)
    all_indices = np.arange(len(y), dtype=np.intp)
    if hp.max_leaf_nodes is None:
        grower.grow_depth_first(all_indices)
    else:
        grower.grow_best_first(all_indices)

    model = TreeModel(
        nodes=grower.nodes,
        classes=classes.astype(np.int64) if classes.dtype.kind in "iu" else classes,
        n_features=X.shape[1],
        importances=np.zeros(X.shape[1]),
        params=hp,
    )
    model.importances = compute_importances(model)
    return model


def compute_importances(model: TreeModel) -> np.ndarray:
    """Mean-decrease-impurity importances, normalized to sum to 1.

    Each split contributes (n_node/n_total) * (imp(node) - weighted child
    impurity) to its feature. A tree with no splits (or only zero-gain
    splits) yields the all-zero vector.
    """
    totals = np.zeros(model.n_features, dtype=np.float64)
    n_total = model.nodes[0].counts.sum()
    for node in model.nodes:
        if node.is_leaf:
            continue
        left = model.nodes[node.left]
        right = model.nodes[node.right]
        n_node = node.counts.sum()
        n_l = left.counts.sum()
        n_r = right.counts.sum()
        decrease = node.impurity - (n_l / n_node) * left.impurity - (n_r / n_node) * right.impurity
        totals[node.feature] += (n_node / n_total) * decrease
    s = totals.sum()
    if s > 0:
        totals = totals / s
    else:
        totals = np.zeros_like(totals)
    return totals
