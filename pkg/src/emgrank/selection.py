"""Stratified 3-fold cross-validation, weighted-F1 scoring, and grid search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields

import numpy as np
from joblib import Parallel, delayed

from . import tree
from .errors import ConfigError, ValidationError
from .seeding import spawn_seed

GRID_AXES = (
    "criterion",
    "splitter",
    "max_depth",
    "min_samples_split",
    "min_samples_leaf",
    "max_features",
    "max_leaf_nodes",
    "min_weight_fraction_leaf",
)


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter axes, enumerated lexicographically in the order above."""

    criterion: tuple = ("gini", "entropy", "log_loss")
    splitter: tuple = ("best", "random")
    max_depth: tuple = (None, 10, 20, 30, 50, 100)
    min_samples_split: tuple = (2, 5, 10)
    min_samples_leaf: tuple = (1, 2, 4)
    max_features: tuple = (None, "sqrt", "log2")
    max_leaf_nodes: tuple = (None, 10, 20)
    min_weight_fraction_leaf: tuple = (0.0, 0.1, 0.2)

    def __post_init__(self):
        for f in fields(self):
            vals = getattr(self, f.name)
            if not isinstance(vals, tuple):
                object.__setattr__(self, f.name, tuple(vals))
            if len(getattr(self, f.name)) == 0:
                raise ConfigError(f"grid axis {f.name!r} must list at least one value")

    @property
    def size(self) -> int:
        n = 1
        for axis in GRID_AXES:
            n *= len(getattr(self, axis))
        return n

    def points(self):
        """Yield every grid point as a HyperParams (rng_seed left at 0)."""
        axes = [getattr(self, axis) for axis in GRID_AXES]
        for combo in itertools.product(*axes):
            yield tree.HyperParams(**dict(zip(GRID_AXES, combo)))

    def to_dict(self) -> dict:
        return {axis: list(getattr(self, axis)) for axis in GRID_AXES}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        unknown = set(d) - set(GRID_AXES)
        if unknown:
            raise ConfigError(f"unknown grid axes: {sorted(unknown)}")
        return cls(**{k: tuple(v) for k, v in d.items()})

    @classmethod
    def desk_default(cls) -> "GridSpec":
        """A small grid for desk-scale experiments (16 points)."""
        return cls(
            criterion=("gini", "entropy"),
            splitter=("best", "random"),
            max_depth=(None, 10),
            min_samples_split=(2, 5),
            min_samples_leaf=(1,),
            max_features=(None,),
            max_leaf_nodes=(None,),
            min_weight_fraction_leaf=(0.0,),
        )


@dataclass(frozen=True)
class CvResult:
    hp: tree.HyperParams
    fold_scores: tuple
    mean_score: float
    grid_index: int

    def to_dict(self) -> dict:
        return {
            "hp": self.hp.to_dict(),
            "fold_scores": [float(s) for s in self.fold_scores],
            "mean_score": float(self.mean_score),
            "grid_index": self.grid_index,
        }


def stratified_folds(y, k: int = 3, seed: int = 0) -> list[np.ndarray]:
    """Split indices into k folds with per-class sizes differing by <= 1.

    Per class (ascending label order) the indices are shuffled with the
    seeded RNG and dealt round-robin to the folds.
    """
    y = np.asarray(y)
    if k < 2:
        raise ValidationError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for label in np.unique(y):
        members = np.nonzero(y == label)[0]
        if len(members) < k:
            raise ValidationError(
                f"class {label!r} has {len(members)} members, fewer than k={k}"
            )
        shuffled = rng.permutation(members)
        for j in range(k):
            folds[j].extend(shuffled[j::k].tolist())
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


def f1_weighted(y_true, y_pred) -> float:
    """Per-class F1 averaged with weights = true-class support / n.

    A class with precision + recall = 0 contributes an F1 of 0.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) != len(y_pred):
        raise ValidationError(
            f"length mismatch: {len(y_true)} true labels vs {len(y_pred)} predictions"
        )
    if len(y_true) == 0:
        raise ValidationError("need at least one sample")
    n = len(y_true)
    total = 0.0
    for label in np.unique(y_true):
        support = int(np.count_nonzero(y_true == label))
        tp = int(np.count_nonzero((y_true == label) & (y_pred == label)))
        predicted = int(np.count_nonzero(y_pred == label))
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        total += support * f1
    return total / n


def _evaluate_point(X, y, hp, folds, seed, grid_index) -> CvResult:
    scores = []
    all_idx = np.arange(len(y), dtype=np.intp)
    for fold_index, test_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        train_idx = all_idx[train_mask]
        fit_hp = hp.with_seed(spawn_seed(seed, "fit", grid_index, fold_index))
        try:
            model = tree.fit(X[train_idx], y[train_idx], fit_hp)
        except Exception as exc:
            raise ValidationError(
                f"fit failed at grid point {grid_index} ({hp.to_dict()}): {exc}"
            ) from exc
        scores.append(f1_weighted(y[test_idx], model.predict(X[test_idx])))
    return CvResult(
        hp=hp,
        fold_scores=tuple(scores),
        mean_score=float(np.mean(scores)),
        grid_index=grid_index,
    )


def grid_search(
    X,
    y,
    grid: GridSpec,
    folds: list[np.ndarray],
    seed: int = 0,
    n_jobs: int = 1,
) -> tuple[CvResult, list[CvResult]]:
    """Evaluate every grid point with the given folds; return (best, all).

    Ties in mean score go to the earliest enumeration position, so the
    result is independent of evaluation order and worker count.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    points = list(grid.points())
    if n_jobs == 1:
        results = [
            _evaluate_point(X, y, hp, folds, seed, gi) for gi, hp in enumerate(points)
        ]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_evaluate_point)(X, y, hp, folds, seed, gi)
            for gi, hp in enumerate(points)
        )
    best = results[0]
    for res in results[1:]:
        if res.mean_score > best.mean_score:
            best = res
    return best, results
