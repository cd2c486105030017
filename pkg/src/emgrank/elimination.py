"""Iterative feature elimination: grid-search a tree, record it, drop the
most important feature, repeat down to a single feature.

Per iteration the winning hyperparameters are refit on the full dataset and
the importances of that refit decide the removal. Removal direction is
configurable (`top` drops the most important feature, `bottom` the least);
ties go to the lower canonical feature index, and a refit with no splits
drops the lowest-index active feature so the loop always terminates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import selection, tree
from .errors import ValidationError
from .seeding import spawn_seed
from .spectral import FeatureTable

REMOVE_DIRECTIONS = ("top", "bottom")


@dataclass(frozen=True)
class ExperimentRecord:
    """One elimination iteration: the trained tree's scores and importances."""

    iteration: int
    feature_names: tuple
    best_hp: tree.HyperParams
    fold_scores: tuple
    mean_f1: float
    importances: dict
    removed_feature: str

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_informative(self) -> int:
        return sum(1 for v in self.importances.values() if v > 0)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "n_features": self.n_features,
            "feature_names": list(self.feature_names),
            "best_hp": self.best_hp.to_dict(),
            "fold_scores": [float(s) for s in self.fold_scores],
            "mean_f1": float(self.mean_f1),
            "importances": {k: float(v) for k, v in self.importances.items()},
            "removed_feature": self.removed_feature,
            "n_informative": self.n_informative,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        return cls(
            iteration=int(d["iteration"]),
            feature_names=tuple(d["feature_names"]),
            best_hp=tree.HyperParams.from_dict(d["best_hp"]),
            fold_scores=tuple(float(s) for s in d["fold_scores"]),
            mean_f1=float(d["mean_f1"]),
            importances={k: float(v) for k, v in d["importances"].items()},
            removed_feature=str(d["removed_feature"]),
        )


@dataclass
class ExperimentRun:
    records: list = field(default_factory=list)
    dataset_fingerprint: str = ""
    config: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def initial_features(self) -> tuple:
        if not self.records:
            return ()
        return self.records[0].feature_names

    def mean_f1_series(self) -> np.ndarray:
        return np.array([r.mean_f1 for r in self.records], dtype=np.float64)


def informative_features(record: ExperimentRecord) -> set:
    """Names with strictly positive importance in the record's refit tree."""
    return {name for name, v in record.importances.items() if v > 0}


def dataset_fingerprint(table: FeatureTable) -> str:
    """sha256 of the table's canonical CSV serialization."""
    payload = table.df.to_csv(index=False, lineterminator="\n").encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def _pick_removal(importances: np.ndarray, remove: str) -> int:
    if not np.any(importances > 0):
        return 0  # no informative split: drop the lowest-index active feature
    if remove == "top":
        return int(np.argmax(importances))  # first max -> lowest canonical index
    return int(np.argmin(importances))


def run_elimination(
    table: FeatureTable,
    grid: selection.GridSpec,
    seed: int = 0,
    remove: str = "top",
    n_jobs: int = 1,
    on_record=None,
    resume_records: list | None = None,
) -> ExperimentRun:
    """Run the elimination loop over all features of `table`.

    `on_record` is called with each completed ExperimentRecord (for
    streaming output); `resume_records` replays previously completed
    iterations so an interrupted run continues deterministically.
    """
    if remove not in REMOVE_DIRECTIONS:
        raise ValidationError(f"remove must be one of {REMOVE_DIRECTIONS}, got {remove!r}")
    names = table.feature_names
    if len(names) < 1:
        raise ValidationError("need at least one feature")
    X_full = table.X
    y = table.y
    counts = table.class_counts()
    low = min(counts.values())
    if low < 3:
        raise ValidationError(f"every class needs >= 3 members, smallest has {low}")

    folds = selection.stratified_folds(y, k=3, seed=spawn_seed(seed, "folds"))

    records: list[ExperimentRecord] = []
    active = list(range(len(names)))
    if resume_records:
        for rec in resume_records:
            expected = tuple(names[i] for i in active)
            if rec.feature_names != expected:
                raise ValidationError(
                    f"resume mismatch at iteration {rec.iteration}: recorded feature set "
                    "does not replay against this table/config"
                )
            records.append(rec)
            active.remove(names.index(rec.removed_feature))

    for iteration in range(len(records), len(names)):
        active_names = tuple(names[i] for i in active)
        X = X_full[:, active]
        best, _ = selection.grid_search(
            X, y, grid, folds, seed=spawn_seed(seed, "iter", iteration), n_jobs=n_jobs
        )
        refit_hp = best.hp.with_seed(spawn_seed(seed, "refit", iteration))
        model = tree.fit(X, y, refit_hp)
        imp = model.importances
        removal_pos = _pick_removal(imp, remove)
        record = ExperimentRecord(
            iteration=iteration,
            feature_names=active_names,
            best_hp=refit_hp,
            fold_scores=best.fold_scores,
            mean_f1=best.mean_score,
            importances={name: float(v) for name, v in zip(active_names, imp)},
            removed_feature=active_names[removal_pos],
        )
        records.append(record)
        if on_record is not None:
            on_record(record)
        active.pop(removal_pos)

    return ExperimentRun(
        records=records,
        dataset_fingerprint=dataset_fingerprint(table),
        config={"grid": grid.to_dict(), "remove": remove},
        seed=seed,
    )


# -- persistence ------------------------------------------------------------


def record_to_line(record: ExperimentRecord) -> str:
    return json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"


def save_jsonl(run: ExperimentRun, path) -> None:
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        for record in run.records:
            fh.write(record_to_line(record))


def load_jsonl(path, allow_partial: bool = False) -> list[ExperimentRecord]:
    """Parse a run JSONL; with allow_partial a trailing damaged line is dropped."""
    records = []
    with open(str(path), "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    for lineno, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(ExperimentRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            if allow_partial and lineno == len(lines) - 1:
                break
            raise ValidationError(f"{path}: bad record on line {lineno + 1}: {exc}") from exc
    return records


def save_manifest(run: ExperimentRun, path) -> None:
    manifest = {
        "seed": run.seed,
        "dataset_fingerprint": run.dataset_fingerprint,
        "config": run.config,
        "n_records": len(run.records),
    }
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def save_summary_csv(run: ExperimentRun, path) -> None:
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,n_features,n_informative,mean_f1\n")
        for r in run.records:
            fh.write(f"{r.iteration},{r.n_features},{r.n_informative},{repr(float(r.mean_f1))}\n")
