"""Feature ranking over the top decile of trained trees.

Each selected tree contributes, for every feature that is informative in it,
a quarter of the sum of four terms: CV stability (mean fold score over the
tree's own max fold score), the tree's informative-feature ratio, the
reciprocal of the tree's rank among the selected trees, and the reciprocal
of the feature's importance rank within the tree. Features informative in
no selected tree score exactly zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .elimination import ExperimentRecord, ExperimentRun
from .errors import ValidationError
from .spectral import parse_feature_name

RANK_SCOPES = ("selected", "all")


@dataclass(frozen=True)
class TreeRank:
    """A selected tree with its rank and the two per-tree Eq. terms."""

    record: ExperimentRecord
    dt_rank: int
    stability_ratio: float
    informative_ratio: float


@dataclass(frozen=True)
class Contribution:
    iteration: int
    dt_rank: int
    f_rank: int
    stability_term: float
    informative_term: float
    tree_rank_term: float
    feature_rank_term: float

    @property
    def value(self) -> float:
        return 0.25 * (
            self.stability_term
            + self.informative_term
            + self.tree_rank_term
            + self.feature_rank_term
        )

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "dt_rank": self.dt_rank,
            "f_rank": self.f_rank,
            "stability_term": self.stability_term,
            "informative_term": self.informative_term,
            "tree_rank_term": self.tree_rank_term,
            "feature_rank_term": self.feature_rank_term,
            "value": self.value,
        }


@dataclass(frozen=True)
class RankEntry:
    feature: str
    rank_value: float
    contributions: tuple

    @property
    def n_contributing_trees(self) -> int:
        return len(self.contributions)


def _tree_order_key(record: ExperimentRecord):
    # descending mean F1; cutoff ties -> fewer features, then earlier iteration
    return (-record.mean_f1, record.n_features, record.iteration)


def select_top_decile(run: ExperimentRun, fraction: float = 0.10) -> list[TreeRank]:
    """The ceil(fraction * len(run)) best trees, ranked 1..N by mean F1."""
    if not run.records:
        raise ValidationError("cannot select trees from an empty run")
    if not 0 < fraction <= 1:
        raise ValidationError("selection fraction must lie in (0, 1]")
    n_select = math.ceil(fraction * len(run.records))
    ordered = sorted(run.records, key=_tree_order_key)[:n_select]
    selected = []
    for position, record in enumerate(ordered, start=1):
        max_score = max(record.fold_scores)
        stability = record.mean_f1 / max_score if max_score > 0 else 0.0
        selected.append(
            TreeRank(
                record=record,
                dt_rank=position,
                stability_ratio=stability,
                informative_ratio=record.n_informative / record.n_features,
            )
        )
    return selected


def feature_rank(selected: list[TreeRank], all_feature_names) -> list[RankEntry]:
    """Score every feature over the selected trees; descending rank value."""
    if not selected:
        raise ValidationError("need at least one selected tree")
    canonical = {name: i for i, name in enumerate(all_feature_names)}
    contributions: dict[str, list[Contribution]] = {name: [] for name in canonical}

    for tr in selected:
        record = tr.record
        informative = [(name, v) for name, v in record.importances.items() if v > 0]
        # importance rank within the tree; ties -> lower canonical index
        informative.sort(key=lambda item: (-item[1], canonical[item[0]]))
        for f_rank, (name, _) in enumerate(informative, start=1):
            contributions[name].append(
                Contribution(
                    iteration=record.iteration,
                    dt_rank=tr.dt_rank,
                    f_rank=f_rank,
                    stability_term=tr.stability_ratio,
                    informative_term=tr.informative_ratio,
                    tree_rank_term=1.0 / tr.dt_rank,
                    feature_rank_term=1.0 / f_rank,
                )
            )

    entries = [
        RankEntry(
            feature=name,
            rank_value=sum(c.value for c in contributions[name]),
            contributions=tuple(contributions[name]),
        )
        for name in canonical
    ]
    entries.sort(key=lambda e: (-e.rank_value, canonical[e.feature]))
    return entries


@dataclass(frozen=True)
class RankReport:
    """Bucketed distribution of rank values plus the top-k table."""

    bucket_counts: dict
    top: tuple

    def to_dict(self) -> dict:
        return {
            "bucket_counts": dict(self.bucket_counts),
            "top": [dict(row) for row in self.top],
        }


def rank_report(entries: list[RankEntry], top_k: int = 10) -> RankReport:
    if not entries:
        raise ValidationError("cannot report on zero rank entries")
    buckets = {"zero": 0, "below_one": 0, "one_to_three": 0, "above_three": 0}
    for e in entries:
        if e.rank_value == 0:
            buckets["zero"] += 1
        elif e.rank_value < 1:
            buckets["below_one"] += 1
        elif e.rank_value <= 3:
            buckets["one_to_three"] += 1
        else:
            buckets["above_three"] += 1
    top = []
    for e in entries[:top_k]:
        parsed = parse_feature_name(e.feature)
        top.append(
            {
                "feature": e.feature,
                "channel": parsed[0] if parsed else None,
                "freq_hz": parsed[1] if parsed else None,
                "rank_value": e.rank_value,
                "n_contributing_trees": e.n_contributing_trees,
            }
        )
    return RankReport(bucket_counts=buckets, top=tuple(top))


# -- persistence ------------------------------------------------------------


def save_rank_csv(entries: list[RankEntry], path) -> None:
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature,channel,freq_hz,rank_value,n_contributing_trees\n")
        for e in entries:
            parsed = parse_feature_name(e.feature)
            ch = "" if parsed is None else parsed[0]
            freq = "" if parsed is None else parsed[1]
            fh.write(f"{e.feature},{ch},{freq},{repr(float(e.rank_value))},{e.n_contributing_trees}\n")


def save_rank_json(entries: list[RankEntry], path) -> None:
    payload = [
        {
            "feature": e.feature,
            "rank_value": e.rank_value,
            "contributions": [c.to_dict() for c in e.contributions],
        }
        for e in entries
    ]
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def save_histogram_csv(report: RankReport, path) -> None:
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bucket,count\n")
        for bucket in ("zero", "below_one", "one_to_three", "above_three"):
            fh.write(f"{bucket},{report.bucket_counts[bucket]}\n")


def save_top_csv(report: RankReport, path) -> None:
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature,channel,freq_hz,rank_value,n_contributing_trees\n")
        for row in report.top:
            ch = "" if row["channel"] is None else row["channel"]
            freq = "" if row["freq_hz"] is None else row["freq_hz"]
            fh.write(
                f"{row['feature']},{ch},{freq},{repr(float(row['rank_value']))},"
                f"{row['n_contributing_trees']}\n"
            )
