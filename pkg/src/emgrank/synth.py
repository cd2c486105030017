"""Synthetic EMG with planted class-dependent spectra, plus brute-force
oracles used to anchor the tree and metric implementations.

Trials are band-shaped Gaussian noise (per-class center/bandwidth) plus
narrowband sines at planted (channel, frequency) pairs whose amplitude
scales with the class. `snr` is the ratio of the reference planted power
(base_amplitude^2 / 2) to the total noise power; snr = inf silences the
noise entirely. Everything is seeded per trial, so generation is
bit-reproducible and parallelizable.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ValidationError
from .preprocess import Recording
from .seeding import spawn_seed
from .spectral import (
    CLASS_LABELS,
    FEATURE_CHANNELS,
    FEATURE_FREQ_MAX_HZ,
    FEATURE_FREQ_MIN_HZ,
    TrialMeta,
)
from .tree import HyperParams, Node, TreeModel


@dataclass(frozen=True)
class ClassProfile:
    """Spectral shape of one class's background noise plus its planted gain."""

    center_hz: float
    bandwidth_hz: float
    planted_amplitude_scale: float

    def to_dict(self) -> dict:
        return {
            "center_hz": self.center_hz,
            "bandwidth_hz": self.bandwidth_hz,
            "planted_amplitude_scale": self.planted_amplitude_scale,
        }


@dataclass(frozen=True)
class PlantedFeature:
    channel: int
    freq_hz: int

    def __post_init__(self):
        if self.channel not in FEATURE_CHANNELS:
            raise ValidationError(f"planted channel must be in {FEATURE_CHANNELS}")
        if not FEATURE_FREQ_MIN_HZ <= self.freq_hz <= FEATURE_FREQ_MAX_HZ:
            raise ValidationError(
                f"planted frequency must lie in "
                f"{FEATURE_FREQ_MIN_HZ}..{FEATURE_FREQ_MAX_HZ} Hz"
            )

    def to_dict(self) -> dict:
        return {"channel": self.channel, "freq_hz": self.freq_hz}


DEFAULT_PLANTED = (
    PlantedFeature(1, 75),
    PlantedFeature(2, 85),
    PlantedFeature(3, 105),
)


@dataclass(frozen=True)
class SynthSpec:
    profiles: tuple  # one ClassProfile per class label, in (1, 5, 10) order
    planted: tuple = DEFAULT_PLANTED
    snr: float = 10.0
    trials_per_class: int = 30
    n_subjects: int = 3
    duration_s: float = 10.0
    sample_rate_hz: float = 1000.0
    noise_floor_ratio: float = 0.25
    base_amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if len(self.profiles) != len(CLASS_LABELS):
            raise ValidationError(f"need one profile per class label {CLASS_LABELS}")
        if not self.snr > 0:
            raise ValidationError("snr must be positive (math.inf silences the noise)")
        if self.trials_per_class < 1 or self.n_subjects < 1:
            raise ValidationError("trials_per_class and n_subjects must be >= 1")
        if self.duration_s * self.sample_rate_hz < 2:
            raise ValidationError("recording too short")
        nyq = self.sample_rate_hz / 2.0
        for p in self.profiles:
            if not 0 < p.center_hz < nyq:
                raise ValidationError(f"profile center {p.center_hz} Hz outside (0, {nyq})")
            if not p.bandwidth_hz > 0 or p.planted_amplitude_scale < 0:
                raise ValidationError("profile bandwidth must be > 0 and scale >= 0")

    @classmethod
    def separable_default(cls, seed: int = 0) -> "SynthSpec":
        """Three shifted noise bands plus strongly class-scaled planted sines."""
        return cls(
            profiles=(
                ClassProfile(70.0, 60.0, 0.5),
                ClassProfile(85.0, 60.0, 1.0),
                ClassProfile(100.0, 60.0, 2.0),
            ),
            seed=seed,
        )

    @classmethod
    def null_default(cls, seed: int = 0) -> "SynthSpec":
        """Identical profiles for every class: no class signal at all."""
        profile = ClassProfile(85.0, 60.0, 1.0)
        return cls(profiles=(profile, profile, profile), seed=seed)

    def to_dict(self) -> dict:
        return {
            "profiles": [p.to_dict() for p in self.profiles],
            "planted": [p.to_dict() for p in self.planted],
            "snr": self.snr,
            "trials_per_class": self.trials_per_class,
            "n_subjects": self.n_subjects,
            "duration_s": self.duration_s,
            "sample_rate_hz": self.sample_rate_hz,
            "noise_floor_ratio": self.noise_floor_ratio,
            "base_amplitude": self.base_amplitude,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        d["profiles"] = tuple(ClassProfile(**p) for p in d["profiles"])
        if "planted" in d:
            d["planted"] = tuple(PlantedFeature(**p) for p in d["planted"])
        if "snr" in d and d["snr"] is None:
            d["snr"] = math.inf
        return cls(**d)


def desk_feature_names() -> list[str]:
    """The 30-feature desk-scale subset: channels 1..3 at 65..110 Hz step 5."""
    return [f"ch{ch}_{f}Hz" for ch in FEATURE_CHANNELS for f in range(65, 111, 5)]


def _shaped_noise(rng, n: int, fs: float, profile: ClassProfile, floor_ratio: float) -> np.ndarray:
    nyq = fs / 2.0
    lo = max(1.0, profile.center_hz - profile.bandwidth_hz / 2.0)
    hi = min(nyq * 0.98, profile.center_hz + profile.bandwidth_hz / 2.0)
    sos = signal.butter(2, [lo / nyq, hi / nyq], btype="bandpass", output="sos")
    banded = signal.sosfilt(sos, rng.standard_normal(n))
    banded = banded / banded.std()
    return banded + floor_ratio * rng.standard_normal(n)


def generate_recordings(spec: SynthSpec) -> list[tuple[Recording, TrialMeta]]:
    """One (Recording, TrialMeta) per trial, trials_per_class per class."""
    fs = spec.sample_rate_hz
    n = int(round(spec.duration_s * fs))
    t = np.arange(n) / fs
    names = tuple(f"ch{ch}" for ch in FEATURE_CHANNELS)
    reference_power = spec.base_amplitude**2 / 2.0
    trials = []
    for class_index, label in enumerate(CLASS_LABELS):
        profile = spec.profiles[class_index]
        for trial in range(spec.trials_per_class):
            rng = np.random.default_rng(spawn_seed(spec.seed, "trial", class_index, trial))
            data = np.zeros((len(names), n))
            if math.isfinite(spec.snr):
                noise_power = reference_power / spec.snr
                for ch in range(len(names)):
                    noise = _shaped_noise(rng, n, fs, profile, spec.noise_floor_ratio)
                    data[ch] = noise * math.sqrt(noise_power / noise.var())
            for pf in spec.planted:
                amplitude = spec.base_amplitude * profile.planted_amplitude_scale
                phase = rng.uniform(0.0, 2.0 * math.pi)
                data[pf.channel - 1] += amplitude * np.sin(2.0 * math.pi * pf.freq_hz * t + phase)
            meta = TrialMeta(
                subject_id=trial % spec.n_subjects + 1,
                rest_period_min=label,
                experiment=trial // 3 + 1,
                sequence=trial % 3,
            )
            trials.append((Recording(names=names, data=data, sample_rate_hz=fs), meta))
    return trials


# -- brute-force oracles ------------------------------------------------------


def _oracle_impurity(counts: np.ndarray, n: float, criterion: str) -> float:
    p = counts / n
    if criterion == "gini":
        return float(1.0 - np.sum(p * p))
    safe = np.where(p > 0, p, 1.0)
    return float(-np.sum(np.where(p > 0, p * np.log2(safe), 0.0)))


def exhaustive_tree_oracle(
    X,
    y,
    criterion: str = "gini",
    min_samples_split: int = 2,
    min_samples_leaf: int = 1,
    max_depth: int | None = None,
) -> TreeModel:
    """Reference CART: every legal (feature, midpoint) split tried explicitly.

    Same conventions as the production tree (x <= threshold goes left; ties
    by lower feature index then lower threshold) with none of its machinery.
    Guarded to n <= 30 samples and d <= 4 features.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValidationError("X must be 2-D and aligned with nonempty y")
    n, d = X.shape
    if n > 30 or d > 4:
        raise ValidationError(f"oracle instance too large (n={n}, d={d}); limit is n<=30, d<=4")
    if criterion not in ("gini", "entropy", "log_loss"):
        raise ValidationError(f"unsupported criterion {criterion!r}")
    depth_limit = math.inf if max_depth is None else max_depth

    classes, y_idx = np.unique(y, return_inverse=True)
    k = len(classes)
    n_total = float(n)
    nodes: list[Node] = []
    raw_importance = np.zeros(d)

    def best_split(indices):
        n_node = len(indices)
        sub_y = y_idx[indices]
        best = None  # (child_cost, feature, threshold)
        for f in range(d):
            col = X[indices, f]
            distinct = np.unique(col)
            for a, b in zip(distinct, distinct[1:]):
                threshold = (a + b) / 2.0
                go_left = col <= threshold
                nl = int(np.count_nonzero(go_left))
                nr = n_node - nl
                if nl < min_samples_leaf or nr < min_samples_leaf:
                    continue
                cl = np.bincount(sub_y[go_left], minlength=k).astype(np.float64)
                cr = np.bincount(sub_y[~go_left], minlength=k).astype(np.float64)
                cost = (float(nl) / n_node) * _oracle_impurity(cl, float(nl), criterion) + (
                    float(nr) / n_node
                ) * _oracle_impurity(cr, float(nr), criterion)
                if best is None or cost < best[0]:
                    best = (cost, f, threshold)
        return best

    def build(indices, depth) -> int:
        counts = np.bincount(y_idx[indices], minlength=k).astype(np.float64)
        node_imp = _oracle_impurity(counts, float(len(indices)), criterion)
        nid = len(nodes)
        nodes.append(Node(counts=counts, impurity=node_imp))
        pure = int(np.count_nonzero(counts)) <= 1
        if len(indices) < min_samples_split or depth >= depth_limit or pure:
            return nid
        best = best_split(indices)
        if best is None:
            return nid
        cost, feature, threshold = best
        raw_importance[feature] += (len(indices) / n_total) * (node_imp - cost)
        go_left = X[indices, feature] <= threshold
        left_id = build(indices[go_left], depth + 1)
        right_id = build(indices[~go_left], depth + 1)
        node = nodes[nid]
        node.feature, node.threshold = feature, threshold
        node.left, node.right = left_id, right_id
        return nid

    build(np.arange(n, dtype=np.intp), 0)
    total = raw_importance.sum()
    importances = raw_importance / total if total > 0 else np.zeros(d)
    return TreeModel(
        nodes=nodes,
        classes=classes.astype(np.int64) if classes.dtype.kind in "iu" else classes,
        n_features=d,
        importances=importances,
        params=HyperParams(
            criterion=criterion,
            min_samples_split=min_samples_split,
            min_samples_leaf=min_samples_leaf,
            max_depth=max_depth,
        ),
    )


def metric_oracle(y_true, y_pred) -> float:
    """Weighted F1 by direct confusion-matrix enumeration (pure Python)."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValidationError(
            f"length mismatch: {len(y_true)} true labels vs {len(y_pred)} predictions"
        )
    if not y_true:
        raise ValidationError("need at least one sample")
    pairs = Counter(zip(y_true, y_pred))
    labels = sorted(set(y_true) | set(y_pred))
    total = 0.0
    for label in labels:
        tp = pairs[(label, label)]
        support = sum(v for (t, _), v in pairs.items() if t == label)
        predicted = sum(v for (_, p), v in pairs.items() if p == label)
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / support if support > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        total += support * f1
    return total / len(y_true)
