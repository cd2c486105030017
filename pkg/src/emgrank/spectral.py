"""Welch PSD estimation and assembly of the per-trial feature table.

Feature columns follow the `ch{i}_{f}Hz` scheme, channel-major over
channels 1..3 and frequencies 1..450 Hz, for 1350 features per trial plus
four metadata columns.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import signal

from .errors import InputError, SchemaError, ValidationError
from .preprocess import Recording

FEATURE_CHANNELS = (1, 2, 3)
FEATURE_FREQ_MIN_HZ = 1
FEATURE_FREQ_MAX_HZ = 450
META_COLUMNS = ("subject_id", "rest_period_min", "experiment", "sequence")
CLASS_LABELS = (1, 5, 10)

_FEATURE_RE = re.compile(r"^ch([123])_(\d+)Hz$")


def feature_columns() -> list[str]:
    """The 1350 canonical feature names in canonical order."""
    return [
        f"ch{ch}_{f}Hz"
        for ch in FEATURE_CHANNELS
        for f in range(FEATURE_FREQ_MIN_HZ, FEATURE_FREQ_MAX_HZ + 1)
    ]


_CANONICAL = feature_columns()
_CANONICAL_INDEX = {name: i for i, name in enumerate(_CANONICAL)}


def parse_feature_name(name: str) -> tuple[int, int] | None:
    """Return (channel, freq_hz) for a canonical feature name, else None."""
    m = _FEATURE_RE.match(name)
    if not m:
        return None
    ch, f = int(m.group(1)), int(m.group(2))
    if not FEATURE_FREQ_MIN_HZ <= f <= FEATURE_FREQ_MAX_HZ:
        return None
    return ch, f


@dataclass(frozen=True)
class TrialMeta:
    """Identifying metadata for one trial; rest_period_min is the class label."""

    subject_id: int
    rest_period_min: int
    experiment: int
    sequence: int

    def __post_init__(self):
        if self.rest_period_min not in CLASS_LABELS:
            raise ValidationError(
                f"rest_period_min must be one of {CLASS_LABELS}, got {self.rest_period_min}"
            )
        if self.sequence not in (0, 1, 2):
            raise ValidationError(f"sequence must be 0, 1 or 2, got {self.sequence}")


@dataclass(frozen=True)
class PsdEstimate:
    """One-sided PSD per channel on a common ascending frequency grid."""

    freqs_hz: np.ndarray
    power: np.ndarray
    channel_names: tuple[str, ...]

    def __post_init__(self):
        freqs = np.asarray(self.freqs_hz, dtype=np.float64)
        power = np.asarray(self.power, dtype=np.float64)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if power.ndim != 2 or power.shape != (len(self.channel_names), len(freqs)):
            raise ValidationError("power must have shape (n_channels, n_freqs)")
        if np.any(np.diff(freqs) <= 0):
            raise ValidationError("frequency grid must be strictly ascending")
        if np.any(power < 0):
            raise ValidationError("PSD values must be nonnegative")


def welch_psd(
    rec: Recording,
    segment_len_samples: int = 1000,
    overlap_fraction: float = 0.5,
    window: str = "hann",
) -> PsdEstimate:
    """Welch PSD (one-sided density, V^2/Hz) for every channel.

    With segment_len_samples equal to the sample rate the grid spacing is
    exactly 1 Hz, which the feature naming scheme relies on.
    """
    if segment_len_samples < 2:
        raise ValidationError("segment length must be >= 2 samples")
    if segment_len_samples > rec.n_samples:
        raise ValidationError(
            f"segment of {segment_len_samples} samples exceeds recording "
            f"length {rec.n_samples}"
        )
    if not 0 <= overlap_fraction < 1:
        raise ValidationError("overlap fraction must lie in [0, 1)")
    noverlap = int(segment_len_samples * overlap_fraction)
    freqs, power = signal.welch(
        rec.data,
        fs=rec.sample_rate_hz,
        window=window,
        nperseg=segment_len_samples,
        noverlap=noverlap,
        detrend="constant",
        scaling="density",
        axis=1,
    )
    # filtfilt round-off can leave infinitesimal negatives in |.|^2 terms
    power = np.maximum(power, 0.0)
    return PsdEstimate(freqs_hz=freqs, power=power, channel_names=rec.names)


def extract_features(psd: PsdEstimate, meta: TrialMeta) -> dict:
    """One feature-table row: 4 metadata fields + the 1350 canonical features."""
    expected = tuple(f"ch{i}" for i in FEATURE_CHANNELS)
    if psd.channel_names != expected:
        raise ValidationError(
            f"PSD must cover channels {expected}, got {psd.channel_names}"
        )
    grid = np.arange(FEATURE_FREQ_MIN_HZ, FEATURE_FREQ_MAX_HZ + 1, dtype=np.float64)
    idx = np.searchsorted(psd.freqs_hz, grid)
    if idx.max() >= len(psd.freqs_hz) or not np.allclose(
        psd.freqs_hz[idx], grid, atol=1e-9
    ):
        raise ValidationError(
            f"PSD grid must contain every integer frequency "
            f"{FEATURE_FREQ_MIN_HZ}..{FEATURE_FREQ_MAX_HZ} Hz "
            f"(grid spans {psd.freqs_hz[0]:g}..{psd.freqs_hz[-1]:g} Hz)"
        )
    row = {
        "subject_id": meta.subject_id,
        "rest_period_min": meta.rest_period_min,
        "experiment": meta.experiment,
        "sequence": meta.sequence,
    }
    for ch_pos, ch in enumerate(FEATURE_CHANNELS):
        vals = psd.power[ch_pos, idx]
        for f_pos, f in enumerate(range(FEATURE_FREQ_MIN_HZ, FEATURE_FREQ_MAX_HZ + 1)):
            row[f"ch{ch}_{f}Hz"] = float(vals[f_pos])
    return row


class FeatureTable:
    """Observations x named PSD features plus the four metadata columns.

    The canonical table has all 1350 feature columns; reduced tables carry
    an ordered subset of them (used for desk-scale experiments). Labels are
    always one of {1, 5, 10}.
    """

    def __init__(self, df: pd.DataFrame):
        self.df = _validate_table(df)

    @classmethod
    def from_rows(cls, rows: list[dict]) -> "FeatureTable":
        if not rows:
            raise ValidationError("cannot build a feature table from zero rows")
        return cls(pd.DataFrame(rows))

    @property
    def feature_names(self) -> list[str]:
        return [c for c in self.df.columns if c not in META_COLUMNS]

    @property
    def n_rows(self) -> int:
        return len(self.df)

    @property
    def X(self) -> np.ndarray:
        return self.df[self.feature_names].to_numpy(dtype=np.float64)

    @property
    def y(self) -> np.ndarray:
        return self.df["rest_period_min"].to_numpy(dtype=np.int64)

    def class_counts(self) -> dict[int, int]:
        counts = self.df["rest_period_min"].value_counts()
        return {int(label): int(counts.get(label, 0)) for label in CLASS_LABELS}

    def restrict(self, keep: list[str]) -> "FeatureTable":
        """Reduced table keeping only the named features, in canonical order."""
        missing = [name for name in keep if name not in self.df.columns]
        if missing:
            raise SchemaError(f"features not present in table: {missing}")
        ordered = sorted(set(keep), key=_CANONICAL_INDEX.__getitem__)
        return FeatureTable(self.df[list(META_COLUMNS) + ordered].copy())

    def __eq__(self, other) -> bool:
        return isinstance(other, FeatureTable) and self.df.equals(other.df)


def _validate_table(df: pd.DataFrame) -> pd.DataFrame:
    cols = list(df.columns)
    if cols[: len(META_COLUMNS)] != list(META_COLUMNS):
        raise SchemaError(
            f"first columns must be {list(META_COLUMNS)}, got {cols[:4]}"
        )
    feat = cols[len(META_COLUMNS):]
    if not feat:
        raise SchemaError("table has no feature columns")

    bad = [c for c in feat if parse_feature_name(c) is None]
    if bad:
        raise SchemaError(f"invalid feature column names: {bad[:10]}")
    indices = [_CANONICAL_INDEX[c] for c in feat]
    if any(b <= a for a, b in zip(indices, indices[1:])):
        out_of_order = [
            feat[i + 1] for i in range(len(feat) - 1) if indices[i + 1] <= indices[i]
        ]
        raise SchemaError(f"feature columns out of canonical order: {out_of_order[:10]}")
    if len(feat) == len(_CANONICAL) and feat != _CANONICAL:
        raise SchemaError("full-width table does not match the canonical column set")

    if len(df) == 0:
        raise SchemaError("table has no rows")
    if df.isna().any().any():
        na_cols = [c for c in df.columns if df[c].isna().any()]
        raise SchemaError(f"missing values in columns: {na_cols[:10]}")

    labels = set(df["rest_period_min"].unique().tolist())
    bad_labels = labels - set(CLASS_LABELS)
    if bad_labels:
        raise SchemaError(
            f"rest_period_min labels must be in {CLASS_LABELS}, found {sorted(bad_labels)}"
        )
    if (df[list(feat)].to_numpy() < 0).any():
        neg = [c for c in feat if (df[c] < 0).any()]
        raise SchemaError(f"negative PSD values in columns: {neg[:10]}")

    out = df.copy()
    for c in META_COLUMNS:
        out[c] = out[c].astype(np.int64)
    return out


def save_feature_csv(table: FeatureTable, path) -> None:
    table.df.to_csv(str(path), index=False, lineterminator="\n")


def load_feature_csv(path) -> FeatureTable:
    try:
        df = pd.read_csv(str(path))
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    try:
        return FeatureTable(df)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
