"""Baseline correction and frequency-domain cleanup of raw multi-channel EMG.

The canonical cleanup chain is baseline -> band limiting -> mains notch,
all zero-phase (forward-backward) so event timing is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .errors import InputError, ValidationError

DEFAULT_SAMPLE_RATE_HZ = 1000.0


@dataclass(frozen=True)
class Recording:
    """Multi-channel time series with a common sample rate.

    `data` has shape (n_channels, n_samples); `names` labels the rows.
    """

    names: tuple[str, ...]
    data: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "names", tuple(self.names))
        if data.ndim != 2:
            raise ValidationError("recording data must be 2-D (channels x samples)")
        if data.shape[1] < 1:
            raise ValidationError("recording must contain at least one sample")
        if len(self.names) != data.shape[0]:
            raise ValidationError(
                f"{len(self.names)} channel names for {data.shape[0]} channels"
            )
        if len(set(self.names)) != len(self.names):
            raise ValidationError("channel names must be unique")
        if not self.sample_rate_hz > 0:
            raise ValidationError("sample_rate_hz must be positive")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def with_data(self, data: np.ndarray) -> "Recording":
        return replace(self, data=data)


@dataclass(frozen=True)
class FilterSpec:
    """Band-limiting and notch parameters.

    The 20-500 Hz band at a 1 kHz rate would put the upper edge exactly at
    Nyquist, so the low-pass defaults to 450 Hz, the ceiling of the feature
    grid. Set `lowpass_cut_hz=None` to skip the low-pass entirely.
    """

    highpass_cut_hz: float = 20.0
    lowpass_cut_hz: float | None = 450.0
    notch_hz: float = 50.0
    notch_q: float = 30.0
    order: int = 4

    def validate_for(self, sample_rate_hz: float) -> None:
        nyq = sample_rate_hz / 2.0
        if not 0 < self.highpass_cut_hz < nyq:
            raise ValidationError(
                f"high-pass cutoff {self.highpass_cut_hz} Hz must lie in (0, {nyq}) Hz"
            )
        if self.lowpass_cut_hz is not None and not 0 < self.lowpass_cut_hz < nyq:
            raise ValidationError(
                f"low-pass cutoff {self.lowpass_cut_hz} Hz must lie in (0, {nyq}) Hz"
            )
        if not 0 < self.notch_hz < nyq:
            raise ValidationError(f"notch frequency {self.notch_hz} Hz must lie in (0, {nyq}) Hz")
        if not self.notch_q > 0:
            raise ValidationError("notch_q must be positive")
        if self.order < 1:
            raise ValidationError("filter order must be >= 1")


def baseline_correct(rec: Recording, window_seconds: float = 5.0) -> Recording:
    """Subtract each channel's mean over the first `window_seconds` of data."""
    if not window_seconds > 0:
        raise ValidationError("baseline window must be positive")
    n_window = int(round(window_seconds * rec.sample_rate_hz))
    if n_window > rec.n_samples:
        raise ValidationError(
            f"baseline window of {window_seconds} s ({n_window} samples) exceeds "
            f"recording length of {rec.n_samples} samples"
        )
    baseline = rec.data[:, :n_window].mean(axis=1, keepdims=True)
    return rec.with_data(rec.data - baseline)


def bandlimit(rec: Recording, spec: FilterSpec | None = None) -> Recording:
    """Zero-phase Butterworth high-pass (and optional low-pass) per channel."""
    spec = spec or FilterSpec()
    spec.validate_for(rec.sample_rate_hz)
    nyq = rec.sample_rate_hz / 2.0
    out = rec.data
    sos_hp = signal.butter(spec.order, spec.highpass_cut_hz / nyq, btype="highpass", output="sos")
    out = signal.sosfiltfilt(sos_hp, out, axis=1)
    if spec.lowpass_cut_hz is not None:
        sos_lp = signal.butter(spec.order, spec.lowpass_cut_hz / nyq, btype="lowpass", output="sos")
        out = signal.sosfiltfilt(sos_lp, out, axis=1)
    return rec.with_data(out)


def notch(rec: Recording, notch_hz: float = 50.0, q: float = 30.0) -> Recording:
    """Zero-phase second-order IIR notch at `notch_hz` per channel."""
    nyq = rec.sample_rate_hz / 2.0
    if not 0 < notch_hz < nyq:
        raise ValidationError(f"notch frequency {notch_hz} Hz must lie in (0, {nyq}) Hz")
    if not q > 0:
        raise ValidationError("notch quality factor must be positive")
    b, a = signal.iirnotch(notch_hz, q, fs=rec.sample_rate_hz)
    out = signal.filtfilt(b, a, rec.data, axis=1)
    return rec.with_data(out)


def preprocess(
    rec: Recording,
    spec: FilterSpec | None = None,
    baseline_window_s: float = 5.0,
) -> Recording:
    """Canonical cleanup chain: baseline -> bandlimit -> notch."""
    spec = spec or FilterSpec()
    rec = baseline_correct(rec, baseline_window_s)
    rec = bandlimit(rec, spec)
    return notch(rec, spec.notch_hz, spec.notch_q)


def load_recording_csv(path, sample_rate_hz: float | None = None) -> Recording:
    """Read a recording CSV.

    With a header the first column must be `t` (seconds) and the sample rate
    is inferred from it; headerless files are all-channel columns and require
    `sample_rate_hz`.
    """
    path = str(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not first.strip():
        raise InputError(f"{path}: empty file")

    tokens = [tok.strip() for tok in first.strip().split(",")]
    has_header = any(not _is_number(tok) for tok in tokens)

    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1 if has_header else 0, ndmin=2)
    except ValueError as exc:
        raise InputError(f"{path}: malformed CSV ({_loadtxt_detail(exc)})") from exc

    if has_header:
        if tokens[0] != "t":
            raise InputError(f"{path}: header must start with 't', got {tokens[0]!r}")
        if raw.shape[1] != len(tokens):
            raise InputError(
                f"{path}: header names {len(tokens)} columns but rows have {raw.shape[1]}"
            )
        t = raw[:, 0]
        if len(t) < 2:
            raise InputError(f"{path}: need at least 2 samples to infer the sample rate")
        dt = np.diff(t)
        if dt.min() <= 0 or not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-9):
            raise InputError(f"{path}: time column is not uniformly increasing")
        fs = 1.0 / float(np.mean(dt))
        names = tuple(tokens[1:])
        data = raw[:, 1:].T
    else:
        if sample_rate_hz is None:
            raise InputError(f"{path}: headerless CSV requires an explicit sample rate")
        fs = float(sample_rate_hz)
        names = tuple(f"ch{i + 1}" for i in range(raw.shape[1]))
        data = raw.T

    return Recording(names=names, data=data, sample_rate_hz=fs)


def save_recording_csv(rec: Recording, path) -> None:
    """Write a recording as `t,<ch...>` CSV with repr-exact float values."""
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(rec.names) + "\n")
        t = np.arange(rec.n_samples) / rec.sample_rate_hz
        for i in range(rec.n_samples):
            row = [repr(float(t[i]))] + [repr(float(v)) for v in rec.data[:, i]]
            fh.write(",".join(row) + "\n")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _loadtxt_detail(exc: ValueError) -> str:
    # numpy reports the offending line in its message; pass it through.
    return str(exc).splitlines()[0]
