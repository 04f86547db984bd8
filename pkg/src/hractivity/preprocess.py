"""Window/stride segmentation and the two standardization schemes.

Data standardization: per-subject z-score of the raw series before
windowing. Feature standardization: z-score of feature vectors with
statistics fit on the training split only, applied unchanged to test
vectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeries, DimensionMismatch, InvalidConfig
from .series import ActivityLabel, SubjectSeries

EPSILON = 1e-12


@dataclass(frozen=True)
class WindowConfig:
    window_size: int
    stride: int

    def __post_init__(self):
        if self.window_size < 2:
            raise InvalidConfig("window_size must be >= 2")
        if self.stride < 1:
            raise InvalidConfig("stride must be >= 1")


@dataclass(frozen=True)
class Window:
    """A fixed-length slice of one subject's series with a single label."""

    subject_id: str
    start_index: int
    values: np.ndarray
    label: ActivityLabel

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "label", ActivityLabel(int(self.label)))


class StandardizationMode(enum.Enum):
    NONE = "none"
    DATA = "data"
    FEATURE = "feature"


def window_count(n: int, cfg: WindowConfig) -> int:
    if n < cfg.window_size:
        return 0
    return (n - cfg.window_size) // cfg.stride + 1


def _window_label(labels: np.ndarray) -> ActivityLabel:
    counts = np.bincount(labels, minlength=len(ActivityLabel))
    top = counts.max()
    candidates = np.nonzero(counts == top)[0]
    if len(candidates) == 1:
        return ActivityLabel(int(candidates[0]))
    last = int(labels[-1])
    if counts[last] == top:
        return ActivityLabel(last)
    return ActivityLabel(int(candidates[0]))  # tie without the last sample: lowest label


def segment(series: SubjectSeries, cfg: WindowConfig) -> list[Window]:
    """Cut a uniform series into overlapping windows.

    Windows start at indices 0, S, 2S, ...; a series shorter than one window
    yields an empty list. The window label is the majority of its per-sample
    labels, ties broken by the label of the window's last sample.
    """
    n = len(series)
    w, s = cfg.window_size, cfg.stride
    windows = []
    for k in range(window_count(n, cfg)):
        start = k * s
        sl = slice(start, start + w)
        windows.append(
            Window(
                subject_id=series.subject_id,
                start_index=start,
                values=series.bpm[sl],
                label=_window_label(series.labels[sl]),
            )
        )
    return windows


def subject_stats(series: SubjectSeries) -> tuple[float, float]:
    """(mean, sample std) of one subject's full bpm trace."""
    mean = float(series.bpm.mean())
    std = float(series.bpm.std(ddof=1)) if len(series) > 1 else 0.0
    return mean, std


def standardize_series(series: SubjectSeries) -> SubjectSeries:
    """Per-subject z-score over the subject's own full series.

    Uses the sample standard deviation (denominator N-1). Labels and
    timestamps are unchanged.
    """
    if len(series) < 2:
        raise DegenerateSeries(f"{series.subject_id}: need at least 2 samples")
    mean, std = subject_stats(series)
    if std < EPSILON:
        raise DegenerateSeries(f"{series.subject_id}: constant series")
    return series.with_bpm((series.bpm - mean) / std)


@dataclass(frozen=True)
class Scaler:
    """Per-dimension standardizer with learned mean/std and an epsilon guard."""

    mean: np.ndarray
    std: np.ndarray
    epsilon: float = EPSILON

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        std = np.ascontiguousarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise DimensionMismatch("scaler mean/std must be equal-length vectors")
        std = np.where(std < self.epsilon, 1.0, std)  # constant dims pass through
        for name, arr in (("mean", mean), ("std", std)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def fit_scaler(train_vectors: np.ndarray | list, epsilon: float = EPSILON) -> Scaler:
    """Fit per-dimension mean/std from training vectors only."""
    mat = np.asarray(train_vectors, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise DimensionMismatch("expected a non-empty (n, d) training matrix")
    mean = mat.mean(axis=0)
    std = mat.std(axis=0, ddof=1) if mat.shape[0] > 1 else np.zeros(mat.shape[1])
    return Scaler(mean=mean, std=std, epsilon=epsilon)


def apply_scaler(scaler: Scaler, vectors: np.ndarray | list) -> np.ndarray:
    """Standardize one vector or an (n, d) matrix with a fitted scaler."""
    arr = np.asarray(vectors, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != scaler.mean.shape[0]:
        raise DimensionMismatch(
            f"expected dimension {scaler.mean.shape[0]}, got {arr.shape[-1]}"
        )
    out = (arr - scaler.mean) / scaler.std
    return out[0] if squeeze else out
