"""Handcrafted window features: base, MFCC, statistical and temporal families.

All feature names carry the "0_" prefix so importance reports line up with
the naming used elsewhere in the toolkit. Family internals are vectorized
over an (n_windows, W) value matrix; the public per-window operations wrap
the matrix versions.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct, rfft

from .errors import InvalidConfig, NonFiniteFeature, WindowTooShort
from .preprocess import Window
from .series import ActivityLabel

BASE_NAMES = (
    "0_Max",
    "0_Min",
    "0_Mean",
    "0_Std",
    "0_FirstDerivativeMean",
    "0_SecondDerivativeMean",
)

STATISTICAL_NAMES = (
    "0_Mean",
    "0_Std",
    "0_Variance",
    "0_Min",
    "0_Max",
    "0_Median",
    "0_InterquartileRange",
    "0_Skewness",
    "0_Kurtosis",
    "0_RootMeanSquare",
    "0_MeanAbsoluteDeviation",
    "0_HistogramEntropy",
)

TEMPORAL_NAMES = (
    "0_Autocorrelation",
    "0_ZeroCrossings",
    "0_MeanAbsoluteDiff",
    "0_MeanDiff",
    "0_SumAbsoluteDiff",
    "0_Slope",
    "0_PeakToPeak",
    "0_LocalMaximaCount",
    "0_TemporalCentroid",
    "0_AreaUnderCurve",
)

ENTROPY_BINS = 10
LOG_FLOOR = 1e-10


class FeatureSetKind(enum.Enum):
    BASE = "base"
    BASE_MFCC = "base_mfcc"
    STATISTICAL = "statistical"
    TEMPORAL = "temporal"
    STAT_TEMPORAL = "stat_temporal"


@dataclass(frozen=True)
class MfccConfig:
    n_mel_bands: int = 10
    n_coefficients: int = 5
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        if self.n_mel_bands < 1 or self.n_coefficients < 1:
            raise InvalidConfig("mel bands and coefficient counts must be positive")
        if self.n_coefficients > self.n_mel_bands:
            raise InvalidConfig("n_coefficients must not exceed n_mel_bands")
        if self.sample_rate_hz <= 0:
            raise InvalidConfig("sample_rate_hz must be positive")

    def names(self) -> tuple[str, ...]:
        return tuple(f"0_MFCC{i}" for i in range(self.n_coefficients))


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray
    subject_id: str
    start_index: int
    label: ActivityLabel

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (len(self.names),):
            raise NonFiniteFeature("feature values must match the name list")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def _require_width(mat: np.ndarray, minimum: int) -> None:
    if mat.shape[1] < minimum:
        raise WindowTooShort(minimum, mat.shape[1])


def _as_matrix(values) -> np.ndarray:
    mat = np.asarray(values, dtype=np.float64)
    if mat.ndim == 1:
        mat = mat[None, :]
    return mat


def base_matrix(mat: np.ndarray) -> np.ndarray:
    _require_width(mat, 3)
    d1 = np.diff(mat, axis=1)
    d2 = np.diff(mat, n=2, axis=1)
    return np.column_stack(
        [
            mat.max(axis=1),
            mat.min(axis=1),
            mat.mean(axis=1),
            mat.std(axis=1, ddof=1),
            d1.mean(axis=1),
            d2.mean(axis=1),
        ]
    )


def statistical_matrix(mat: np.ndarray) -> np.ndarray:
    _require_width(mat, 3)
    n, w = mat.shape
    mean = mat.mean(axis=1)
    centered = mat - mean[:, None]
    m2 = (centered**2).mean(axis=1)
    m3 = (centered**3).mean(axis=1)
    m4 = (centered**4).mean(axis=1)
    nonzero = m2 > 0
    skew = np.zeros(n)
    kurt = np.zeros(n)
    skew[nonzero] = m3[nonzero] / m2[nonzero] ** 1.5
    kurt[nonzero] = m4[nonzero] / m2[nonzero] ** 2 - 3.0

    lo = mat.min(axis=1)
    hi = mat.max(axis=1)
    q25, q75 = np.percentile(mat, [25.0, 75.0], axis=1)

    # row-wise histogram entropy: 10 equal-width bins over [min, max]
    entropy = np.zeros(n)
    spread = hi - lo
    live = spread > 0
    if live.any():
        sub = mat[live]
        width = spread[live][:, None]
        idx = np.floor((sub - lo[live][:, None]) / width * ENTROPY_BINS).astype(np.int64)
        np.clip(idx, 0, ENTROPY_BINS - 1, out=idx)  # max lands in the last bin
        rows = np.repeat(np.arange(idx.shape[0]), w)
        counts = np.bincount(
            rows * ENTROPY_BINS + idx.ravel(), minlength=idx.shape[0] * ENTROPY_BINS
        ).reshape(idx.shape[0], ENTROPY_BINS)
        p = counts / w
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(p > 0, p * np.log(p), 0.0)
        entropy[live] = -plogp.sum(axis=1)

    return np.column_stack(
        [
            mean,
            mat.std(axis=1, ddof=1),
            mat.var(axis=1, ddof=1),
            lo,
            hi,
            np.median(mat, axis=1),
            q75 - q25,
            skew,
            kurt,
            np.sqrt((mat**2).mean(axis=1)),
            np.abs(centered).mean(axis=1),
            entropy,
        ]
    )


def temporal_matrix(mat: np.ndarray) -> np.ndarray:
    _require_width(mat, 3)
    n, w = mat.shape
    d1 = np.diff(mat, axis=1)

    a = mat[:, :-1]
    b = mat[:, 1:]
    am = a - a.mean(axis=1, keepdims=True)
    bm = b - b.mean(axis=1, keepdims=True)
    num = (am * bm).sum(axis=1)
    den = np.sqrt((am**2).sum(axis=1) * (bm**2).sum(axis=1))
    autocorr = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)

    centered = mat - mat.mean(axis=1, keepdims=True)
    crossings = (centered[:, :-1] * centered[:, 1:] < 0).sum(axis=1).astype(np.float64)

    idx = np.arange(w, dtype=np.float64)
    idx_c = idx - idx.mean()
    slope = (mat * idx_c).sum(axis=1) / (idx_c**2).sum()

    interior = (mat[:, 1:-1] > mat[:, :-2]) & (mat[:, 1:-1] > mat[:, 2:])
    maxima = interior.sum(axis=1).astype(np.float64)

    absx = np.abs(mat)
    den_c = absx.sum(axis=1)
    centroid = np.where(den_c > 0, (absx * idx).sum(axis=1) / np.where(den_c > 0, den_c, 1.0), 0.0)

    auc = np.trapezoid(mat, axis=1)

    return np.column_stack(
        [
            autocorr,
            crossings,
            np.abs(d1).mean(axis=1),
            d1.mean(axis=1),
            np.abs(d1).sum(axis=1),
            slope,
            mat.max(axis=1) - mat.min(axis=1),
            maxima,
            centroid,
            auc,
        ]
    )


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: MfccConfig, n_fft: int) -> np.ndarray:
    """Triangular filters on the rfft bin grid, shape (n_mel_bands, n_fft//2+1).

    Band edges are mel-spaced between 0 and sample_rate/2; band b rises over
    [edge_b, edge_{b+1}] and falls over [edge_{b+1}, edge_{b+2}], so the bin
    at 0 Hz always gets weight 0.
    """
    edges_mel = np.linspace(0.0, hz_to_mel(cfg.sample_rate_hz / 2.0), cfg.n_mel_bands + 2)
    edges = mel_to_hz(edges_mel)
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / cfg.sample_rate_hz)
    bank = np.zeros((cfg.n_mel_bands, freqs.size))
    for b in range(cfg.n_mel_bands):
        left, center, right = edges[b], edges[b + 1], edges[b + 2]
        rise = (freqs - left) / (center - left)
        fall = (right - freqs) / (right - center)
        bank[b] = np.clip(np.minimum(rise, fall), 0.0, None)
    return bank


def mel_band_energies(values, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Filterbank outputs of the single-frame pipeline, before the log."""
    mat = _as_matrix(values)
    _require_width(mat, 8)
    w = mat.shape[1]
    frame = (mat - mat.mean(axis=1, keepdims=True)) * np.hanning(w)
    n_fft = _next_pow2(w)
    spectrum = np.abs(rfft(frame, n=n_fft, axis=1))
    energies = spectrum @ mel_filterbank(cfg, n_fft).T
    return energies if np.asarray(values).ndim > 1 else energies[0]


def mfcc_matrix(mat: np.ndarray, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    energies = mel_band_energies(mat, cfg)
    log_e = np.log(np.maximum(energies, LOG_FLOOR))
    coefficients = dct(log_e, type=2, norm="ortho", axis=1)
    return coefficients[:, : cfg.n_coefficients]


def base_features(values) -> np.ndarray:
    return base_matrix(_as_matrix(values))[0]


def statistical_features(values) -> np.ndarray:
    return statistical_matrix(_as_matrix(values))[0]


def temporal_features(values) -> np.ndarray:
    return temporal_matrix(_as_matrix(values))[0]


def mfcc_features(values, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    return mfcc_matrix(_as_matrix(values), cfg)[0]


def feature_names(kind: FeatureSetKind, mfcc: MfccConfig = MfccConfig()) -> tuple[str, ...]:
    if kind is FeatureSetKind.BASE:
        return BASE_NAMES
    if kind is FeatureSetKind.BASE_MFCC:
        return BASE_NAMES + mfcc.names()
    if kind is FeatureSetKind.STATISTICAL:
        return STATISTICAL_NAMES
    if kind is FeatureSetKind.TEMPORAL:
        return TEMPORAL_NAMES
    if kind is FeatureSetKind.STAT_TEMPORAL:
        return STATISTICAL_NAMES + TEMPORAL_NAMES
    raise InvalidConfig(f"unknown feature set {kind!r}")


def feature_matrix(
    windows: list[Window],
    kind: FeatureSetKind,
    on_standardized_input: bool = False,
    stats: dict[str, tuple[float, float]] | None = None,
    mfcc: MfccConfig = MfccConfig(),
) -> np.ndarray:
    """(n_windows, n_features) matrix for a window list, order preserved."""
    if not windows:
        names = feature_names(kind, mfcc)
        return np.zeros((0, len(names)))
    mat = np.stack([w.values for w in windows])
    if on_standardized_input:
        if stats is None:
            raise InvalidConfig("standardized input requires per-subject stats")
        mean = np.array([stats[w.subject_id][0] for w in windows])
        std = np.array([stats[w.subject_id][1] for w in windows])
        mat = (mat - mean[:, None]) / std[:, None]

    if kind is FeatureSetKind.BASE:
        out = base_matrix(mat)
    elif kind is FeatureSetKind.BASE_MFCC:
        out = np.column_stack([base_matrix(mat), mfcc_matrix(mat, mfcc)])
    elif kind is FeatureSetKind.STATISTICAL:
        out = statistical_matrix(mat)
    elif kind is FeatureSetKind.TEMPORAL:
        out = temporal_matrix(mat)
    elif kind is FeatureSetKind.STAT_TEMPORAL:
        out = np.column_stack([statistical_matrix(mat), temporal_matrix(mat)])
    else:
        raise InvalidConfig(f"unknown feature set {kind!r}")
    if not np.isfinite(out).all():
        raise NonFiniteFeature("non-finite feature value produced")
    return out


def extract(
    windows: list[Window],
    kind: FeatureSetKind,
    on_standardized_input: bool = False,
    stats: dict[str, tuple[float, float]] | None = None,
    mfcc: MfccConfig = MfccConfig(),
) -> list[FeatureVector]:
    names = feature_names(kind, mfcc)
    matrix = feature_matrix(windows, kind, on_standardized_input, stats, mfcc)
    return [
        FeatureVector(names, row, w.subject_id, w.start_index, w.label)
        for w, row in zip(windows, matrix)
    ]


def write_feature_csv(vectors: list[FeatureVector], path: str | Path) -> None:
    """One row per window: feature columns then subject_id, start_index, label."""
    if not vectors:
        raise NonFiniteFeature("nothing to write")
    names = vectors[0].names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + ["subject_id", "start_index", "label"])
        for v in vectors:
            if v.names != names:
                raise NonFiniteFeature("mixed feature sets in one export")
            writer.writerow(
                [repr(float(x)) for x in v.values]
                + [v.subject_id, str(v.start_index), v.label.name]
            )
