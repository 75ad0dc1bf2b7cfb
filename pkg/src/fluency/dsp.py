"""Frame-level acoustic features and their per-segment summary.

All framing is centred: the signal is reflect-padded by ``n_fft // 2`` on
both sides and cut into ``n_fft``-sample frames ``hop`` apart, so every
per-frame series has ``1 + len(samples) // hop`` entries.

The mel/dB/DCT chain pins the usual audio-toolkit defaults: Slaney mel
scale with area-normalised triangles, power spectrogram, dB with a 1e-10
floor, an 80 dB range below each frame's peak and an orthonormal DCT-II.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ExtractionError

AMIN = 1e-10
TOP_DB = 80.0

# Slaney mel scale constants
_MIN_LOG_HZ = 1000.0
_MIN_LOG_MEL = 3.0 * _MIN_LOG_HZ / 200.0  # exactly 15
_LOGSTEP = np.log(6.4) / 27.0

EXTRA_NAMES = ("zcr", "rmse", "sf")


@dataclass(frozen=True)
class FeatureConfig:
    n_mfcc: int = 20
    include_extras: bool = True
    n_fft: int = 2048
    hop: int = 512
    n_mel_filters: int = 128
    fmin: float = 0.0
    fmax: Optional[float] = None
    sr: int = 22050

    def __post_init__(self):
        if not 1 <= self.n_mfcc <= self.n_mel_filters:
            raise ConfigError(
                f"n_mfcc must lie in [1, n_mel_filters={self.n_mel_filters}], got {self.n_mfcc}")
        if self.n_fft < 2:
            raise ConfigError(f"n_fft must be >= 2, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise ConfigError(f"hop must lie in (0, n_fft], got {self.hop}")
        if self.sr <= 0:
            raise ConfigError(f"sr must be positive, got {self.sr}")
        fmax = self.max_frequency
        if not (0 <= self.fmin < fmax <= self.sr / 2):
            raise ConfigError(f"need 0 <= fmin < fmax <= sr/2, got fmin={self.fmin}, fmax={fmax}")

    @property
    def max_frequency(self) -> float:
        return self.sr / 2 if self.fmax is None else float(self.fmax)

    @property
    def dim(self) -> int:
        return self.n_mfcc + (len(EXTRA_NAMES) if self.include_extras else 0)

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def replace(self, **changes) -> "FeatureConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]

    def feature_names(self) -> list[str]:
        names = [f"mfcc_{i}" for i in range(self.n_mfcc)]
        if self.include_extras:
            names.extend(EXTRA_NAMES)
        return names


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # [n_bins, n_frames] power
    sr: int
    n_fft: int
    hop: int

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_bins) * self.sr / self.n_fft

    def frame_times(self) -> np.ndarray:
        return np.arange(self.n_frames) * self.hop / self.sr


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple
    config_hash: str

    def __len__(self):
        return self.values.size

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.layout.index(name)])


# -- transforms ---------------------------------------------------------------

def fft(x: np.ndarray) -> np.ndarray:
    """Complex DFT of a real or complex sequence (numpy's pocketfft backend)."""
    return np.fft.fft(np.asarray(x))


def rfft(x: np.ndarray, n: Optional[int] = None, axis: int = -1) -> np.ndarray:
    return np.fft.rfft(x, n=n, axis=axis)


@lru_cache(maxsize=32)
def _dct_matrix(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    basis = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * m + 1) * k / (2 * n))
    basis[0] /= np.sqrt(2.0)
    basis.setflags(write=False)
    return basis


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis, rows are output coefficients."""
    return _dct_matrix(int(n))


def dct_ortho(x: np.ndarray, axis: int = 0) -> np.ndarray:
    x = np.moveaxis(np.asarray(x, dtype=float), axis, 0)
    return np.moveaxis(np.tensordot(dct_matrix(x.shape[0]), x, axes=1), 0, axis)


def idct_ortho(c: np.ndarray, axis: int = 0) -> np.ndarray:
    c = np.moveaxis(np.asarray(c, dtype=float), axis, 0)
    return np.moveaxis(np.tensordot(dct_matrix(c.shape[0]).T, c, axes=1), 0, axis)


# -- framing ------------------------------------------------------------------

def frame_signal(samples: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    """Centred, reflect-padded frames as a read-only [n_frames, n_fft] view."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ExtractionError("expected a non-empty 1-D signal")
    pad = n_fft // 2
    mode = "reflect" if x.size > 1 else "edge"
    padded = np.pad(x, (pad, n_fft - pad), mode=mode)
    return sliding_window_view(padded, n_fft)[::hop][: 1 + x.size // hop]


@lru_cache(maxsize=8)
def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window (the DFT-even form used for spectral analysis)."""
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    w.setflags(write=False)
    return w


def stft_power(samples: np.ndarray, config: FeatureConfig, window: str = "hann") -> Spectrogram:
    frames = frame_signal(samples, config.n_fft, config.hop)
    if window == "hann":
        frames = frames * hann_window(config.n_fft)
    elif window not in ("rect", "boxcar"):
        raise ConfigError(f"unknown window {window!r}")
    spec = np.abs(rfft(frames, axis=1)) ** 2
    return Spectrogram(np.ascontiguousarray(spec.T), config.sr, config.n_fft, config.hop)


# -- mel ----------------------------------------------------------------------

def hz_to_mel(hz):
    hz = np.asarray(hz, dtype=float)
    mel = 3.0 * hz / 200.0
    log_region = hz >= _MIN_LOG_HZ
    mel = np.where(log_region, _MIN_LOG_MEL + np.log(np.maximum(hz, 1e-300) / _MIN_LOG_HZ) / _LOGSTEP, mel)
    return mel if mel.ndim else float(mel)


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=float)
    hz = 200.0 * mel / 3.0
    hz = np.where(mel >= _MIN_LOG_MEL, _MIN_LOG_HZ * np.exp(_LOGSTEP * (mel - _MIN_LOG_MEL)), hz)
    return hz if hz.ndim else float(hz)


@lru_cache(maxsize=16)
def _mel_filterbank(sr: int, n_fft: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    fft_freqs = np.linspace(0, sr / 2, n_fft // 2 + 1)
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    widths = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if empty.size:
        raise ConfigError(
            f"{empty.size} of {n_mels} mel filters cover no FFT bin "
            f"(n_fft={n_fft} too small for n_mel_filters={n_mels})")
    weights.setflags(write=False)
    return weights


def mel_filterbank(config: FeatureConfig) -> np.ndarray:
    """[n_mel_filters, n_bins] Slaney-normalised triangular filterbank."""
    return _mel_filterbank(config.sr, config.n_fft, config.n_mel_filters,
                           float(config.fmin), config.max_frequency)


def power_to_db(power: np.ndarray) -> np.ndarray:
    """10*log10 with a floor, then each column clamped to ``TOP_DB`` below its peak."""
    db = 10.0 * np.log10(np.maximum(power, AMIN))
    return np.maximum(db, db.max(axis=0, keepdims=True) - TOP_DB)


def _mel_db_from_spec(spec: Spectrogram, config: FeatureConfig) -> np.ndarray:
    return power_to_db(mel_filterbank(config) @ spec.values)


def mel_db_frames(samples: np.ndarray, config: FeatureConfig) -> np.ndarray:
    return _mel_db_from_spec(stft_power(samples, config), config)


def _mfcc_from_mel_db(mel_db: np.ndarray, n_mfcc: int) -> np.ndarray:
    return dct_matrix(mel_db.shape[0])[:n_mfcc] @ mel_db


def _flux_from_mel_db(mel_db: np.ndarray) -> np.ndarray:
    flux = np.zeros(mel_db.shape[1])
    if mel_db.shape[1] > 1:
        flux[1:] = np.maximum(0.0, np.diff(mel_db, axis=1)).mean(axis=0)
    return flux


def mfcc_frames(samples: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """[n_mfcc, n_frames] cepstral coefficients 0..n_mfcc-1."""
    return _mfcc_from_mel_db(mel_db_frames(samples, config), config.n_mfcc)


def zcr_frames(samples: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Fraction of adjacent pairs per frame whose signs differ (0 counts as positive)."""
    negative = frame_signal(samples, config.n_fft, config.hop) < 0
    return (negative[:, 1:] != negative[:, :-1]).mean(axis=1)


def rmse_frames(samples: np.ndarray, config: FeatureConfig) -> np.ndarray:
    frames = frame_signal(samples, config.n_fft, config.hop)
    return np.sqrt(np.mean(frames ** 2, axis=1))


def spectral_flux_frames(samples: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Onset strength: mean half-wave-rectified rise of the dB mel spectrum, first frame 0."""
    return _flux_from_mel_db(mel_db_frames(samples, config))


def frame_features(samples: np.ndarray, config: FeatureConfig) -> dict:
    """All per-frame series from a single STFT pass."""
    samples = np.asarray(samples, dtype=np.float64)
    mel_db = mel_db_frames(samples, config)
    out = {"mfcc": _mfcc_from_mel_db(mel_db, config.n_mfcc)}
    if config.include_extras:
        out["zcr"] = zcr_frames(samples, config)
        out["rmse"] = rmse_frames(samples, config)
        out["sf"] = _flux_from_mel_db(mel_db)
    return out


def extract_segment(segment, config: FeatureConfig) -> FeatureVector:
    """Mean-pool every per-frame series into one vector.

    ``segment`` may be a :class:`~fluency.segmentation.Segment` or a bare
    sample array.
    """
    samples = getattr(segment, "samples", segment)
    series = frame_features(samples, config)
    parts = [series["mfcc"].mean(axis=1)]
    if config.include_extras:
        parts.append(np.array([series[k].mean() for k in EXTRA_NAMES]))
    values = np.concatenate(parts)
    if not np.all(np.isfinite(values)):
        source = getattr(segment, "source_id", "<array>")
        raise ExtractionError(f"{source}: non-finite feature values")
    return FeatureVector(values, tuple(config.feature_names()), config.config_hash())


def write_spectrogram_csv(path, spec: Spectrogram) -> None:
    """Dump a power spectrogram as a CSV matrix, one row per frequency bin."""
    np.savetxt(path, spec.values, delimiter=",", fmt="%.10g")
