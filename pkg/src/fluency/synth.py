"""Synthetic speech-like corpus with fluency-dependent pauses and syllable rate.

A voiced span is a four-harmonic tone (1/k amplitudes) under a raised-cosine
syllabic envelope. Pauses are near-silent (noise at a per-segment level below 1e-4) and placed by a
renewal process: pause lengths are drawn until the segment's target pause
fraction is filled, then the voiced time is split at random between them.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audio_io import CANONICAL_SR, AudioBuffer, write_wav
from .errors import ConfigError, CorpusError
from .segmentation import (DEFAULT_SEGMENT_S, FluencyClass, FluencyLabel, Manifest,
                           ManifestEntry, write_manifest)

PEAK_AMPLITUDE = 0.7
N_HARMONICS = 4
# low-crest phase set (crest factor ~1.50 vs ~1.81 for all-zero phases)
HARMONIC_PHASES = (0.0, np.pi / 2, 0.0, np.pi / 2)
MODULATION_DEPTH = 0.5
RAMP_S = 0.010
# pause floor amplitude, drawn log-uniformly per segment
PAUSE_NOISE_RANGE = (1e-6, 1e-4)
PAUSE_LENGTH_S = (0.12, 0.45)
SPEAKER_BLOCK = 120  # segments per synthetic speaker (~10 min of audio)


@dataclass(frozen=True)
class ClassProfile:
    label: FluencyClass
    pause_fraction_range: tuple
    syllable_rate_range: tuple
    f0_range: tuple = (90.0, 250.0)
    n_segments: int = 100

    def __post_init__(self):
        for name in ("pause_fraction_range", "syllable_rate_range", "f0_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"{name} must satisfy lo < hi, got ({lo}, {hi})")
        lo, hi = self.pause_fraction_range
        if lo < 0 or hi > 1:
            raise ConfigError("pause_fraction_range must lie within [0, 1]")
        if self.syllable_rate_range[0] <= 0 or self.f0_range[0] <= 0:
            raise ConfigError("rates and f0 must be positive")


DEFAULT_PROFILES = (
    ClassProfile(FluencyClass.LOW, (0.35, 0.55), (1.5, 2.5), n_segments=374),
    ClassProfile(FluencyClass.INTERMEDIATE, (0.15, 0.30), (2.5, 4.0), n_segments=618),
    ClassProfile(FluencyClass.HIGH, (0.02, 0.10), (4.0, 6.0), n_segments=432),
)


def _voicing_gain(n: int, pause_samples: int, ramp: int, rng: np.random.Generator) -> np.ndarray:
    """0/1 voicing mask with linear ramps inside every voiced run's interior edges."""
    gain = np.ones(n)
    if pause_samples <= 0:
        return gain
    if pause_samples >= n:
        return np.zeros(n)
    lo, hi = (int(round(s * CANONICAL_SR)) for s in PAUSE_LENGTH_S)
    pauses = []
    left = pause_samples
    while left > 0:
        length = min(int(rng.integers(lo, hi + 1)), left)
        pauses.append(length)
        left -= length
    voiced = n - pause_samples
    cuts = np.sort(rng.integers(0, voiced + 1, size=len(pauses)))
    gaps = np.diff(np.concatenate([[0], cuts, [voiced]]))
    pos = 0
    for gap, length in zip(gaps, pauses):
        pos += gap
        gain[pos:pos + length] = 0.0
        pos += length

    # ramps only where a voiced run meets a pause, never at the segment edges
    edges = np.flatnonzero(np.diff(gain))
    up = np.linspace(0.0, 1.0, ramp + 2)[1:-1]
    for e in edges:
        if gain[e] == 0:    # pause -> voiced at e+1
            run_end = e + 1 + ramp
            seg = gain[e + 1:run_end]
            gain[e + 1:e + 1 + seg.size] = np.minimum(seg, up[:seg.size])
        else:               # voiced -> pause after e
            start = max(0, e + 1 - ramp)
            seg = gain[start:e + 1]
            gain[start:e + 1] = np.minimum(seg, up[::-1][-seg.size:])
    return gain


def generate_segment(profile: ClassProfile, seed, sr: int = CANONICAL_SR,
                     duration_s: float = DEFAULT_SEGMENT_S,
                     pause_fraction: Optional[float] = None, return_params: bool = False):
    """One synthetic segment of ``duration_s`` seconds.

    ``pause_fraction`` overrides the profile's draw. With ``return_params``
    the drawn ``pause_fraction``, ``syllable_rate`` and ``f0`` come back too.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sr))
    p_draw = rng.uniform(*profile.pause_fraction_range)
    p = p_draw if pause_fraction is None else float(pause_fraction)
    rate = rng.uniform(*profile.syllable_rate_range)
    f0 = rng.uniform(*profile.f0_range)
    am_phase = rng.uniform(0, 2 * np.pi)
    floor = np.exp(rng.uniform(*np.log(PAUSE_NOISE_RANGE)))

    t = np.arange(n) / sr
    carrier = sum(np.sin(2 * np.pi * k * f0 * t + HARMONIC_PHASES[k - 1]) / k
                  for k in range(1, N_HARMONICS + 1))
    envelope = 1.0 - MODULATION_DEPTH * 0.5 * (1.0 + np.cos(2 * np.pi * rate * t + am_phase))
    gain = _voicing_gain(n, int(round(p * n)), int(round(RAMP_S * sr)), rng)
    voiced = carrier * envelope * gain
    peak = np.abs(voiced).max()
    if peak > 0:
        voiced *= PEAK_AMPLITUDE / peak
    noise = rng.uniform(-floor, floor, n) * (1.0 - gain)
    x = voiced + noise
    if return_params:
        return x, {"pause_fraction": p, "syllable_rate": rate, "f0": f0}
    return x


def measured_pause_fraction(x: np.ndarray, sr: int = CANONICAL_SR, window_s: float = 0.010,
                            threshold: float = 1e-3) -> float:
    """Fraction of non-overlapping 10 ms windows whose RMS is below ``threshold``."""
    w = int(round(window_s * sr))
    frames = x[: x.size // w * w].reshape(-1, w)
    return float(np.mean(np.sqrt(np.mean(frames ** 2, axis=1)) < threshold))


def _write_one(args):
    profile, seed, index, path = args
    x = generate_segment(profile, (seed, int(profile.label), index))
    try:
        write_wav(path, AudioBuffer(x, CANONICAL_SR, str(path)))
    except OSError as exc:
        raise CorpusError(f"{path}: {exc.strerror or exc}") from exc


def generate_corpus(out_dir, profiles: Sequence[ClassProfile] = DEFAULT_PROFILES,
                    n_per_class: Optional[Sequence[int]] = None, seed: int = 42,
                    jobs: int = 1) -> Manifest:
    """Write one 5 s WAV per segment plus ``manifest.csv`` under ``out_dir``.

    ``n_per_class`` overrides each profile's ``n_segments``. File ``i`` of
    class ``c`` is generated from ``default_rng((seed, c, i))``, so output is
    byte-identical for a fixed seed regardless of ``jobs``.
    """
    out = Path(out_dir)
    counts = [p.n_segments for p in profiles] if n_per_class is None else list(n_per_class)
    if len(counts) != len(profiles):
        raise ConfigError("n_per_class needs one count per profile")
    wav_dir = out / "wav"
    try:
        wav_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(wav_dir, os.W_OK):
            raise PermissionError(13, "Permission denied")
    except OSError as exc:
        raise CorpusError(f"{wav_dir}: {exc.strerror or exc}") from exc

    tasks, entries = [], []
    for profile, count in zip(profiles, counts):
        name = profile.label.name.lower()
        for i in range(count):
            path = wav_dir / f"{name}_{i:04d}.wav"
            tasks.append((profile, seed, i, path))
            speaker = f"syn-{name}-{i // SPEAKER_BLOCK:02d}"
            entries.append(ManifestEntry(path, speaker, FluencyLabel(profile.label), None, len(entries) + 1))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_write_one, tasks, chunksize=32))
    else:
        for task in tasks:
            _write_one(task)

    manifest_path = out / "manifest.csv"
    try:
        write_manifest(manifest_path, entries, root=out)
    except OSError as exc:
        raise CorpusError(f"{manifest_path}: {exc.strerror or exc}") from exc
    return Manifest(entries, root=out)
