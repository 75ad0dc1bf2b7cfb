"""WAV decoding/encoding, mono downmix and band-limited resampling.

Only RIFF/WAVE with 16-bit integer PCM or 32-bit IEEE float payloads is
accepted. Anything compressed (MP3 in a WAV wrapper, ADPCM, ...) raises
:class:`UnsupportedFormat`; transcode such files externally first.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DecodeError, UnsupportedFormat

CANONICAL_SR = 22050

PCM_DIVISOR = 32768.0

_FMT_PCM = 0x0001
_FMT_FLOAT = 0x0003
_FMT_MP3 = 0x0055
_FMT_MPEG = 0x0050
_FMT_EXTENSIBLE = 0xFFFE

_MIN_SR, _MAX_SR = 8000, 192000


@dataclass(frozen=True)
class AudioBuffer:
    """Decoded audio.

    ``samples`` is a 1-D float64 array. For ``channels > 1`` it holds the
    frames interleaved exactly as stored in the file (L, R, L, R, ...);
    call :func:`downmix_mono` to get the canonical single-channel form.
    """

    samples: np.ndarray
    sample_rate: int
    source_id: str = "<memory>"
    channels: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.channels < 1:
            raise ConfigError(f"channels must be >= 1, got {self.channels}")
        if self.samples.ndim != 1 or self.samples.size % self.channels:
            raise ConfigError("samples must be 1-D with a whole number of frames")

    @property
    def n_frames(self) -> int:
        return self.samples.size // self.channels

    @property
    def duration_seconds(self) -> float:
        return self.n_frames / self.sample_rate


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        yield cid, body_start, size
        pos = body_start + size + (size & 1)


def _parse_fmt(body: bytes):
    if len(body) < 16:
        raise DecodeError("fmt chunk shorter than 16 bytes")
    code, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", body)
    if code == _FMT_EXTENSIBLE:
        if len(body) < 40:
            raise DecodeError("WAVE_FORMAT_EXTENSIBLE fmt chunk truncated")
        # first two bytes of the sub-format GUID carry the real format code
        (code,) = struct.unpack_from("<H", body, 24)
    return code, channels, rate, block_align, bits


def decode_wav(data: bytes, source_id: str = "<bytes>") -> AudioBuffer:
    """Decode a RIFF/WAVE byte string into an :class:`AudioBuffer`.

    16-bit PCM is divided by 32768; float payloads are clipped to [-1, 1].
    Multi-channel input stays interleaved (see ``AudioBuffer.channels``).
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise DecodeError(f"{source_id}: not a RIFF/WAVE container")

    fmt = None
    payload = None
    for cid, start, size in _iter_chunks(data):
        if cid == b"fmt ":
            if start + size > len(data):
                raise DecodeError(f"{source_id}: fmt chunk truncated")
            fmt = _parse_fmt(data[start:start + size])
        elif cid == b"data":
            if start + size > len(data):
                raise DecodeError(
                    f"{source_id}: data chunk declares {size} bytes, "
                    f"only {len(data) - start} present"
                )
            payload = data[start:start + size]
            if fmt is not None:
                break
    if fmt is None:
        raise DecodeError(f"{source_id}: missing fmt chunk")
    if payload is None:
        raise DecodeError(f"{source_id}: missing data chunk")

    code, channels, rate, block_align, bits = fmt
    if code in (_FMT_MP3, _FMT_MPEG):
        raise UnsupportedFormat(f"{source_id}: MPEG-compressed payload; transcode to PCM WAV")
    if code == _FMT_PCM and bits == 16:
        dtype = np.dtype("<i2")
    elif code == _FMT_FLOAT and bits == 32:
        dtype = np.dtype("<f4")
    else:
        raise UnsupportedFormat(f"{source_id}: format code {code:#06x} with {bits} bits per sample")
    if not 1 <= channels <= 2:
        raise UnsupportedFormat(f"{source_id}: {channels} channels (only mono/stereo supported)")
    if not _MIN_SR <= rate <= _MAX_SR:
        raise UnsupportedFormat(f"{source_id}: sample rate {rate} Hz outside [{_MIN_SR}, {_MAX_SR}]")
    if block_align != channels * dtype.itemsize:
        raise DecodeError(f"{source_id}: block_align {block_align} inconsistent with format")
    if len(payload) % block_align:
        raise DecodeError(f"{source_id}: data chunk ends mid-frame")

    raw = np.frombuffer(payload, dtype=dtype)
    if dtype.kind == "i":
        samples = raw.astype(np.float64) / PCM_DIVISOR
    else:
        samples = np.clip(raw.astype(np.float64), -1.0, 1.0)
        if not np.all(np.isfinite(samples)):
            raise DecodeError(f"{source_id}: non-finite float samples")
    return AudioBuffer(samples, int(rate), source_id, int(channels))


def read_wav(path) -> AudioBuffer:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DecodeError(f"{path}: {exc.strerror or exc}") from exc
    return decode_wav(data, source_id=str(path))


def encode_wav(buffer: AudioBuffer) -> bytes:
    """Encode as 16-bit PCM, keeping the buffer's channel count and rate."""
    scaled = np.round(np.clip(buffer.samples, -1.0, 1.0) * PCM_DIVISOR)
    pcm = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
    block_align = 2 * buffer.channels
    fmt = struct.pack(
        "<HHIIHH", _FMT_PCM, buffer.channels, buffer.sample_rate,
        buffer.sample_rate * block_align, block_align, 16,
    )
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(pcm)) + pcm
    if len(pcm) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def write_wav(path, buffer: AudioBuffer) -> None:
    Path(path).write_bytes(encode_wav(buffer))


def downmix_mono(buffer: AudioBuffer) -> AudioBuffer:
    """Average the channels of an interleaved buffer. Mono input is returned as-is."""
    if buffer.channels == 1:
        return buffer
    frames = buffer.samples.reshape(-1, buffer.channels)
    return AudioBuffer(frames.mean(axis=1), buffer.sample_rate, buffer.source_id, 1)


def _kaiser_sinc(dist: np.ndarray, scale: float, half_width: float, beta: float) -> np.ndarray:
    x = dist / half_width
    inside = np.abs(x) <= 1.0
    w = np.zeros_like(dist)
    w[inside] = np.i0(beta * np.sqrt(1.0 - x[inside] ** 2)) / np.i0(beta)
    return scale * np.sinc(scale * dist) * w


def resample(buffer: AudioBuffer, target_sr: int, num_zeros: int = 32,
             beta: float = 8.6) -> AudioBuffer:
    """Windowed-sinc resampling of a mono buffer.

    The Kaiser-windowed sinc low-passes at the smaller of the two Nyquist
    frequencies, so content above the target Nyquist is attenuated rather
    than aliased. Output length is ``round(n * target_sr / sample_rate)``;
    the signal is treated as zero outside its support.
    """
    if target_sr <= 0:
        raise ConfigError(f"target_sr must be positive, got {target_sr}")
    if buffer.channels != 1:
        raise ConfigError("resample expects a mono buffer; call downmix_mono first")
    src = buffer.sample_rate
    if target_sr == src:
        return buffer

    x = buffer.samples
    n_out = int(round(x.size * target_sr / src))
    g = math.gcd(src, target_sr)
    up, down = target_sr // g, src // g
    scale = min(1.0, target_sr / src)
    half_width = num_zeros / scale
    reach = int(math.ceil(half_width)) + 1
    taps = np.arange(-reach, reach + 1)

    # the fractional input position of output n depends only on n mod up
    n_phases = min(up, max(n_out, 1))
    frac = (np.arange(n_phases) * down % up) / up
    table = _kaiser_sinc(frac[:, None] - taps[None, :], scale, half_width, beta)

    xpad = np.concatenate([np.zeros(reach), x, np.zeros(reach + 1)])
    out = np.empty(n_out)
    chunk = max(1, 2_000_000 // taps.size)
    for start in range(0, n_out, chunk):
        n = np.arange(start, min(start + chunk, n_out))
        base = n * down // up
        idx = base[:, None] + taps[None, :] + reach
        out[n] = np.einsum("ij,ij->i", table[n % up], xpad[idx])
    return AudioBuffer(out, int(target_sr), buffer.source_id, 1)


def load_canonical(path, target_sr: int = CANONICAL_SR) -> AudioBuffer:
    """read → downmix → resample, the ingestion path used by the dataset builder."""
    return resample(downmix_mono(read_wav(path)), target_sr)
