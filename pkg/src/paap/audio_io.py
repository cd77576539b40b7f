"""WAV reading/writing, resampling and SNR mixing."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.io.wavfile
import scipy.signal

from .errors import ArgumentError, DegenerateSignalError, UnsupportedCodecError, WavFormatError

CANONICAL_RATE = 16000


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono float64 samples at a known sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = CANONICAL_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ArgumentError(f"waveform must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ArgumentError("waveform contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise ArgumentError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


def read_wav(path) -> Waveform:
    """Read a PCM16 or float32 RIFF/WAVE file as a mono waveform.

    Channels are averaged; PCM16 is divided by 32768.
    """
    try:
        sr, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as exc:
        msg = str(exc)
        if "Unknown wave file format" in msg or "Unsupported bit depth" in msg:
            raise UnsupportedCodecError(f"{path}: {msg}") from exc
        raise WavFormatError(f"{path}: {msg}") from exc
    except (EOFError, OSError, struct.error) as exc:
        raise WavFormatError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise UnsupportedCodecError(f"{path}: unsupported sample type {data.dtype}; expected PCM16 or float32")
    if x.ndim == 2:
        x = x.mean(axis=1)
    if x.size and not np.all(np.isfinite(x)):
        raise WavFormatError(f"{path}: non-finite samples")
    return Waveform(x, int(sr))


def write_wav(path, w: Waveform, encoding: str = "pcm16") -> None:
    """Write a mono waveform; PCM16 clips to [-1, 1) and rounds."""
    if encoding == "pcm16":
        data = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    elif encoding == "float32":
        data = w.samples.astype("<f4")
    else:
        raise ArgumentError(f"unknown encoding {encoding!r}; use 'pcm16' or 'float32'")
    scipy.io.wavfile.write(path, w.sample_rate_hz, data)


def resample(w: Waveform, target_hz: int) -> Waveform:
    """Band-limited polyphase resampling (Kaiser-windowed sinc FIR)."""
    target_hz = int(target_hz)
    if target_hz <= 0:
        raise ArgumentError(f"target rate must be positive, got {target_hz}")
    if target_hz == w.sample_rate_hz:
        return Waveform(w.samples.copy(), target_hz)
    ratio = Fraction(target_hz, w.sample_rate_hz)
    y = scipy.signal.resample_poly(w.samples, ratio.numerator, ratio.denominator)
    return Waveform(y, target_hz)


def to_canonical(w: Waveform) -> Waveform:
    return w if w.sample_rate_hz == CANONICAL_RATE else resample(w, CANONICAL_RATE)


def rms(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return math.sqrt(float(np.mean(x * x))) if x.size else 0.0


def noise_gain(clean: Waveform, noise: Waveform, snr_db: float) -> float:
    """Gain g such that clean + g * noise[:len(clean)] has the requested SNR."""
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise ArgumentError(
            f"sample rates differ: clean {clean.sample_rate_hz} Hz, noise {noise.sample_rate_hz} Hz"
        )
    if len(noise) < len(clean):
        raise ArgumentError(f"noise ({len(noise)} samples) shorter than clean ({len(clean)} samples)")
    rc = rms(clean.samples)
    rn = rms(noise.samples[: len(clean)])
    if rc == 0.0 or rn == 0.0:
        raise DegenerateSignalError("clean and noise must both have non-zero RMS")
    return (rc / rn) * 10.0 ** (-float(snr_db) / 20.0)


def mix_at_snr(clean: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Add noise (truncated to the clean length) at ``snr_db`` over the utterance.

    Raw amplitudes are mixed; no loudness normalisation or clipping is applied.
    """
    g = noise_gain(clean, noise, snr_db)
    return Waveform(clean.samples + g * noise.samples[: len(clean)], clean.sample_rate_hz)


def measured_snr_db(clean, noise_component) -> float:
    pc = float(np.mean(np.square(np.asarray(clean, dtype=np.float64))))
    pn = float(np.mean(np.square(np.asarray(noise_component, dtype=np.float64))))
    return 10.0 * math.log10(pc / pn)
