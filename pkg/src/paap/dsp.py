"""Shared numerical primitives: framing, STFT, mel filterbank, LPC, DCT."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
import scipy.signal

from .errors import ArgumentError, DegenerateSignalError, NumericalInstabilityWarning

DEFAULT_HOP = 160
DEFAULT_WIN = 512


@dataclass(frozen=True)
class FrameSpec:
    """Analysis framing: hop and window in samples, periodic Hann window."""

    hop: int = DEFAULT_HOP
    win: int = DEFAULT_WIN
    fft_size: int = DEFAULT_WIN
    window: str = "hann"

    def __post_init__(self):
        if min(self.hop, self.win, self.fft_size) <= 0:
            raise ArgumentError(f"frame sizes must be positive: {self}")
        if not self.hop <= self.win <= self.fft_size:
            raise ArgumentError(f"require hop <= win <= fft_size, got {self}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        """Frame count under center padding: ``1 + n_samples // hop``."""
        return 1 + int(n_samples) // self.hop

    def to_dict(self) -> dict:
        return {"hop": self.hop, "win": self.win, "fft_size": self.fft_size, "window": self.window}


@dataclass(frozen=True)
class Spectrogram:
    frames: np.ndarray  # (N, fft_size // 2 + 1) magnitudes
    spec: FrameSpec
    sample_rate_hz: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def power(self) -> np.ndarray:
        return self.frames**2

    @property
    def freqs(self) -> np.ndarray:
        return bin_frequencies(self.spec, self.sample_rate_hz)


def bin_frequencies(spec: FrameSpec, sr: int) -> np.ndarray:
    return np.arange(spec.n_bins) * (sr / spec.fft_size)


@lru_cache(maxsize=32)
def _window_table(name: str, win: int, fft_size: int) -> np.ndarray:
    w = scipy.signal.get_window(name, win, fftbins=True)
    if fft_size > win:
        left = (fft_size - win) // 2
        w = np.pad(w, (left, fft_size - win - left))
    w.setflags(write=False)
    return w


def analysis_window(spec: FrameSpec) -> np.ndarray:
    """Periodic window of length ``fft_size`` (zero-padded around ``win``)."""
    return _window_table(spec.window, spec.win, spec.fft_size)


def frame_signal(samples, spec: FrameSpec) -> np.ndarray:
    """Reflect-pad by ``fft_size // 2`` and cut frames centred at ``i * hop``.

    Returns an (N, fft_size) array view-free copy, N = 1 + len // hop.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ArgumentError("framing needs a non-empty 1-D signal")
    half = spec.fft_size // 2
    padded = np.pad(x, half, mode="reflect")
    n = spec.n_frames(x.size)
    idx = np.arange(spec.fft_size)[None, :] + spec.hop * np.arange(n)[:, None]
    return padded[idx]


def stft(samples, spec: FrameSpec = FrameSpec(), sample_rate_hz: int = 16000) -> Spectrogram:
    """Magnitude STFT with reflect centre padding and a periodic Hann window."""
    if hasattr(samples, "samples"):
        sample_rate_hz = samples.sample_rate_hz
        samples = samples.samples
    frames = frame_signal(samples, spec) * analysis_window(spec)
    mags = np.abs(np.fft.rfft(frames, n=spec.fft_size, axis=1))
    return Spectrogram(mags, spec, int(sample_rate_hz))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int, fmin_hz: float, fmax_hz: float, spec: FrameSpec, sr: int) -> np.ndarray:
    """Triangular filters equally spaced on the mel scale, unit peak height.

    Returns an (n_mels, fft_size // 2 + 1) non-negative matrix.
    """
    if n_mels < 1:
        raise ArgumentError(f"n_mels must be >= 1, got {n_mels}")
    if not 0 <= fmin_hz < fmax_hz <= sr / 2:
        raise ArgumentError(f"invalid band edges [{fmin_hz}, {fmax_hz}] for sr={sr}")
    return _mel_filterbank(int(n_mels), float(fmin_hz), float(fmax_hz), spec.fft_size, int(sr)).copy()


@lru_cache(maxsize=16)
def _mel_filterbank(n_mels, fmin_hz, fmax_hz, fft_size, sr):
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    freqs = np.arange(fft_size // 2 + 1) * (sr / fft_size)
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (centre - lower)
    falling = (upper - freqs[None, :]) / (upper - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def mel_centers(n_mels: int, fmin_hz: float, fmax_hz: float) -> np.ndarray:
    return mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))[1:-1]


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """Biased autocorrelation r[0..max_lag] of a 1-D signal."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    nfft = scipy.fft.next_fast_len(n + max_lag + 1)
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    if max_lag >= n:
        r[n:] = 0.0
    return r


def levinson_recursion(autocorr):
    """Core Levinson-Durbin recursion.

    Returns ``(a, gain, reflection, order)`` where ``a`` are predictor
    coefficients (x[n] ~ sum_k a[k] x[n-1-k]) and ``order`` is the last order
    whose reflection coefficient satisfied |k| < 1. Coefficients beyond that
    order are zero.
    """
    r = np.asarray(autocorr, dtype=np.float64)
    if r.ndim != 1 or r.size < 1:
        raise ArgumentError("autocorrelation must be a non-empty 1-D sequence")
    if not np.isfinite(r[0]) or r[0] <= 0:
        raise DegenerateSignalError("autocorr[0] must be positive")
    p = r.size - 1
    a = np.zeros(p)
    ks = np.zeros(p)
    err = r[0]
    for m in range(p):
        acc = r[m + 1] - np.dot(a[:m], r[m:0:-1])
        k = acc / err
        if not np.isfinite(k) or abs(k) >= 1.0:
            return a, err, ks, m
        prev = a[:m].copy()
        a[:m] = prev - k * prev[::-1]
        a[m] = k
        ks[m] = k
        err *= 1.0 - k * k
    return a, err, ks, p


def levinson_durbin(autocorr):
    """Solve the order-p Toeplitz normal equations from r[0..p].

    Returns ``(lpc_coeffs, gain)`` with the convention
    ``x[n] ~ sum_k lpc_coeffs[k] * x[n-1-k]``; ``gain`` is the final
    prediction-error power. If the recursion becomes unstable the solution is
    truncated at the last stable order and a
    :class:`NumericalInstabilityWarning` is emitted.
    """
    a, gain, _, order = levinson_recursion(autocorr)
    if order < a.size:
        warnings.warn(
            f"reflection coefficient |k| >= 1 at order {order + 1}; truncated to order {order}",
            NumericalInstabilityWarning,
            stacklevel=2,
        )
    return a, float(gain)


def dct2(x, n_out: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II, first ``n_out`` coefficients (last axis)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 1:
        raise ArgumentError("dct2 needs at least one sample")
    n_out = n if n_out is None else int(n_out)
    if not 1 <= n_out <= n:
        raise ArgumentError(f"n_out must be in [1, {n}], got {n_out}")
    return scipy.fft.dct(x, type=2, norm="ortho", axis=-1)[..., :n_out]


def pre_emphasis(x, coeff: float = 0.97) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = x.copy()
    out[1:] -= coeff * x[:-1]
    return out
