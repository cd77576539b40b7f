"""Frame-wise extraction of the 25 acoustic low-level descriptors.

Every descriptor is computed on the same centre-padded frames as the STFT,
so the resulting matrix has ``1 + len(samples) // hop`` rows. Voicing-gated
descriptors are exactly 0 on unvoiced frames.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio_io import Waveform, to_canonical
from .dsp import (
    FrameSpec,
    Spectrogram,
    analysis_window,
    autocorrelation,
    bin_frequencies,
    dct2,
    frame_signal,
    levinson_recursion,
    mel_filterbank,
    pre_emphasis,
    stft,
)
from .errors import ArgumentError

PARAM_NAMES = (
    "F0semitone",
    "jitterLocal",
    "shimmerLocaldB",
    "loudness",
    "HNRdBACF",
    "alphaRatio",
    "hammarbergIndex",
    "slope0-500",
    "slope500-1500",
    "spectralFlux",
    "mfcc1",
    "mfcc2",
    "mfcc3",
    "mfcc4",
    "F1freq",
    "F1bw",
    "F1amplLogRelF0",
    "F2freq",
    "F2bw",
    "F2amplLogRelF0",
    "F3freq",
    "F3bw",
    "F3amplLogRelF0",
    "logRelF0-H1-H2",
    "logRelF0-H1-A3",
)
N_PARAMS = len(PARAM_NAMES)
COLUMN = {name: i for i, name in enumerate(PARAM_NAMES)}

# Columns forced to 0 whenever a frame is unvoiced.
VOICED_ONLY = (
    "F0semitone",
    "jitterLocal",
    "shimmerLocaldB",
    "HNRdBACF",
    "F1amplLogRelF0",
    "F2amplLogRelF0",
    "F3amplLogRelF0",
    "logRelF0-H1-H2",
    "logRelF0-H1-A3",
)

F0_MIN_HZ = 55.0
F0_MAX_HZ = 600.0
VOICING_THRESHOLD = 0.45
SEMITONE_REF_HZ = 27.5
SPECTRAL_FLOOR = 1e-10
N_MELS = 26
MEL_FMIN_HZ = 20.0
LOUDNESS_EXPONENT = 0.3
N_MFCC = 4
LPC_ORDER = 12
PRE_EMPHASIS = 0.97
FORMANT_FMIN_HZ = 90.0
FORMANT_FMAX_HZ = 5500.0
FORMANT_MAX_BW_HZ = 600.0
N_FORMANTS = 3
LPC_SINUSOID_ERROR = 1e-6
LPC_NOISE_FLOOR = 1e-4
F3_DEFAULT_REGION_HZ = (2000.0, 3500.0)
# Products of window energies below this are treated as silence.
_ENERGY_EPS = 1e-20


@dataclass(frozen=True, eq=False)
class AcousticParamMatrix:
    """N x 25 matrix of descriptor tracks in canonical column order."""

    values: np.ndarray
    param_names: tuple = PARAM_NAMES
    frame_spec: FrameSpec = field(default_factory=FrameSpec)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(self.param_names):
            raise ArgumentError(f"expected N x {len(self.param_names)} values, got shape {v.shape}")
        if tuple(self.param_names) != PARAM_NAMES:
            raise ArgumentError("parameter columns must follow the canonical order")
        if not np.all(np.isfinite(v)):
            raise ArgumentError("descriptor matrix contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "param_names", tuple(self.param_names))

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape

    def column(self, name: str) -> np.ndarray:
        return self.values[:, COLUMN[name]]


@dataclass(frozen=True, eq=False)
class VoicingTrack:
    f0_hz: np.ndarray
    voiced: np.ndarray
    confidence: np.ndarray

    @property
    def semitones(self) -> np.ndarray:
        out = np.zeros_like(self.f0_hz)
        v = self.voiced
        out[v] = 12.0 * np.log2(self.f0_hz[v] / SEMITONE_REF_HZ)
        return out


def _require_signal(w):
    if isinstance(w, Waveform):
        return w.samples, w.sample_rate_hz
    raise ArgumentError(f"expected a Waveform, got {type(w).__name__}")


def _centered(frames: np.ndarray) -> np.ndarray:
    return frames - frames.mean(axis=1, keepdims=True)


def _parabolic(y_m, y_0, y_p):
    """Vertex offset and height of the parabola through (-1, y_m), (0, y_0), (1, y_p)."""
    denom = y_m - 2.0 * y_0 + y_p
    if denom >= 0.0:
        return 0.0, y_0
    delta = 0.5 * (y_m - y_p) / denom
    delta = min(max(delta, -0.5), 0.5)
    return delta, y_0 - 0.25 * (y_m - y_p) * delta


def normalized_cross_correlation(frames: np.ndarray, min_lag: int, max_lag: int) -> np.ndarray:
    """NCCF between the frame head (length L - max_lag) and its lagged copies.

    Returns an (N, max_lag + 1) array; lags below ``min_lag`` are zeroed.
    """
    n_frames, length = frames.shape
    m = length - max_lag
    if m < 2:
        raise ArgumentError(f"frame of {length} samples too short for lag {max_lag}")
    nfft = 1 << int(np.ceil(np.log2(length + m)))
    spec_full = np.fft.rfft(frames, nfft, axis=1)
    spec_head = np.fft.rfft(frames[:, :m], nfft, axis=1)
    num = np.fft.irfft(spec_full * np.conj(spec_head), nfft, axis=1)[:, : max_lag + 1]
    csum = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(frames**2, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    e_lag = csum[:, lags + m] - csum[:, lags]
    e_head = e_lag[:, :1]
    denom = e_head * e_lag
    ok = denom > _ENERGY_EPS
    out = np.zeros_like(num)
    out[ok] = num[ok] / np.sqrt(denom[ok])
    out[:, :min_lag] = 0.0
    return np.clip(out, -1.0, 1.0)


def _pick_period(nccf_row: np.ndarray, min_lag: int, max_lag: int):
    """Shortest-lag local maximum within 90 % of the best one; returns (lag, peak)."""
    seg = nccf_row[min_lag - 1 : max_lag + 2] if min_lag >= 1 else nccf_row[: max_lag + 2]
    offset = min_lag - 1 if min_lag >= 1 else 0
    if seg.size < 3:
        return None
    interior = seg[1:-1]
    is_peak = (interior > seg[:-2]) & (interior >= seg[2:])
    peaks = np.flatnonzero(is_peak) + 1 + offset
    peaks = peaks[(peaks >= min_lag) & (peaks <= max_lag)]
    if peaks.size == 0:
        return None
    values = nccf_row[peaks]
    best = values.max()
    if best <= 0.0:
        return None
    lag = int(peaks[np.flatnonzero(values >= 0.9 * best)[0]])
    if lag + 1 < nccf_row.size:
        delta, peak = _parabolic(nccf_row[lag - 1], nccf_row[lag], nccf_row[lag + 1])
    else:
        delta, peak = 0.0, nccf_row[lag]
    return lag + delta, min(peak, 1.0)


def extract_f0(w: Waveform, spec: FrameSpec = FrameSpec()) -> VoicingTrack:
    """Autocorrelation pitch tracker over 55-600 Hz.

    Frames whose normalised correlation peak is below 0.45 are unvoiced
    (f0 = 0). The peak height is returned as the periodicity confidence.
    """
    x, sr = _require_signal(w)
    frames = _centered(frame_signal(x, spec))
    min_lag = int(np.ceil(sr / F0_MAX_HZ))
    max_lag = int(np.ceil(sr / F0_MIN_HZ))
    nccf = normalized_cross_correlation(frames, min_lag, max_lag)

    n = frames.shape[0]
    f0 = np.zeros(n)
    conf = np.zeros(n)
    for i in range(n):
        picked = _pick_period(nccf[i], min_lag, max_lag)
        if picked is None:
            continue
        lag, peak = picked
        conf[i] = max(peak, 0.0)
        if peak >= VOICING_THRESHOLD:
            f0[i] = min(max(sr / lag, F0_MIN_HZ), F0_MAX_HZ)
    return VoicingTrack(f0, f0 > 0, conf)


def _upward_crossings(s: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero((s[:-1] <= 0.0) & (s[1:] > 0.0))
    return idx + s[idx] / (s[idx] - s[idx + 1])


def _period_marks(s: np.ndarray, period: float) -> np.ndarray:
    """Chain of upward zero crossings spaced roughly one period apart."""
    crossings = _upward_crossings(s)
    if crossings.size == 0:
        return crossings
    marks = [crossings[0]]
    while True:
        target = marks[-1] + period
        window = crossings[(crossings > marks[-1] + 0.7 * period) & (crossings < marks[-1] + 1.3 * period)]
        if window.size == 0:
            break
        marks.append(window[np.argmin(np.abs(window - target))])
    return np.asarray(marks)


def _segment_peak(s: np.ndarray, start: float, stop: float) -> float:
    lo = int(np.ceil(start))
    hi = int(np.floor(stop)) + 1
    if hi - lo < 1:
        return 0.0
    k = lo + int(np.argmax(s[lo:hi]))
    if 0 < k < s.size - 1:
        return _parabolic(s[k - 1], s[k], s[k + 1])[1]
    return float(s[k])


def perturbation_from_frame(s: np.ndarray, f0_hz: float, sr: int):
    """Local jitter and shimmer (dB) of one mean-removed frame."""
    period = sr / f0_hz
    marks = _period_marks(s, period)
    if marks.size < 4:  # fewer than 3 complete periods
        return 0.0, 0.0
    periods = np.diff(marks)
    amps = np.array([_segment_peak(s, a, b) for a, b in zip(marks[:-1], marks[1:])])
    jitter = float(np.mean(np.abs(np.diff(periods))) / np.mean(periods))
    if np.any(amps <= 0.0):
        return jitter, 0.0
    shimmer = float(np.mean(np.abs(20.0 * np.log10(amps[1:] / amps[:-1]))))
    return jitter, shimmer


def extract_perturbation(w: Waveform, v: VoicingTrack, spec: FrameSpec = FrameSpec()):
    """Per-frame (jitterLocal, shimmerLocaldB); 0 on unvoiced frames."""
    x, sr = _require_signal(w)
    frames = _centered(frame_signal(x, spec))
    if frames.shape[0] != v.f0_hz.size:
        raise ArgumentError("voicing track does not match the waveform framing")
    jitter = np.zeros(frames.shape[0])
    shimmer = np.zeros(frames.shape[0])
    for i in np.flatnonzero(v.voiced):
        jitter[i], shimmer[i] = perturbation_from_frame(frames[i], v.f0_hz[i], sr)
    return jitter, shimmer


def mel_band_energies(spect: Spectrogram) -> np.ndarray:
    fb = mel_filterbank(N_MELS, MEL_FMIN_HZ, spect.sample_rate_hz / 2, spect.spec, spect.sample_rate_hz)
    return spect.power @ fb.T


def extract_loudness(spect: Spectrogram) -> np.ndarray:
    """Mean over 26 mel bands of band energy raised to 0.3."""
    return np.mean(mel_band_energies(spect) ** LOUDNESS_EXPONENT, axis=1)


def extract_mfcc(spect: Spectrogram) -> np.ndarray:
    """MFCC 1-4 from natural-log mel energies (coefficient 0 dropped)."""
    logmel = np.log(np.maximum(mel_band_energies(spect), SPECTRAL_FLOOR))
    # Coefficients >= 1 ignore a per-frame constant; removing it first makes
    # flat (e.g. silent) frames give exact zeros instead of rounding residue.
    logmel -= logmel.mean(axis=1, keepdims=True)
    return dct2(logmel, N_MFCC + 1)[:, 1:]


def _band(freqs, lo, hi):
    return (freqs >= lo) & (freqs < hi)


def _db(x):
    return 20.0 * np.log10(np.maximum(x, SPECTRAL_FLOOR))


def _ls_slope(freqs: np.ndarray, values: np.ndarray) -> np.ndarray:
    fc = freqs - freqs.mean()
    return (values - values.mean(axis=1, keepdims=True)) @ fc / np.dot(fc, fc)


def harmonic_level_db(mag_db: np.ndarray, freqs: np.ndarray, centre_hz: float, half_width_hz: float) -> float:
    """Peak level (dB) of the strongest bin near ``centre_hz``, parabolically refined."""
    bin_hz = freqs[1] - freqs[0]
    half = max(half_width_hz, 1.5 * bin_hz)
    sel = np.flatnonzero((freqs >= centre_hz - half) & (freqs <= centre_hz + half))
    if sel.size == 0:
        k = int(np.clip(round(centre_hz / bin_hz), 0, freqs.size - 1))
        return float(mag_db[k])
    k = int(sel[np.argmax(mag_db[sel])])
    if 0 < k < mag_db.size - 1:
        return float(_parabolic(mag_db[k - 1], mag_db[k], mag_db[k + 1])[1])
    return float(mag_db[k])


def _a3_level_db(mag_db, freqs, f0, f3_hz):
    if f3_hz > 0:
        lo, hi = 0.8 * f3_hz, 1.2 * f3_hz
    else:
        lo, hi = F3_DEFAULT_REGION_HZ
    nyq = freqs[-1]
    ks = np.arange(max(1, int(np.ceil(lo / f0))), int(np.floor(min(hi, nyq) / f0)) + 1)
    if ks.size == 0:
        k = max(1, int(round(0.5 * (lo + hi) / f0)))
        if k * f0 > nyq:
            k = max(1, int(nyq // f0))
        ks = np.array([k])
    return max(harmonic_level_db(mag_db, freqs, k * f0, 0.1 * f0) for k in ks)


def extract_spectral(spect: Spectrogram, v: VoicingTrack, f3_hz=None) -> dict:
    """Spectral-shape, flux, harmonic-difference and HNR columns.

    ``f3_hz`` (per frame, 0 where absent) centres the A3 search region at
    0.8-1.2 x F3; without it a fixed 2000-3500 Hz region is used.
    """
    mags = spect.frames
    power = spect.power
    freqs = spect.freqs
    n = spect.n_frames
    if v.f0_hz.size != n:
        raise ArgumentError("voicing track does not match the spectrogram")

    e_low = power[:, _band(freqs, 50.0, 1000.0)].sum(axis=1)
    e_high = power[:, _band(freqs, 1000.0, 5000.0)].sum(axis=1)
    alpha = 10.0 * np.log10(np.maximum(e_low, SPECTRAL_FLOOR) / np.maximum(e_high, SPECTRAL_FLOOR))

    m_low = mags[:, _band(freqs, 0.0, 2000.0)].max(axis=1)
    m_high = mags[:, _band(freqs, 2000.0, 5000.0)].max(axis=1)
    hammarberg = _db(m_low) - _db(m_high)

    mag_db = _db(mags)
    b1 = (freqs >= 0.0) & (freqs <= 500.0)
    b2 = (freqs >= 500.0) & (freqs <= 1500.0)
    slope1 = _ls_slope(freqs[b1], mag_db[:, b1])
    slope2 = _ls_slope(freqs[b2], mag_db[:, b2])

    totals = mags.sum(axis=1, keepdims=True)
    norm = np.divide(mags, totals, out=np.zeros_like(mags), where=totals > 0)
    flux = np.zeros(n)
    flux[1:] = np.sum(np.diff(norm, axis=0) ** 2, axis=1)

    h1h2 = np.zeros(n)
    h1a3 = np.zeros(n)
    hnr = np.zeros(n)
    f3 = np.zeros(n) if f3_hz is None else np.asarray(f3_hz, dtype=np.float64)
    for i in np.flatnonzero(v.voiced):
        f0 = v.f0_hz[i]
        h1 = harmonic_level_db(mag_db[i], freqs, f0, 0.1 * f0)
        h1h2[i] = h1 - harmonic_level_db(mag_db[i], freqs, 2.0 * f0, 0.2 * f0)
        h1a3[i] = h1 - _a3_level_db(mag_db[i], freqs, f0, f3[i])
        r = min(max(v.confidence[i], 1e-10), 1.0 - 1e-10)
        hnr[i] = float(np.clip(10.0 * np.log10(r / (1.0 - r)), -100.0, 100.0))

    return {
        "alphaRatio": alpha,
        "hammarbergIndex": hammarberg,
        "slope0-500": slope1,
        "slope500-1500": slope2,
        "spectralFlux": flux,
        "logRelF0-H1-H2": h1h2,
        "logRelF0-H1-A3": h1a3,
        "HNRdBACF": hnr,
    }


def lpc_formants(frame: np.ndarray, sr: int, order: int = LPC_ORDER):
    """Formant (frequency, bandwidth) pairs of one windowed frame, sorted by frequency.

    Returns an empty list for silent frames or an unstable recursion.
    """
    r = autocorrelation(frame, order)
    if r[0] <= _ENERGY_EPS:
        return []
    a, err, _, reached = levinson_recursion(r)
    if reached == order and err < LPC_SINUSOID_ERROR * r[0]:
        # Line spectrum: the order-p problem is rank deficient and spare
        # poles settle on the sinusoids. Re-solve with a -40 dB noise floor.
        r = r.copy()
        r[0] *= 1.0 + LPC_NOISE_FLOOR
        a, err, _, reached = levinson_recursion(r)
    if reached < order:
        return []
    roots = np.roots(np.concatenate(([1.0], -a)))
    roots = roots[roots.imag > 0]
    freqs = np.angle(roots) * sr / (2.0 * np.pi)
    with np.errstate(divide="ignore"):
        bws = -(sr / np.pi) * np.log(np.abs(roots))
    keep = (freqs >= FORMANT_FMIN_HZ) & (freqs <= FORMANT_FMAX_HZ) & (bws < FORMANT_MAX_BW_HZ)
    order_idx = np.argsort(freqs[keep], kind="stable")
    return list(zip(freqs[keep][order_idx], bws[keep][order_idx]))


def extract_formants(w: Waveform, spec: FrameSpec, v: VoicingTrack, spect: Spectrogram | None = None) -> dict:
    """F1-F3 frequency, bandwidth and level relative to H1 per frame."""
    x, sr = _require_signal(w)
    frames = frame_signal(pre_emphasis(x, PRE_EMPHASIS), spec) * analysis_window(spec)
    if spect is None:
        spect = stft(w, spec)
    n = frames.shape[0]
    if v.f0_hz.size != n:
        raise ArgumentError("voicing track does not match the waveform framing")
    freqs = spect.freqs
    out = {}
    for k in range(1, N_FORMANTS + 1):
        for suffix in ("freq", "bw", "amplLogRelF0"):
            out[f"F{k}{suffix}"] = np.zeros(n)
    for i in range(n):
        formants = lpc_formants(frames[i], sr)[:N_FORMANTS]
        if not formants:
            continue
        voiced = v.voiced[i]
        if voiced:
            f0 = v.f0_hz[i]
            mag_db = _db(spect.frames[i])
            h1 = harmonic_level_db(mag_db, freqs, f0, 0.1 * f0)
        for k, (f, bw) in enumerate(formants, start=1):
            out[f"F{k}freq"][i] = f
            out[f"F{k}bw"][i] = bw
            if voiced:
                out[f"F{k}amplLogRelF0"][i] = harmonic_level_db(mag_db, freqs, f, 0.5 * f0) - h1
    return out


def extract_all(w: Waveform, spec: FrameSpec = FrameSpec()) -> AcousticParamMatrix:
    """Compute the N x 25 descriptor matrix (resampling to 16 kHz first)."""
    w = to_canonical(w)
    if len(w) == 0:
        raise ArgumentError("cannot extract descriptors from an empty waveform")
    spect = stft(w, spec)
    voicing = extract_f0(w, spec)
    jitter, shimmer = extract_perturbation(w, voicing, spec)
    formants = extract_formants(w, spec, voicing, spect)
    spectral = extract_spectral(spect, voicing, f3_hz=formants["F3freq"])
    mfcc = extract_mfcc(spect)

    cols = {
        "F0semitone": voicing.semitones,
        "jitterLocal": jitter,
        "shimmerLocaldB": shimmer,
        "loudness": extract_loudness(spect),
        **spectral,
        **formants,
    }
    for k in range(N_MFCC):
        cols[f"mfcc{k + 1}"] = mfcc[:, k]
    values = np.column_stack([cols[name] for name in PARAM_NAMES])
    values[np.ix_(~voicing.voiced, [COLUMN[c] for c in VOICED_ONLY])] = 0.0
    return AcousticParamMatrix(values, PARAM_NAMES, spec)
