"""Deterministic synthetic speech-like utterances with phoneme intervals.

Used for tests, the acceptance suite and the bundled golden fixture set.
Vowels and nasals are pulse trains through formant resonators, fricatives are
band-passed noise and plosives are a closure followed by a noise burst.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.signal

from .audio_io import Waveform, mix_at_snr, write_wav

SR = 16000

VOWEL_FORMANTS = {
    "AA": (730, 1090, 2440),
    "AE": (660, 1720, 2410),
    "AH": (640, 1190, 2390),
    "EH": (530, 1840, 2480),
    "ER": (490, 1350, 1690),
    "IH": (390, 1990, 2550),
    "IY": (270, 2290, 3010),
    "UW": (300, 870, 2240),
    "OW": (500, 900, 2400),
}
NASAL_FORMANTS = {"M": (280, 1000, 2200), "N": (280, 1700, 2600), "NG": (280, 2200, 2800)}
FRICATIVE_BANDS = {"S": (4000, 7500), "SH": (2200, 5000), "F": (1500, 7500), "HH": (400, 6000), "Z": (3800, 7500)}
PLOSIVE_BANDS = {"P": (300, 3000), "T": (2500, 7000), "K": (1500, 3500), "B": (200, 2500), "D": (2000, 6000), "G": (1200, 3000)}
LIQUID_FORMANTS = {"L": (360, 1300, 2800), "R": (420, 1300, 1600), "W": (300, 700, 2200), "Y": (280, 2200, 3000)}


def _resonators(formants, bandwidths=(80.0, 100.0, 140.0)):
    a = np.array([1.0])
    for f, bw in zip(formants, bandwidths):
        r = np.exp(-np.pi * bw / SR)
        a = np.convolve(a, [1.0, -2.0 * r * np.cos(2 * np.pi * f / SR), r * r])
    return a


def _pulse_train(n, f0_start, f0_end, rng):
    f0 = np.linspace(f0_start, f0_end, n) * (1.0 + 0.003 * rng.standard_normal())
    phase = np.cumsum(f0 / SR)
    pulses = np.zeros(n)
    pulses[np.flatnonzero(np.diff(np.floor(phase), prepend=0.0) > 0)] = 1.0
    # -12 dB/octave glottal source
    return scipy.signal.lfilter([1.0], [1.0, -1.9, 0.9025], pulses)


def _voiced(n, formants, f0, rng, level):
    src = _pulse_train(n, f0, f0 * (1.0 + 0.1 * rng.uniform(-1, 1)), rng)
    y = scipy.signal.lfilter([1.0], _resonators(formants), src)
    y = scipy.signal.lfilter([1.0, -1.0], [1.0], y)  # lip radiation
    return level * y / (np.max(np.abs(y)) + 1e-12)


def _band_noise(n, band, rng, level):
    lo, hi = band
    sos = scipy.signal.butter(4, [lo, min(hi, SR / 2 - 100)], btype="bandpass", fs=SR, output="sos")
    y = scipy.signal.sosfilt(sos, rng.standard_normal(n))
    return level * y / (np.max(np.abs(y)) + 1e-12)


def _ramp(y, ms=8.0):
    k = min(int(SR * ms / 1000), y.size // 2)
    if k > 0:
        w = np.hanning(2 * k)
        y[:k] *= w[:k]
        y[-k:] *= w[k:]
    return y


def synth_segment(label: str, n: int, rng, f0: float) -> np.ndarray:
    if label == "SIL":
        return np.zeros(n)
    if label in VOWEL_FORMANTS:
        return _ramp(_voiced(n, VOWEL_FORMANTS[label], f0, rng, 0.6))
    if label in NASAL_FORMANTS:
        return _ramp(_voiced(n, NASAL_FORMANTS[label], f0, rng, 0.25))
    if label in LIQUID_FORMANTS:
        return _ramp(_voiced(n, LIQUID_FORMANTS[label], f0, rng, 0.4))
    if label in FRICATIVE_BANDS:
        level = 0.08 if label == "HH" else 0.2
        return _ramp(_band_noise(n, FRICATIVE_BANDS[label], rng, level))
    if label in PLOSIVE_BANDS:
        y = np.zeros(n)
        burst = min(n // 3, int(0.02 * SR))
        y[n - burst :] = _ramp(_band_noise(burst, PLOSIVE_BANDS[label], rng, 0.5), ms=2.0)
        return y
    raise KeyError(label)


CONSONANTS = tuple(NASAL_FORMANTS) + tuple(FRICATIVE_BANDS) + tuple(PLOSIVE_BANDS) + tuple(LIQUID_FORMANTS)
VOWELS = tuple(VOWEL_FORMANTS)


def synth_utterance(rng: np.random.Generator, n_syllables: int = 4):
    """Return ``(Waveform, intervals)`` for SIL (C V)* SIL with random phonemes."""
    f0 = rng.uniform(95.0, 220.0)
    labels = ["SIL"]
    durations = [rng.uniform(0.08, 0.15)]
    for _ in range(n_syllables):
        c = CONSONANTS[rng.integers(len(CONSONANTS))]
        v = VOWELS[rng.integers(len(VOWELS))]
        labels += [c, v]
        durations += [rng.uniform(0.05, 0.1) if c in PLOSIVE_BANDS else rng.uniform(0.06, 0.12), rng.uniform(0.1, 0.2)]
    labels.append("SIL")
    durations.append(rng.uniform(0.08, 0.15))

    segments = []
    intervals = []
    t = 0
    for label, dur in zip(labels, durations):
        n = int(round(dur * SR))
        segments.append(synth_segment(label, n, rng, f0))
        intervals.append({"phoneme": label, "start_s": t / SR, "end_s": (t + n) / SR})
        t += n
    return Waveform(np.concatenate(segments), SR), intervals


def white_noise(rng: np.random.Generator, n: int, level: float = 0.1) -> Waveform:
    return Waveform(level * rng.standard_normal(n), SR)


def fixture_set(n_utterances: int, seed: int, snr_db=(10.0,), n_syllables: int = 4):
    """Synthetic corpus: each item has the clean waveform, its intervals and
    one noisy mixture per requested SNR (fresh white noise each time)."""
    rng = np.random.default_rng(seed)
    items = []
    for u in range(n_utterances):
        clean, intervals = synth_utterance(rng, n_syllables)
        mixes = {}
        for snr in snr_db:
            noise = white_noise(rng, len(clean))
            mixes[float(snr)] = mix_at_snr(clean, noise, snr)
        items.append({"name": f"utt{u:02d}", "clean": clean, "intervals": intervals, "mixtures": mixes})
    return items


def write_alignment(path, intervals, sample_rate: int = SR) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"sample_rate": sample_rate, "intervals": intervals}, fh, indent=1)
        fh.write("\n")


def write_golden_corpus(out_dir, n_utterances: int = 3, seed: int = 2023) -> Path:
    """Write clean/, enhanced/ (20 dB), baseline/ (5 dB) and alignments/ folders."""
    out = Path(out_dir)
    for sub in ("clean", "enhanced", "baseline", "alignments"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for item in fixture_set(n_utterances, seed, snr_db=(20.0, 5.0)):
        name = item["name"]
        write_wav(out / "clean" / f"{name}.wav", _fit(item["clean"]))
        write_wav(out / "enhanced" / f"{name}.wav", _fit(item["mixtures"][20.0]))
        write_wav(out / "baseline" / f"{name}.wav", _fit(item["mixtures"][5.0]))
        write_alignment(out / "alignments" / f"{name}.json", item["intervals"])
    return out


def _fit(w: Waveform) -> Waveform:
    peak = np.max(np.abs(w.samples))
    return w if peak <= 0.99 else Waveform(w.samples * (0.99 / peak), w.sample_rate_hz)
