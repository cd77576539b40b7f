import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gauss_solve, naive_dct2_ortho, naive_dft_magnitude, toeplitz_lpc
from paap.dsp import (
    FrameSpec,
    analysis_window,
    autocorrelation,
    dct2,
    frame_signal,
    hz_to_mel,
    levinson_durbin,
    mel_centers,
    mel_filterbank,
    mel_to_hz,
    stft,
)
from paap.errors import ArgumentError, DegenerateSignalError, NumericalInstabilityWarning

SPEC = FrameSpec()


def test_framespec_validation():
    assert SPEC.hop == 160 and SPEC.win == 512 and SPEC.fft_size == 512
    for bad in ({"hop": 0}, {"hop": 600}, {"win": 1024}, {"hop": 10, "win": 8, "fft_size": 16}):
        with pytest.raises(ArgumentError):
            FrameSpec(**bad)


def test_frame_count_one_second():
    assert stft(np.zeros(16000), SPEC).n_frames == 101


@pytest.mark.parametrize("n", [1, 2, 159, 160, 161, 511, 512, 1000, 16001])
def test_frame_count_convention(n):
    x = np.random.default_rng(n).standard_normal(n)
    s = stft(x, SPEC)
    assert s.frames.shape == (1 + n // 160, 257)
    assert np.all(np.isfinite(s.frames)) and np.all(s.frames >= 0)


def test_empty_signal_rejected():
    with pytest.raises(ArgumentError):
        stft(np.zeros(0), SPEC)


def test_zero_signal_zero_magnitudes():
    assert not np.any(stft(np.zeros(4000), SPEC).frames)


def test_frames_centred_on_hop_multiples():
    x = np.arange(2000, dtype=float)
    frames = frame_signal(x, SPEC)
    for i in (2, 5, 9):
        assert frames[i, 256] == x[i * 160]


def test_window_is_periodic_hann():
    w = analysis_window(SPEC)
    n = np.arange(512)
    np.testing.assert_allclose(w, 0.5 - 0.5 * np.cos(2 * np.pi * n / 512), atol=1e-15)


def test_stft_matches_naive_dft():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(1200)
    s = stft(x, SPEC)
    frames = frame_signal(x, SPEC) * analysis_window(SPEC)
    for i in (0, 3, s.n_frames - 1):
        np.testing.assert_allclose(s.frames[i], naive_dft_magnitude(frames[i]), rtol=1e-9, atol=1e-9)


def test_1khz_sine_peak_bin():
    t = np.arange(16000) / 16000
    s = stft(np.sin(2 * np.pi * 1000 * t), SPEC)
    peaks = np.argmax(s.frames[3:-3], axis=1)
    assert np.all(peaks == 32)
    # naive DFT of one interior frame agrees on the peak
    frame = frame_signal(np.sin(2 * np.pi * 1000 * t), SPEC)[50] * analysis_window(SPEC)
    assert np.argmax(naive_dft_magnitude(frame)) == 32


def test_parseval_per_frame():
    x = np.random.default_rng(1).standard_normal(3000)
    s = stft(x, SPEC)
    frames = frame_signal(x, SPEC) * analysis_window(SPEC)
    # one-sided magnitudes: double every bin except DC and Nyquist
    weights = np.full(257, 2.0)
    weights[[0, -1]] = 1.0
    lhs = (s.frames**2 * weights).sum(axis=1) / 512
    np.testing.assert_allclose(lhs, (frames**2).sum(axis=1), rtol=1e-6)


def test_silence_prefix_shifts_frames():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(4000)
    k = 7
    shifted = np.concatenate([np.zeros(k * 160), x])
    a = stft(x, SPEC).frames
    b = stft(shifted, SPEC).frames
    # interior frames untouched by reflect padding at either edge
    np.testing.assert_allclose(b[k + 2 : k + 20], a[2:20], atol=1e-9)


def test_mel_scale_round_trip():
    f = np.array([0.0, 20.0, 700.0, 4000.0, 8000.0])
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-9)
    assert hz_to_mel(700.0) == pytest.approx(2595 * np.log10(2))


def test_mel_filterbank_coverage_and_shape():
    fb = mel_filterbank(26, 20.0, 8000.0, SPEC, 16000)
    assert fb.shape == (26, 257)
    assert np.all(fb >= 0)
    freqs = np.arange(257) * 16000 / 512
    inside = (freqs > 20.0) & (freqs < 8000.0)
    assert np.all(fb[:, inside].sum(axis=0) > 0)
    assert not np.any(fb[:, freqs < 20.0])


def test_mel_filterbank_single_band_peak():
    fb = mel_filterbank(1, 0.0, 8000.0, SPEC, 16000)
    mid_hz = mel_to_hz(hz_to_mel(8000.0) / 2)
    freqs = np.arange(257) * 16000 / 512
    assert abs(freqs[np.argmax(fb[0])] - mid_hz) <= 16000 / 512


def test_mel_centres_increase():
    c = mel_centers(26, 20.0, 8000.0)
    assert np.all(np.diff(c) > 0)
    fb = mel_filterbank(26, 20.0, 8000.0, SPEC, 16000)
    freqs = np.arange(257) * 16000 / 512
    assert np.all(np.diff(freqs[np.argmax(fb, axis=1)]) >= 0)


@pytest.mark.parametrize("args", [(0, 20, 8000), (26, 500, 400), (26, -1, 8000), (26, 20, 9000)])
def test_mel_filterbank_rejects_bad_edges(args):
    with pytest.raises(ArgumentError):
        mel_filterbank(args[0], args[1], args[2], SPEC, 16000)


def test_mel_filterbank_is_not_shared_mutable():
    fb = mel_filterbank(26, 20.0, 8000.0, SPEC, 16000)
    fb[:] = 0
    assert mel_filterbank(26, 20.0, 8000.0, SPEC, 16000).sum() > 0


def test_autocorrelation_direct():
    x = np.random.default_rng(3).standard_normal(50)
    r = autocorrelation(x, 10)
    direct = [np.dot(x[: 50 - k], x[k:]) for k in range(11)]
    np.testing.assert_allclose(r, direct, atol=1e-10)


def test_levinson_white_noise():
    r = np.zeros(13)
    r[0] = 2.5
    a, gain = levinson_durbin(r)
    np.testing.assert_array_equal(a, 0.0)
    assert gain == 2.5


def test_levinson_ar1():
    rng = np.random.default_rng(4)
    e = rng.standard_normal(200_000)
    x = np.zeros_like(e)
    for n in range(1, e.size):
        x[n] = 0.9 * x[n - 1] + e[n]
    a, gain = levinson_durbin(autocorrelation(x, 4) / x.size)
    assert a[0] == pytest.approx(0.9, abs=0.01)
    np.testing.assert_allclose(a[1:], 0.0, atol=0.01)
    assert gain == pytest.approx(1.0, rel=0.02)


def test_levinson_degenerate():
    with pytest.raises(DegenerateSignalError):
        levinson_durbin([0.0, 0.0])
    with pytest.raises(DegenerateSignalError):
        levinson_durbin([-1.0, 0.5])


def test_levinson_truncates_unstable():
    # r1 > r0 is not a valid autocorrelation: |k1| > 1 immediately
    with pytest.warns(NumericalInstabilityWarning):
        a, gain = levinson_durbin([1.0, 1.5, 0.2])
    np.testing.assert_array_equal(a, 0.0)
    assert gain == 1.0


def _random_spd_autocorr(rng, p):
    x = rng.standard_normal(p + 1 + rng.integers(5, 60))
    return autocorrelation(x, p)


def test_levinson_matches_gauss_1000_cases():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        p = int(rng.integers(1, 13))
        r = _random_spd_autocorr(rng, p)
        with warnings.catch_warnings():
            warnings.simplefilter("error", NumericalInstabilityWarning)
            a, gain = levinson_durbin(r)
        ref = toeplitz_lpc(r)
        np.testing.assert_allclose(a, ref, atol=1e-8 * max(1.0, np.abs(ref).max()))
        assert gain >= 0
        assert gain == pytest.approx(r[0] - np.dot(ref, r[1:]), rel=1e-7, abs=1e-10)


def test_dct_constant():
    c = dct2(np.full(8, 3.0))
    assert c[0] == pytest.approx(3.0 * np.sqrt(8))
    np.testing.assert_allclose(c[1:], 0.0, atol=1e-12)


def test_dct_of_basis_vector():
    n = 8
    t = np.arange(n)
    for k in range(n):
        scale = np.sqrt(1 / n) if k == 0 else np.sqrt(2 / n)
        basis = scale * np.cos(np.pi * k * (2 * t + 1) / (2 * n))
        out = dct2(basis)
        expected = np.zeros(n)
        expected[k] = 1.0
        np.testing.assert_allclose(out, expected, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=16), st.data())
def test_dct_matches_naive(xs, data):
    x = np.array(xs)
    n_out = data.draw(st.integers(1, len(xs)))
    np.testing.assert_allclose(dct2(x, n_out), naive_dct2_ortho(x)[:n_out], atol=1e-10 * max(1.0, np.abs(x).max()))


def test_dct_random_length8():
    x = np.random.default_rng(6).standard_normal(8)
    np.testing.assert_allclose(dct2(x), naive_dct2_ortho(x), atol=1e-10)


def test_dct_argument_checks():
    with pytest.raises(ArgumentError):
        dct2(np.zeros(0))
    with pytest.raises(ArgumentError):
        dct2(np.zeros(4), 5)
    with pytest.raises(ArgumentError):
        dct2(np.zeros(4), 0)


def test_gauss_oracle_sanity():
    A = np.array([[4.0, 1.0], [2.0, 3.0]])
    np.testing.assert_allclose(gauss_solve(A, [1.0, 2.0]), np.linalg.solve(A, [1.0, 2.0]))
