"""Phoneme-aligned acoustic parameter toolkit.

Frame-level acoustic descriptor extraction, phoneme-weight regression,
the phoneme-weighted descriptor loss and acoustic-improvement analysis.
"""
from .audio_io import Waveform, mix_at_snr, read_wav, resample, write_wav
from .dsp import FrameSpec, Spectrogram, dct2, levinson_durbin, mel_filterbank, stft
from .lld import PARAM_NAMES, AcousticParamMatrix, VoicingTrack, extract_all, extract_f0
from .estimator import EstimatorWeights, estimate_params, lstm_forward, make_backend
from .phonemes import DEFAULT_VOCAB, PhonemeLogits, PhonemeVocab, argmax_phonemes, parse_alignment, to_frame_logits
from .weights import APWeights, augment_bias, fit_weights
from .loss import PaapLossConfig, paap_loss, paap_loss_batch
from .analysis import PaapReport, build_report, emit_report, improvement_percent, mae_per_param, per_phoneme_improvement

__version__ = "0.1.0"

__all__ = [
    "APWeights", "AcousticParamMatrix", "DEFAULT_VOCAB", "EstimatorWeights", "FrameSpec", "PARAM_NAMES",
    "PaapLossConfig", "PaapReport", "PhonemeLogits", "PhonemeVocab", "Spectrogram", "VoicingTrack", "Waveform",
    "argmax_phonemes", "augment_bias", "build_report", "dct2", "emit_report", "estimate_params", "extract_all",
    "extract_f0", "fit_weights", "improvement_percent", "levinson_durbin", "lstm_forward", "mae_per_param",
    "make_backend", "mel_filterbank", "mix_at_snr", "paap_loss", "paap_loss_batch", "per_phoneme_improvement",
    "parse_alignment", "read_wav", "resample", "stft", "to_frame_logits", "write_wav",
]
