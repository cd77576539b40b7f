"""Phoneme-weighted squared descriptor error between enhanced and clean speech."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .weights import APWeights, augment_bias

WEIGHT_MODES = ("literal", "absolute")
DEFAULT_AUX_SCALE = 0.1


@dataclass(frozen=True)
class PaapLossConfig:
    """``literal`` uses the fitted weights as-is (contributions may be negative);
    ``absolute`` uses their magnitudes so the loss is never negative."""

    weight_mode: str = "literal"
    aux_scale: float = DEFAULT_AUX_SCALE

    def __post_init__(self):
        if self.weight_mode not in WEIGHT_MODES:
            raise ArgumentError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")
        if not self.aux_scale >= 0:
            raise ArgumentError(f"aux_scale must be >= 0, got {self.aux_scale}")


def _matrix(m):
    return m.values if hasattr(m, "values") else np.asarray(m, dtype=np.float64)


def frame_contributions(D_E, D_C, phoneme_idx, w: APWeights, cfg: PaapLossConfig = PaapLossConfig()) -> np.ndarray:
    """Per-frame terms ``(d_E - d_C)^2 . w_j`` on bias-augmented rows."""
    e = augment_bias(_matrix(D_E))
    c = augment_bias(_matrix(D_C))
    idx = np.asarray(phoneme_idx)
    if e.shape != c.shape:
        raise ArgumentError(f"enhanced {e.shape[0]}x{e.shape[1] - 1} and clean {c.shape[0]}x{c.shape[1] - 1} differ")
    if idx.ndim != 1 or idx.size != e.shape[0]:
        raise ArgumentError(f"{idx.size} phoneme indices for {e.shape[0]} frames")
    if e.shape[0] == 0:
        raise ArgumentError("loss needs at least one frame")
    if e.shape[1] != w.values.shape[0]:
        raise ArgumentError(f"weights have {w.values.shape[0]} rows, descriptors give {e.shape[1]} with bias")
    n_classes = w.values.shape[1]
    bad = np.flatnonzero((idx < 0) | (idx >= n_classes))
    if bad.size:
        raise ArgumentError(f"phoneme index {int(idx[bad[0]])} at frame {int(bad[0])} outside [0, {n_classes - 1}]")
    weights = w.values if cfg.weight_mode == "literal" else np.abs(w.values)
    sq = (e - c) ** 2
    return np.einsum("ik,ik->i", sq, weights[:, idx.astype(np.int64)].T)


def paap_loss(D_E, D_C, phoneme_idx, w: APWeights, cfg: PaapLossConfig = PaapLossConfig()) -> float:
    """Mean over frames of the phoneme-weighted squared descriptor difference."""
    terms = frame_contributions(D_E, D_C, phoneme_idx, w, cfg)
    return float(np.sum(terms) / terms.size)


def paap_loss_batch(pairs, w: APWeights, cfg: PaapLossConfig = PaapLossConfig()):
    """Per-utterance losses and the frame-weighted corpus mean.

    ``pairs`` is a sequence of ``(D_E, D_C, phoneme_idx)``.
    """
    losses = []
    total = 0.0
    frames = 0
    for u, (D_E, D_C, idx) in enumerate(pairs):
        try:
            terms = frame_contributions(D_E, D_C, idx, w, cfg)
        except ArgumentError as exc:
            raise ArgumentError(f"utterance {u}: {exc}") from exc
        s = float(np.sum(terms))
        losses.append(s / terms.size)
        total += s
        frames += terms.size
    if frames == 0:
        raise ArgumentError("no utterances given")
    return losses, total / frames


def combined_objective(original_loss: float, paap: float, cfg: PaapLossConfig = PaapLossConfig()) -> float:
    """``original_loss + aux_scale * paap`` as used when fine-tuning."""
    return float(original_loss) + cfg.aux_scale * float(paap)
