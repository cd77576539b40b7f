"""Acoustic-phonetic weights: least squares from descriptors to phoneme logits."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ArgumentError, SingularMatrixError, VocabularyError, WeightsFormatError
from .lld import N_PARAMS, PARAM_NAMES, AcousticParamMatrix
from .phonemes import DEFAULT_VOCAB, PhonemeLogits, PhonemeVocab

DEFAULT_RIDGE = 1e-4
# Smallest admissible reciprocal condition number of the diagonally scaled system.
_RCOND_MIN = 1e-13


@dataclass(frozen=True, eq=False)
class APWeights:
    """(n_params + 1) x n_classes weights; the last row is the bias.

    ``vocab`` is None only for synthetic fits whose class count is not 41.
    """

    values: np.ndarray
    vocab: PhonemeVocab | None = DEFAULT_VOCAB
    param_names: tuple = PARAM_NAMES
    ridge_lambda: float = DEFAULT_RIDGE

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        n_classes = len(self.vocab) if self.vocab is not None else v.shape[-1]
        expected = (len(self.param_names) + 1, n_classes)
        if v.shape != expected:
            raise ArgumentError(f"weights must have shape {expected}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ArgumentError("weights contain non-finite values")
        if self.ridge_lambda < 0:
            raise ArgumentError("ridge_lambda must be non-negative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "param_names", tuple(self.param_names))

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    @property
    def bias(self) -> np.ndarray:
        return self.values[-1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def to_dict(self) -> dict:
        return {
            "vocab": list(self.vocab.labels) if self.vocab is not None else None,
            "params": list(self.param_names),
            "ridge_lambda": float(self.ridge_lambda),
            "w": self.values.tolist(),
        }


def _values(m) -> np.ndarray:
    return m.values if isinstance(m, (AcousticParamMatrix, PhonemeLogits)) else np.asarray(m, dtype=np.float64)


def augment_bias(D) -> np.ndarray:
    """Append a constant-one column to an N x 25 descriptor matrix."""
    d = _values(D)
    return np.concatenate([d, np.ones((d.shape[0], 1))], axis=1)


def normal_equations(D_list, P_list):
    """Accumulate X^T X and X^T Y over utterances in list order."""
    if len(D_list) != len(P_list):
        raise ArgumentError(f"{len(D_list)} descriptor matrices but {len(P_list)} logit matrices")
    if not D_list:
        raise ArgumentError("no utterances to fit")
    xtx = None
    xty = None
    n_total = 0
    for u, (D, P) in enumerate(zip(D_list, P_list)):
        x = augment_bias(D)
        y = _values(P)
        if x.shape[0] != y.shape[0]:
            raise ArgumentError(f"utterance {u}: {x.shape[0]} descriptor frames vs {y.shape[0]} logit frames")
        if xtx is None:
            xtx = np.zeros((x.shape[1], x.shape[1]))
            xty = np.zeros((x.shape[1], y.shape[1]))
        elif y.shape[1] != xty.shape[1] or x.shape[1] != xtx.shape[0]:
            raise ArgumentError(f"utterance {u}: column count differs from earlier utterances")
        xtx += x.T @ x
        xty += x.T @ y
        n_total += x.shape[0]
    return xtx, xty, n_total


def solve_ridge(xtx: np.ndarray, xty: np.ndarray, ridge_lambda: float) -> np.ndarray:
    """Solve (X^T X + lambda * I~) w = X^T Y with the last (bias) row unpenalised."""
    p = xtx.shape[0]
    penalty = np.full(p, float(ridge_lambda))
    penalty[-1] = 0.0
    a = xtx + np.diag(penalty)
    diag = np.diag(a)
    if np.any(diag <= 0.0):
        raise SingularMatrixError(
            f"normal equations are singular (column {int(np.argmin(diag))} is identically zero); use lambda > 0"
        )
    # Symmetric Jacobi scaling keeps the factorization insensitive to column units.
    s = 1.0 / np.sqrt(diag)
    a_s = a * s[:, None] * s[None, :]
    try:
        factor = scipy.linalg.cho_factor(a_s, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"normal equations are not positive definite ({exc}); use lambda > 0") from exc
    rcond = np.min(np.abs(np.diag(factor[0]))) ** 2 / np.max(np.abs(np.diag(factor[0]))) ** 2
    if rcond < _RCOND_MIN:
        raise SingularMatrixError(f"normal equations are numerically singular (rcond ~ {rcond:.1e}); use lambda > 0")
    return s[:, None] * scipy.linalg.cho_solve(factor, s[:, None] * xty)


def fit_weights(D_list, P_list, ridge_lambda: float = DEFAULT_RIDGE, vocab: PhonemeVocab | None = None) -> APWeights:
    """Regress phoneme logits on bias-augmented descriptors over all utterances."""
    if ridge_lambda < 0:
        raise ArgumentError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    xtx, xty, n_total = normal_equations(D_list, P_list)
    if n_total < xtx.shape[0] + 1:
        raise ArgumentError(f"need at least {xtx.shape[0] + 1} frames in total, got {n_total}")
    w = solve_ridge(xtx, xty, ridge_lambda)
    n_params, n_classes = w.shape[0] - 1, w.shape[1]
    names = PARAM_NAMES if n_params == N_PARAMS else tuple(f"p{i}" for i in range(n_params))
    if vocab is None:
        first = P_list[0]
        if isinstance(first, PhonemeLogits):
            vocab = first.vocab
        elif n_classes == len(DEFAULT_VOCAB):
            vocab = DEFAULT_VOCAB
    return APWeights(w, vocab, names, float(ridge_lambda))


def save_weights(path, w: APWeights) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(w.to_dict(), fh, indent=1)
        fh.write("\n")


def weights_from_dict(doc: dict, source: str = "<weights>") -> APWeights:
    try:
        vocab = PhonemeVocab(tuple(doc["vocab"]))
        params = tuple(doc["params"])
        lam = float(doc.get("ridge_lambda", DEFAULT_RIDGE))
        values = np.asarray(doc["w"], dtype=np.float64)
    except (KeyError, TypeError, ValueError, VocabularyError) as exc:
        raise WeightsFormatError(f"{source}: {exc}") from exc
    if params != PARAM_NAMES:
        raise WeightsFormatError(f"{source}: parameter list does not match the canonical 25 descriptors")
    try:
        return APWeights(values, vocab, params, lam)
    except ArgumentError as exc:
        raise WeightsFormatError(f"{source}: {exc}") from exc


def load_weights(path) -> APWeights:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WeightsFormatError(f"{path}: invalid JSON: {exc}") from exc
    return weights_from_dict(doc, str(path))
