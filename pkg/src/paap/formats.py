"""On-disk exchange formats for descriptor matrices and phoneme logits.

Binary layout (both kinds): 6-byte magic, u32 rows, u32 columns, then
little-endian float32 values in row-major order.
"""
from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .dsp import FrameSpec
from .errors import ArgumentError, PaapError
from .lld import N_PARAMS, PARAM_NAMES, AcousticParamMatrix
from .phonemes import DEFAULT_VOCAB, PhonemeLogits, PhonemeVocab

FEATURES_MAGIC = b"PAAPD1"
LOGITS_MAGIC = b"PAAPP1"
_HEADER = struct.Struct("<6sII")


class FileFormatError(PaapError):
    """Feature or logits file does not match its declared layout."""


def _write_matrix(path, magic: bytes, values: np.ndarray) -> None:
    values = np.asarray(values)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, values.shape[0], values.shape[1]))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def _read_matrix(path, magic: bytes) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    got, rows, cols = _HEADER.unpack_from(raw)
    if got != magic:
        raise FileFormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise FileFormatError(f"{path}: {len(raw)} bytes, expected {expected} for {rows}x{cols}")
    return np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, cols).astype(np.float64)


def features_to_csv(D: AcousticParamMatrix, config_digest: str | None = None) -> str:
    buf = io.StringIO()
    if config_digest is not None:
        buf.write(f"# config_digest: {config_digest}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(("frame",) + PARAM_NAMES)
    for i, row in enumerate(D.values):
        wr.writerow([i] + [repr(float(v)) for v in row])
    return buf.getvalue()


def write_features(path, D: AcousticParamMatrix, config_digest: str | None = None) -> None:
    """CSV when the suffix is ``.csv``, the PAAPD1 binary layout otherwise."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        path.write_text(features_to_csv(D, config_digest), encoding="utf-8")
    else:
        _write_matrix(path, FEATURES_MAGIC, D.values)


def read_features(path, spec: FrameSpec = FrameSpec()) -> AcousticParamMatrix:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln and not ln.startswith("#")]
        rows = list(csv.reader(lines))
        if not rows or tuple(rows[0]) != ("frame",) + PARAM_NAMES:
            raise FileFormatError(f"{path}: header must be 'frame' followed by the 25 descriptor names")
        try:
            values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64).reshape(-1, N_PARAMS)
        except ValueError as exc:
            raise FileFormatError(f"{path}: {exc}") from exc
    else:
        values = _read_matrix(path, FEATURES_MAGIC)
        if values.shape[1] != N_PARAMS:
            raise FileFormatError(f"{path}: {values.shape[1]} columns, expected {N_PARAMS}")
    try:
        return AcousticParamMatrix(values, PARAM_NAMES, spec)
    except ArgumentError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc


def write_logits(path, P: PhonemeLogits) -> None:
    _write_matrix(path, LOGITS_MAGIC, P.values)


def read_logits(path, vocab: PhonemeVocab = DEFAULT_VOCAB, spec: FrameSpec = FrameSpec()) -> PhonemeLogits:
    values = _read_matrix(path, LOGITS_MAGIC)
    if values.shape[1] != len(vocab):
        raise FileFormatError(f"{path}: {values.shape[1]} classes, vocabulary has {len(vocab)}")
    return PhonemeLogits(values, vocab, spec)
