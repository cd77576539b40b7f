"""Inference-only bidirectional LSTM descriptor estimator.

Weights are trained elsewhere and exported to a single file: one UTF-8 JSON
header line terminated by ``\\n``, followed by a little-endian float32 blob.
Each header tensor entry gives ``name``, ``shape`` and the byte ``offset``
into the blob. Gate blocks inside ``W_ih``/``W_hh``/``b_*`` are ordered
(input, forget, cell, output).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .audio_io import Waveform, to_canonical
from .dsp import FrameSpec, stft
from .errors import ArgumentError, WeightsFormatError
from .lld import N_PARAMS, PARAM_NAMES, AcousticParamMatrix, extract_all

LOG_EPS = 1e-7
DIRECTIONS = ("fw", "bw")
GATE_TENSORS = ("W_ih", "W_hh", "b_ih", "b_hh")


@dataclass(frozen=True)
class LSTMWeights:
    W_ih: np.ndarray  # (4h, in)
    W_hh: np.ndarray  # (4h, h)
    b_ih: np.ndarray  # (4h,)
    b_hh: np.ndarray  # (4h,)

    @property
    def hidden(self) -> int:
        return self.W_hh.shape[1]


@dataclass(frozen=True)
class EstimatorWeights:
    layers: tuple  # tuple of {"fw": LSTMWeights, "bw": LSTMWeights}
    proj_W: np.ndarray  # (out, 2h)
    proj_b: np.ndarray  # (out,)

    @property
    def hidden(self) -> int:
        return self.layers[0]["fw"].hidden

    @property
    def n_in(self) -> int:
        return self.layers[0]["fw"].W_ih.shape[1]

    @property
    def n_out(self) -> int:
        return self.proj_b.shape[0]

    def tensors(self) -> dict:
        out = {}
        for l, layer in enumerate(self.layers):
            for d in DIRECTIONS:
                for t in GATE_TENSORS:
                    out[f"lstm.l{l}.{d}.{t}"] = getattr(layer[d], t)
        out["proj.W"] = self.proj_W
        out["proj.b"] = self.proj_b
        return out


def _expected_shapes(h: int, n_layers: int, n_in: int, n_out: int) -> dict:
    shapes = {}
    for l in range(n_layers):
        layer_in = n_in if l == 0 else 2 * h
        for d in DIRECTIONS:
            shapes[f"lstm.l{l}.{d}.W_ih"] = (4 * h, layer_in)
            shapes[f"lstm.l{l}.{d}.W_hh"] = (4 * h, h)
            shapes[f"lstm.l{l}.{d}.b_ih"] = (4 * h,)
            shapes[f"lstm.l{l}.{d}.b_hh"] = (4 * h,)
    shapes["proj.W"] = (n_out, 2 * h)
    shapes["proj.b"] = (n_out,)
    return shapes


def build_weights(tensors: dict, h: int, n_layers: int = 3, n_in: int = 257, n_out: int = N_PARAMS) -> EstimatorWeights:
    """Validate a name -> array mapping and freeze it into EstimatorWeights."""
    expected = _expected_shapes(h, n_layers, n_in, n_out)
    frozen = {}
    for name, shape in expected.items():
        if name not in tensors:
            raise WeightsFormatError(f"missing tensor {name}")
        arr = np.array(tensors[name], dtype=np.float64)
        if arr.shape != shape:
            raise WeightsFormatError(f"tensor {name} has shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)):
            raise WeightsFormatError(f"tensor {name} contains non-finite values")
        arr.setflags(write=False)
        frozen[name] = arr
    layers = tuple(
        {d: LSTMWeights(*(frozen[f"lstm.l{l}.{d}.{t}"] for t in GATE_TENSORS)) for d in DIRECTIONS}
        for l in range(n_layers)
    )
    return EstimatorWeights(layers, frozen["proj.W"], frozen["proj.b"])


def save_weights(path, weights: EstimatorWeights) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in weights.tensors().items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(data)
        offset += len(data)
    header = {
        "h": weights.hidden,
        "layers": len(weights.layers),
        "in": weights.n_in,
        "out": weights.n_out,
        "tensors": entries,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n")
        for b in blobs:
            fh.write(b)


def load_weights(path) -> EstimatorWeights:
    with open(path, "rb") as fh:
        raw = fh.read()
    head, sep, blob = raw.partition(b"\n")
    if not sep:
        raise WeightsFormatError(f"{path}: missing JSON header line")
    try:
        header = json.loads(head.decode("utf-8"))
        h, n_layers, n_in, n_out = (int(header[k]) for k in ("h", "layers", "in", "out"))
        entries = header["tensors"]
    except (ValueError, KeyError, TypeError) as exc:
        raise WeightsFormatError(f"{path}: bad header: {exc}") from exc

    tensors = {}
    for entry in entries:
        try:
            name, shape, offset = entry["name"], tuple(int(s) for s in entry["shape"]), int(entry["offset"])
        except (KeyError, TypeError, ValueError) as exc:
            raise WeightsFormatError(f"{path}: bad tensor entry {entry!r}") from exc
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if offset < 0 or end > len(blob):
            raise WeightsFormatError(f"{path}: tensor {name} runs past the end of the blob")
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
    return build_weights(tensors, h, n_layers, n_in, n_out)


def random_weights(h: int = 512, n_layers: int = 3, n_in: int = 257, n_out: int = N_PARAMS, seed: int = 0) -> EstimatorWeights:
    """Uniform(-1/sqrt(h), 1/sqrt(h)) weights, the usual LSTM initialisation."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(h)
    tensors = {
        name: rng.uniform(-bound, bound, size=shape).astype(np.float32)
        for name, shape in _expected_shapes(h, n_layers, n_in, n_out).items()
    }
    return build_weights(tensors, h, n_layers, n_in, n_out)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_forward(x, weights: LSTMWeights, reverse: bool = False) -> np.ndarray:
    """Run one LSTM direction over an (N, in) sequence from zero state.

    With ``reverse=True`` time is processed back to front and the output is
    returned in the original frame order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != weights.W_ih.shape[1]:
        raise ArgumentError(f"input shape {x.shape} does not match W_ih {weights.W_ih.shape}")
    h_size = weights.hidden
    n = x.shape[0]
    pre = x @ weights.W_ih.T + (weights.b_ih + weights.b_hh)
    out = np.zeros((n, h_size))
    h = np.zeros(h_size)
    c = np.zeros(h_size)
    steps = range(n - 1, -1, -1) if reverse else range(n)
    for t in steps:
        z = pre[t] + weights.W_hh @ h
        i = _sigmoid(z[:h_size])
        f = _sigmoid(z[h_size : 2 * h_size])
        g = np.tanh(z[2 * h_size : 3 * h_size])
        o = _sigmoid(z[3 * h_size :])
        c = f * c + i * g
        h = o * np.tanh(c)
        out[t] = h
    return out


def log_spectrogram(w: Waveform, spec: FrameSpec = FrameSpec()) -> np.ndarray:
    return np.log(stft(w, spec).frames + LOG_EPS)


def estimate_params(w: Waveform, weights: EstimatorWeights, spec: FrameSpec = FrameSpec()) -> AcousticParamMatrix:
    """Log-magnitude STFT -> stacked bi-LSTM -> linear projection to 25 columns."""
    if weights.n_out != N_PARAMS:
        raise WeightsFormatError(f"projection yields {weights.n_out} outputs, expected {N_PARAMS}")
    if weights.n_in != spec.n_bins:
        raise WeightsFormatError(f"estimator expects {weights.n_in} input bins, framing gives {spec.n_bins}")
    x = log_spectrogram(to_canonical(w), spec)
    for layer in weights.layers:
        x = np.concatenate([lstm_forward(x, layer["fw"]), lstm_forward(x, layer["bw"], reverse=True)], axis=1)
    return AcousticParamMatrix(x @ weights.proj_W.T + weights.proj_b, PARAM_NAMES, spec)


class ParamBackend(Protocol):
    name: str

    def __call__(self, w: Waveform) -> AcousticParamMatrix: ...


class DspBackend:
    name = "dsp"

    def __init__(self, spec: FrameSpec = FrameSpec()):
        self.spec = spec

    def __call__(self, w: Waveform) -> AcousticParamMatrix:
        return extract_all(w, self.spec)


class NeuralBackend:
    name = "neural"

    def __init__(self, weights: EstimatorWeights, spec: FrameSpec = FrameSpec()):
        self.weights = weights
        self.spec = spec

    def __call__(self, w: Waveform) -> AcousticParamMatrix:
        return estimate_params(w, self.weights, self.spec)


def make_backend(kind: str = "dsp", weights_path=None, spec: FrameSpec = FrameSpec()) -> ParamBackend:
    if kind == "dsp":
        return DspBackend(spec)
    if kind == "neural":
        if weights_path is None:
            raise ArgumentError("the neural backend needs a weights file")
        return NeuralBackend(load_weights(weights_path), spec)
    raise ArgumentError(f"unknown backend {kind!r}; use 'dsp' or 'neural'")
