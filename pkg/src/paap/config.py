"""Run configuration shared by every CLI subcommand."""
from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .dsp import FrameSpec
from .errors import ArgumentError
from .loss import WEIGHT_MODES, PaapLossConfig
from .phonemes import DEFAULT_VOCAB, PhonemeVocab, load_vocab
from .weights import DEFAULT_RIDGE

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_ENV = "PAAP_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    hop: int = 160
    win: int = 512
    fft_size: int = 512
    backend: str = "dsp"
    weights: str | None = None  # estimator weight file for the neural backend
    vocab: str | None = None
    ridge_lambda: float = DEFAULT_RIDGE
    weight_mode: str = "literal"
    aux_scale: float = 0.1
    jobs: int = 0  # 0 = all available cores

    def __post_init__(self):
        self.frame_spec  # validates the framing
        if self.backend not in ("dsp", "neural"):
            raise ArgumentError(f"backend must be 'dsp' or 'neural', got {self.backend!r}")
        if self.backend == "neural" and not self.weights:
            raise ArgumentError("backend 'neural' requires a weights file")
        if self.weight_mode not in WEIGHT_MODES:
            raise ArgumentError(f"weight_mode must be one of {WEIGHT_MODES}")
        if self.ridge_lambda < 0 or self.aux_scale < 0 or self.jobs < 0:
            raise ArgumentError("ridge_lambda, aux_scale and jobs must be non-negative")

    @property
    def frame_spec(self) -> FrameSpec:
        return FrameSpec(hop=int(self.hop), win=int(self.win), fft_size=int(self.fft_size))

    @property
    def loss_config(self) -> PaapLossConfig:
        return PaapLossConfig(self.weight_mode, self.aux_scale)

    @property
    def n_jobs(self) -> int:
        return self.jobs or os.cpu_count() or 1

    def load_vocab(self) -> PhonemeVocab:
        return load_vocab(self.vocab) if self.vocab else DEFAULT_VOCAB

    def digest(self) -> str:
        """SHA-256 over every setting that can change outputs.

        Files are hashed by content, so the digest does not depend on where
        inputs live; ``jobs`` is excluded because results do not depend on it.
        """
        doc = asdict(self)
        doc.pop("jobs")
        for key in ("weights", "vocab"):
            if doc[key]:
                doc[key] = "sha256:" + hashlib.sha256(Path(doc[key]).read_bytes()).hexdigest()
        if doc["backend"] == "dsp":
            doc["weights"] = None
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def read_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
    else:
        doc = tomllib.loads(text)
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ArgumentError(f"{path}: unknown config keys {sorted(unknown)}")
    return doc


def resolve_config(config_path=None, **overrides) -> RunConfig:
    """Defaults < config file (explicit path or $PAAP_CONFIG) < overrides.

    ``None`` overrides are ignored.
    """
    base = {}
    config_path = config_path or os.environ.get(CONFIG_ENV)
    if config_path:
        base.update(read_config_file(config_path))
    base.update({k: v for k, v in overrides.items() if v is not None})
    cfg = replace(RunConfig(), **{k: v for k, v in base.items()})
    return cfg
