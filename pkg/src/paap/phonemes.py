"""Phoneme vocabularies, alignment ingestion and frame-level phoneme logits."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dsp import FrameSpec
from .errors import AlignmentFormatError, ArgumentError, VocabularyError

SIL = "SIL"

# 39 CMU ARPAbet phonemes plus the flap DX, then silence at index 40.
DEFAULT_PHONEMES = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH",
    "DX", "EH", "ER", "EY", "F", "G", "HH", "IH", "IY", "JH",
    "K", "L", "M", "N", "NG", "OW", "OY", "P", "R", "S",
    "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
)  # fmt: skip

# Category used to tag per-phoneme plot points: vowels, then consonants by
# place of articulation (laryngeal /HH/ on its own).
PHONEME_CATEGORY = {
    **{p: "vowel" for p in ("AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW")},
    **{p: "labial" for p in ("B", "P", "M", "F", "V", "W")},
    **{p: "coronal" for p in ("D", "T", "N", "S", "Z", "SH", "ZH", "CH", "JH", "TH", "DH", "L", "R", "DX")},
    **{p: "dorsal" for p in ("G", "K", "NG", "Y")},
    "HH": "laryngeal",
    SIL: "silence",
}


@dataclass(frozen=True)
class PhonemeVocab:
    labels: tuple = DEFAULT_PHONEMES + (SIL,)

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if len(labels) != 41:
            raise VocabularyError(f"vocabulary must have 41 labels, got {len(labels)}")
        if len(set(labels)) != len(labels):
            raise VocabularyError("vocabulary labels must be unique")
        if SIL not in labels:
            raise VocabularyError(f"vocabulary must contain {SIL}")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise VocabularyError(label) from None

    @property
    def silence_index(self) -> int:
        return self.labels.index(SIL)

    def category(self, label: str) -> str:
        return PHONEME_CATEGORY.get(label, "other")


DEFAULT_VOCAB = PhonemeVocab()


def load_vocab(path) -> PhonemeVocab:
    """Read a vocabulary from JSON (list of labels) or plain text (one per line)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.strip()
    if stripped.startswith("["):
        return PhonemeVocab(tuple(json.loads(stripped)))
    return PhonemeVocab(tuple(line.strip() for line in stripped.splitlines() if line.strip()))


@dataclass(frozen=True)
class Interval:
    phoneme: str
    start_s: float
    end_s: float


@dataclass(frozen=True, eq=False)
class AlignmentDoc:
    """Either sorted, non-overlapping intervals or a frame-level logits matrix."""

    vocab: PhonemeVocab
    sample_rate: int = 16000
    intervals: tuple = ()
    logits: np.ndarray | None = None
    hop: int | None = None

    @property
    def duration_s(self) -> float:
        if self.intervals:
            return self.intervals[-1].end_s
        if self.logits is not None:
            return self.logits.shape[0] * self.hop / self.sample_rate
        return 0.0

    def filled_intervals(self) -> list:
        """Intervals with the gaps between them labelled SIL."""
        out = []
        t = 0.0
        for iv in self.intervals:
            if iv.start_s > t:
                out.append(Interval(SIL, t, iv.start_s))
            out.append(iv)
            t = iv.end_s
        return out


@dataclass(frozen=True, eq=False)
class PhonemeLogits:
    values: np.ndarray
    vocab: PhonemeVocab = DEFAULT_VOCAB
    frame_spec: FrameSpec = field(default_factory=FrameSpec)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != len(self.vocab):
            raise ArgumentError(f"expected N x {len(self.vocab)} logits, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ArgumentError("phoneme logits contain non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def alignment_from_dict(doc: dict, vocab: PhonemeVocab | None = None, source: str = "<alignment>") -> AlignmentDoc:
    """Validate a decoded alignment JSON object."""
    if not isinstance(doc, dict):
        raise AlignmentFormatError(f"{source}: top level must be an object")
    if "vocab" in doc:
        vocab = PhonemeVocab(tuple(doc["vocab"]))
    vocab = vocab or DEFAULT_VOCAB
    sr = int(doc.get("sample_rate", 16000))
    if sr <= 0:
        raise AlignmentFormatError(f"{source}: sample_rate must be positive")

    if "logits" in doc:
        logits = np.asarray(doc["logits"], dtype=np.float64)
        if logits.ndim != 2 or logits.shape[1] != len(vocab) or logits.shape[0] == 0:
            raise AlignmentFormatError(f"{source}: logits must be a non-empty N x {len(vocab)} array")
        if not np.all(np.isfinite(logits)):
            raise AlignmentFormatError(f"{source}: logits contain non-finite values")
        if "hop" not in doc or int(doc["hop"]) <= 0:
            raise AlignmentFormatError(f"{source}: logits documents need a positive 'hop'")
        return AlignmentDoc(vocab, sr, (), logits, int(doc["hop"]))

    if "intervals" not in doc:
        raise AlignmentFormatError(f"{source}: expected 'intervals' or 'logits'")
    parsed = []
    for i, item in enumerate(doc["intervals"]):
        try:
            label, start, end = str(item["phoneme"]), float(item["start_s"]), float(item["end_s"])
        except (KeyError, TypeError, ValueError) as exc:
            raise AlignmentFormatError(f"{source}: interval {i} is malformed: {item!r}") from exc
        if label not in vocab.labels:
            raise VocabularyError(label)
        if not (np.isfinite(start) and np.isfinite(end)) or start < 0 or end <= start:
            raise AlignmentFormatError(f"{source}: interval {i} has invalid bounds [{start}, {end}]")
        parsed.append((start, end, i, label))
    parsed.sort()
    for (s0, e0, i0, _), (s1, _, i1, _) in zip(parsed, parsed[1:]):
        if s1 < e0:
            raise AlignmentFormatError(f"{source}: intervals {i0} and {i1} overlap")
    intervals = tuple(Interval(label, s, e) for s, e, _, label in parsed)
    return AlignmentDoc(vocab, sr, intervals)


def parse_alignment(path, vocab: PhonemeVocab | None = None) -> AlignmentDoc:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise AlignmentFormatError(f"{path}: invalid JSON: {exc}") from exc
    return alignment_from_dict(doc, vocab, str(path))


def to_frame_logits(doc: AlignmentDoc, n_frames: int, spec: FrameSpec = FrameSpec(), sr: int | None = None) -> PhonemeLogits:
    """Map an alignment onto ``n_frames`` STFT frames by frame-centre lookup.

    Frame i is centred at ``i * hop / sr`` seconds. Interval documents give
    one-hot rows (half-open intervals, SIL outside them); logits documents are
    resampled by nearest source frame.
    """
    n_frames = int(n_frames)
    if n_frames <= 0:
        raise ArgumentError(f"n_frames must be positive, got {n_frames}")
    sr = doc.sample_rate if sr is None else int(sr)
    centres = np.arange(n_frames) * spec.hop / sr

    if doc.logits is not None:
        src_hop_s = doc.hop / doc.sample_rate
        rows = np.clip(np.rint(centres / src_hop_s).astype(np.int64), 0, doc.logits.shape[0] - 1)
        return PhonemeLogits(doc.logits[rows], doc.vocab, spec)

    idx = np.full(n_frames, doc.vocab.silence_index, dtype=np.int64)
    for iv in doc.intervals:
        idx[(centres >= iv.start_s) & (centres < iv.end_s)] = doc.vocab.index(iv.phoneme)
    values = np.zeros((n_frames, len(doc.vocab)))
    values[np.arange(n_frames), idx] = 1.0
    return PhonemeLogits(values, doc.vocab, spec)


def argmax_phonemes(p) -> np.ndarray:
    """Per-frame index of the largest logit; ties go to the lowest index."""
    values = p.values if isinstance(p, PhonemeLogits) else np.asarray(p, dtype=np.float64)
    return np.argmax(values, axis=1)
