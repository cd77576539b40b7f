"""Acoustic-improvement analytics: per-parameter MAE, relative MAE reduction,
and the same broken down by aligned phoneme."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ArgumentError, PaapError
from .lld import PARAM_NAMES
from .phonemes import DEFAULT_VOCAB, SIL, PhonemeVocab

NOT_APPLICABLE = math.nan


def _matrix(m):
    return m.values if hasattr(m, "values") else np.asarray(m, dtype=np.float64)


def mae_per_param(D_E, D_C) -> np.ndarray:
    """Column-wise mean absolute error; ``.mean()`` of the result is the scalar MAE."""
    e, c = _matrix(D_E), _matrix(D_C)
    if e.shape != c.shape:
        raise ArgumentError(f"shape mismatch: {e.shape} vs {c.shape}")
    if e.shape[0] == 0:
        raise ArgumentError("MAE needs at least one frame")
    return np.mean(np.abs(e - c), axis=0)


def improvement_percent(mae_E: float, mae_B: float) -> float:
    """Reduction of MAE relative to the baseline, in percent (positive = better).

    Returns NaN (not applicable) when the baseline MAE is zero.
    """
    if not mae_B > 0:
        return NOT_APPLICABLE
    return (mae_B - mae_E) / mae_B * 100.0


def relative_mae_change(mae_E: float, mae_B: float) -> float:
    """(MAE_E - MAE_B) / MAE_B * 100: the opposite sign of :func:`improvement_percent`."""
    if not mae_B > 0:
        return NOT_APPLICABLE
    return (mae_E - mae_B) / mae_B * 100.0


def _improvement_array(mae_E, mae_B):
    mae_E = np.asarray(mae_E, dtype=np.float64)
    mae_B = np.asarray(mae_B, dtype=np.float64)
    out = np.full(mae_B.shape, NOT_APPLICABLE)
    ok = mae_B > 0
    out[ok] = (mae_B[ok] - mae_E[ok]) / mae_B[ok] * 100.0
    return out


class _Accumulator:
    """Per-phoneme running sums of |E - C|, |B - C| and |C|."""

    def __init__(self, n_classes: int, n_params: int):
        self.counts = np.zeros(n_classes, dtype=np.int64)
        self.err_e = np.zeros((n_classes, n_params))
        self.err_b = np.zeros((n_classes, n_params))
        self.abs_c = np.zeros((n_classes, n_params))

    def add(self, D_E, D_B, D_C, phoneme_idx):
        e, b, c = _matrix(D_E), _matrix(D_B), _matrix(D_C)
        idx = np.asarray(phoneme_idx)
        if not e.shape == b.shape == c.shape:
            raise ArgumentError(f"shape mismatch: enhanced {e.shape}, baseline {b.shape}, clean {c.shape}")
        if idx.ndim != 1 or idx.size != c.shape[0]:
            raise ArgumentError(f"{idx.size} phoneme indices for {c.shape[0]} frames")
        n_classes = self.counts.size
        bad = np.flatnonzero((idx < 0) | (idx >= n_classes))
        if bad.size:
            raise ArgumentError(f"phoneme index {int(idx[bad[0]])} at frame {int(bad[0])} outside [0, {n_classes - 1}]")
        idx = idx.astype(np.int64)
        self.counts += np.bincount(idx, minlength=n_classes)
        np.add.at(self.err_e, idx, np.abs(e - c))
        np.add.at(self.err_b, idx, np.abs(b - c))
        np.add.at(self.abs_c, idx, np.abs(c))


@dataclass(eq=False)
class PaapReport:
    param_names: tuple
    phonemes: tuple
    categories: tuple
    n_utterances: int
    n_frames: int
    mae_enhanced: np.ndarray  # (P,)
    mae_baseline: np.ndarray  # (P,)
    improvement: np.ndarray  # (P,) percent, NaN = not applicable
    overall_mae_enhanced: float
    overall_mae_baseline: float
    overall_improvement: float
    phoneme_frames: np.ndarray  # (K,)
    phoneme_mae_enhanced: np.ndarray  # (K, P)
    phoneme_mae_baseline: np.ndarray  # (K, P)
    phoneme_improvement: np.ndarray  # (K, P)
    phoneme_mean_clean: np.ndarray  # (K, P) mean |D_C|

    def __eq__(self, other):
        if not isinstance(other, PaapReport):
            return NotImplemented
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if not np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True):
                    return False
            elif isinstance(a, float) and isinstance(b, float):
                if not (a == b or (math.isnan(a) and math.isnan(b))):
                    return False
            elif a != b:
                return False
        return True

    @property
    def silence_index(self) -> int | None:
        return self.phonemes.index(SIL) if SIL in self.phonemes else None


def _finish(acc: _Accumulator, n_utt: int, param_names, vocab: PhonemeVocab | None) -> PaapReport:
    total = int(acc.counts.sum())
    if total == 0:
        raise ArgumentError("no frames to analyse")
    mae_e = acc.err_e.sum(axis=0) / total
    mae_b = acc.err_b.sum(axis=0) / total
    occupied = acc.counts > 0
    denom = np.where(occupied, acc.counts, 1)[:, None]
    ph_e = np.where(occupied[:, None], acc.err_e / denom, NOT_APPLICABLE)
    ph_b = np.where(occupied[:, None], acc.err_b / denom, NOT_APPLICABLE)
    ph_c = np.where(occupied[:, None], acc.abs_c / denom, NOT_APPLICABLE)
    ph_imp = np.full(ph_b.shape, NOT_APPLICABLE)
    ph_imp[occupied] = _improvement_array(ph_e[occupied], ph_b[occupied])
    if vocab is not None:
        labels = vocab.labels
        cats = tuple(vocab.category(p) for p in labels)
    else:
        labels = tuple(str(i) for i in range(acc.counts.size))
        cats = ("other",) * acc.counts.size
    overall_e = float(mae_e.mean())
    overall_b = float(mae_b.mean())
    return PaapReport(
        param_names=tuple(param_names),
        phonemes=tuple(labels),
        categories=cats,
        n_utterances=int(n_utt),
        n_frames=total,
        mae_enhanced=mae_e,
        mae_baseline=mae_b,
        improvement=_improvement_array(mae_e, mae_b),
        overall_mae_enhanced=overall_e,
        overall_mae_baseline=overall_b,
        overall_improvement=improvement_percent(overall_e, overall_b),
        phoneme_frames=acc.counts.copy(),
        phoneme_mae_enhanced=ph_e,
        phoneme_mae_baseline=ph_b,
        phoneme_improvement=ph_imp,
        phoneme_mean_clean=ph_c,
    )


def per_phoneme_improvement(D_E, D_B, D_C, phoneme_idx, n_classes: int = 41):
    """Improvement per (phoneme, parameter) and per-phoneme mean |D_C|.

    Returns ``(improvement, mean_clean)``, both (n_classes, P) with NaN for
    phonemes without frames or with zero baseline error.
    """
    c = _matrix(D_C)
    acc = _Accumulator(n_classes, c.shape[1])
    acc.add(D_E, D_B, D_C, phoneme_idx)
    rep = _finish(acc, 1, tuple(f"p{i}" for i in range(c.shape[1])), None)
    return rep.phoneme_improvement, rep.phoneme_mean_clean


def build_report(triples, phoneme_idx_list, vocab: PhonemeVocab = DEFAULT_VOCAB, param_names=PARAM_NAMES) -> PaapReport:
    """Aggregate ``(D_E, D_B, D_C)`` triples over a corpus (frames pooled)."""
    triples = list(triples)
    idx_list = list(phoneme_idx_list)
    if len(triples) != len(idx_list):
        raise ArgumentError(f"{len(triples)} utterances but {len(idx_list)} phoneme index tracks")
    if not triples:
        raise ArgumentError("no utterances to analyse")
    n_params = _matrix(triples[0][2]).shape[1]
    if n_params != len(param_names):
        raise ArgumentError(f"descriptor matrices have {n_params} columns, expected {len(param_names)}")
    acc = _Accumulator(len(vocab), n_params)
    for u, ((e, b, c), idx) in enumerate(zip(triples, idx_list)):
        try:
            acc.add(e, b, c, idx)
        except ArgumentError as exc:
            raise ArgumentError(f"utterance {u}: {exc}") from exc
    return _finish(acc, len(triples), param_names, vocab)


# -- serialisation ---------------------------------------------------------

def _num(x):
    x = float(x)
    return None if math.isnan(x) else x


def _arr(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        return [_num(v) for v in a]
    return [_arr(row) for row in a]


def _unarr(a):
    arr = np.array(a, dtype=object)
    missing = np.frompyfunc(lambda v: v is None, 1, 1)(arr).astype(bool)
    arr[missing] = NOT_APPLICABLE
    return arr.astype(np.float64)


def report_to_dict(report: PaapReport) -> dict:
    return {
        "param_names": list(report.param_names),
        "phonemes": list(report.phonemes),
        "categories": list(report.categories),
        "n_utterances": report.n_utterances,
        "n_frames": report.n_frames,
        "overall": {
            "mae_enhanced": _num(report.overall_mae_enhanced),
            "mae_baseline": _num(report.overall_mae_baseline),
            "improvement_percent": _num(report.overall_improvement),
        },
        "per_param": {
            "mae_enhanced": _arr(report.mae_enhanced),
            "mae_baseline": _arr(report.mae_baseline),
            "improvement_percent": _arr(report.improvement),
        },
        "per_phoneme": {
            "frames": [int(n) for n in report.phoneme_frames],
            "mae_enhanced": _arr(report.phoneme_mae_enhanced),
            "mae_baseline": _arr(report.phoneme_mae_baseline),
            "improvement_percent": _arr(report.phoneme_improvement),
            "mean_abs_clean": _arr(report.phoneme_mean_clean),
        },
    }


def report_from_dict(doc: dict) -> PaapReport:
    def f(x):
        return NOT_APPLICABLE if x is None else float(x)

    return PaapReport(
        param_names=tuple(doc["param_names"]),
        phonemes=tuple(doc["phonemes"]),
        categories=tuple(doc["categories"]),
        n_utterances=int(doc["n_utterances"]),
        n_frames=int(doc["n_frames"]),
        mae_enhanced=_unarr(doc["per_param"]["mae_enhanced"]),
        mae_baseline=_unarr(doc["per_param"]["mae_baseline"]),
        improvement=_unarr(doc["per_param"]["improvement_percent"]),
        overall_mae_enhanced=f(doc["overall"]["mae_enhanced"]),
        overall_mae_baseline=f(doc["overall"]["mae_baseline"]),
        overall_improvement=f(doc["overall"]["improvement_percent"]),
        phoneme_frames=np.array(doc["per_phoneme"]["frames"], dtype=np.int64),
        phoneme_mae_enhanced=_unarr(doc["per_phoneme"]["mae_enhanced"]),
        phoneme_mae_baseline=_unarr(doc["per_phoneme"]["mae_baseline"]),
        phoneme_improvement=_unarr(doc["per_phoneme"]["improvement_percent"]),
        phoneme_mean_clean=_unarr(doc["per_phoneme"]["mean_abs_clean"]),
    )


def _cell(x) -> str:
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def phoneme_table_csv(report: PaapReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(
        ["phoneme", "category", "is_silence", "frames"]
        + [f"improvement_{p}" for p in report.param_names]
        + [f"mean_abs_clean_{p}" for p in report.param_names]
    )
    for k, label in enumerate(report.phonemes):
        wr.writerow(
            [label, report.categories[k], int(label == SIL), int(report.phoneme_frames[k])]
            + [_cell(v) for v in report.phoneme_improvement[k]]
            + [_cell(v) for v in report.phoneme_mean_clean[k]]
        )
    return buf.getvalue()


def param_table_csv(report: PaapReport) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["param", "mae_enhanced", "mae_baseline", "improvement_percent"])
    for k, name in enumerate(report.param_names):
        wr.writerow([name, _cell(report.mae_enhanced[k]), _cell(report.mae_baseline[k]), _cell(report.improvement[k])])
    wr.writerow(
        ["ALL", _cell(report.overall_mae_enhanced), _cell(report.overall_mae_baseline), _cell(report.overall_improvement)]
    )
    return buf.getvalue()


def _write_text(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise PaapError(f"cannot write {path}: {exc}") from exc


def emit_report(report: PaapReport, path, fmt: str | None = None, config_digest: str | None = None) -> list:
    """Write the report as JSON, or as CSV (per-phoneme table at ``path`` plus
    the per-parameter table at ``<stem>_params.csv``). Returns written paths.

    A ``config_digest`` is embedded as a JSON key or a leading ``#`` comment.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "json":
        doc = report_to_dict(report)
        if config_digest is not None:
            doc = {"config_digest": config_digest, **doc}
        _write_text(path, json.dumps(doc, indent=1, allow_nan=False) + "\n")
        return [path]
    if fmt == "csv":
        head = f"# config_digest: {config_digest}\n" if config_digest is not None else ""
        params_path = path.with_name(path.stem + "_params.csv")
        _write_text(path, head + phoneme_table_csv(report))
        _write_text(params_path, head + param_table_csv(report))
        return [path, params_path]
    raise ArgumentError(f"unknown report format {fmt!r}; use 'csv' or 'json'")


def load_report(path) -> PaapReport:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def emit_plot_data(report: PaapReport, out_dir, config_digest: str | None = None) -> list:
    """Bar data (improvement per parameter) and per-phoneme scatter data
    (mean |clean value| vs improvement, tagged with phoneme category)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    head = f"# config_digest: {config_digest}\n" if config_digest is not None else ""

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["param", "improvement_percent"])
    for name, v in zip(report.param_names, report.improvement):
        wr.writerow([name, _cell(v)])
    bar = out_dir / "param_improvement.csv"
    _write_text(bar, head + buf.getvalue())

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["param", "phoneme", "category", "is_silence", "frames", "mean_abs_clean", "improvement_percent"])
    for p, name in enumerate(report.param_names):
        for k, label in enumerate(report.phonemes):
            if report.phoneme_frames[k] == 0:
                continue
            wr.writerow(
                [
                    name,
                    label,
                    report.categories[k],
                    int(label == SIL),
                    int(report.phoneme_frames[k]),
                    _cell(report.phoneme_mean_clean[k, p]),
                    _cell(report.phoneme_improvement[k, p]),
                ]
            )
    scatter = out_dir / "phoneme_scatter.csv"
    _write_text(scatter, head + buf.getvalue())
    return [bar, scatter]
