"""``paap`` command line: extract, align-ingest, fit-weights, loss, analyze, mix."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, formats
from .audio_io import Waveform, mix_at_snr, read_wav, to_canonical, write_wav
from .config import RunConfig, resolve_config
from .errors import ArgumentError, PaapError
from .estimator import make_backend
from .loss import combined_objective, paap_loss_batch
from .phonemes import argmax_phonemes, parse_alignment, to_frame_logits
from .weights import fit_weights, load_weights, save_weights

log = logging.getLogger("paap")

AUDIO_SUFFIXES = (".wav",)
FEATURE_SUFFIXES = (".csv", ".bin", ".paapd")

_worker_backend = None
_worker_spec = None


def _init_worker(cfg: RunConfig):
    global _worker_backend, _worker_spec
    _worker_spec = cfg.frame_spec
    _worker_backend = make_backend(cfg.backend, cfg.weights, cfg.frame_spec)


def _params_task(path: str):
    path = Path(path)
    if path.suffix.lower() in AUDIO_SUFFIXES:
        return _worker_backend(read_wav(path))
    return formats.read_features(path, _worker_spec)


def load_params(paths, cfg: RunConfig) -> list:
    """Descriptor matrices for WAV or feature files, in input order."""
    paths = [str(p) for p in paths]
    jobs = min(cfg.n_jobs, len(paths))
    if jobs <= 1:
        _init_worker(cfg)
        return [_params_task(p) for p in paths]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(cfg,)) as pool:
        return list(pool.map(_params_task, paths))


def _collect(path, suffixes) -> dict:
    """Map stem -> file for a single file or every matching file in a directory."""
    path = Path(path)
    if path.is_dir():
        found = {p.stem: p for p in sorted(path.iterdir()) if p.suffix.lower() in suffixes}
        if not found:
            raise ArgumentError(f"{path}: no files with suffix {'/'.join(suffixes)}")
        return found
    if not path.exists():
        raise ArgumentError(f"{path}: no such file or directory")
    return {path.stem: path}


def _pair(named: dict, *others: tuple) -> list:
    """Stems present in every mapping; single-file inputs pair positionally."""
    stems = sorted(named)
    if len(named) == 1 and all(len(o) == 1 for o, _ in others):
        return [(stems[0], named[stems[0]], *(next(iter(o.values())) for o, _ in others))]
    rows = []
    for s in stems:
        missing = [label for o, label in others if s not in o]
        if missing:
            raise ArgumentError(f"utterance {s!r} missing from {', '.join(missing)}")
        rows.append((s, named[s], *(o[s] for o, _ in others)))
    return rows


def _phoneme_track(alignment_path, n_frames, cfg: RunConfig):
    doc = parse_alignment(alignment_path, cfg.load_vocab())
    return argmax_phonemes(to_frame_logits(doc, n_frames, cfg.frame_spec))


def _dump(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"


# -- subcommands -----------------------------------------------------------

def cmd_extract(args, cfg: RunConfig) -> int:
    src = Path(args.inp)
    digest = cfg.digest()
    if src.is_dir():
        files = _collect(src, AUDIO_SUFFIXES)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        mats = load_params(list(files.values()), cfg)
        for stem, D in zip(files, mats):
            formats.write_features(out_dir / f"{stem}.{args.format}", D, digest)
        log.info("wrote %d feature files to %s", len(mats), out_dir)
        return 0
    (D,) = load_params([src], cfg)
    formats.write_features(args.out, D, digest)
    return 0


def cmd_align_ingest(args, cfg: RunConfig) -> int:
    """One alignment to one logits file, or a directory of alignments to a
    directory of ``<stem>.paapp`` files (``--wav`` then names a directory too)."""
    if (args.frames is None) == (args.wav is None):
        raise ArgumentError("give exactly one of --frames or --wav to fix the frame count")
    vocab = cfg.load_vocab()
    alignments = _collect(args.inp, (".json",))
    if args.wav is not None:
        rows = _pair(alignments, (_collect(args.wav, AUDIO_SUFFIXES), "wav"))
    else:
        rows = [(stem, path, None) for stem, path in alignments.items()]
    out = Path(args.out)
    if Path(args.inp).is_dir():
        out.mkdir(parents=True, exist_ok=True)
    for stem, apath, wpath in rows:
        n = args.frames if wpath is None else cfg.frame_spec.n_frames(len(to_canonical(read_wav(wpath))))
        target = out / f"{stem}.paapp" if out.is_dir() else out
        formats.write_logits(target, to_frame_logits(parse_alignment(apath, vocab), n, cfg.frame_spec))
    return 0


def cmd_fit_weights(args, cfg: RunConfig) -> int:
    feats = _collect(args.features, FEATURE_SUFFIXES + AUDIO_SUFFIXES)
    logits = _collect(args.logits, (".bin", ".paapp", ".json"))
    rows = _pair(feats, (logits, "logits"))
    D_list = load_params([r[1] for r in rows], cfg)
    vocab = cfg.load_vocab()
    P_list = []
    for (stem, _, lpath), D in zip(rows, D_list):
        if lpath.suffix.lower() == ".json":
            P = to_frame_logits(parse_alignment(lpath, vocab), D.n_frames, cfg.frame_spec)
        else:
            P = formats.read_logits(lpath, vocab, cfg.frame_spec)
        if P.n_frames != D.n_frames:
            raise ArgumentError(f"utterance {stem!r}: {D.n_frames} descriptor frames vs {P.n_frames} logit frames")
        P_list.append(P)
    w = fit_weights(D_list, P_list, cfg.ridge_lambda, vocab)
    doc = {"config_digest": cfg.digest(), **w.to_dict()}
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    log.info("fitted weights on %d utterances (%d frames)", len(D_list), sum(D.n_frames for D in D_list))
    return 0


def cmd_loss(args, cfg: RunConfig) -> int:
    suffixes = AUDIO_SUFFIXES + FEATURE_SUFFIXES
    rows = _pair(
        _collect(args.clean, suffixes),
        (_collect(args.enhanced, suffixes), "enhanced"),
        (_collect(args.alignment, (".json",)), "alignment"),
    )
    w = load_weights(args.weights)
    mats = load_params([p for r in rows for p in (r[1], r[2])], cfg)
    pairs = []
    for k, (stem, _, _, apath) in enumerate(rows):
        D_C, D_E = mats[2 * k], mats[2 * k + 1]
        pairs.append((D_E, D_C, _phoneme_track(apath, D_C.n_frames, cfg)))
    losses, corpus = paap_loss_batch(pairs, w, cfg.loss_config)
    doc = {
        "config_digest": cfg.digest(),
        "weight_mode": cfg.weight_mode,
        "aux_scale": cfg.aux_scale,
        "utterances": [
            {"name": stem, "frames": int(p[0].n_frames), "loss": loss} for (stem, *_), p, loss in zip(rows, pairs, losses)
        ],
        "corpus_loss": corpus,
        "scaled_corpus_loss": cfg.aux_scale * corpus,
    }
    if args.original_loss is not None:
        doc["combined_objective"] = combined_objective(args.original_loss, corpus, cfg.loss_config)
    text = _dump(doc)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_analyze(args, cfg: RunConfig) -> int:
    suffixes = AUDIO_SUFFIXES + FEATURE_SUFFIXES
    rows = _pair(
        _collect(args.clean, suffixes),
        (_collect(args.enhanced, suffixes), "enhanced"),
        (_collect(args.baseline, suffixes), "baseline"),
        (_collect(args.alignments, (".json",)), "alignments"),
    )
    mats = load_params([p for r in rows for p in r[1:4]], cfg)
    triples = []
    tracks = []
    for k, row in enumerate(rows):
        D_C, D_E, D_B = mats[3 * k : 3 * k + 3]
        triples.append((D_E, D_B, D_C))
        tracks.append(_phoneme_track(row[4], D_C.n_frames, cfg))
    report = analysis.build_report(triples, tracks, cfg.load_vocab())
    digest = cfg.digest()
    analysis.emit_report(report, args.out, config_digest=digest)
    if args.plot_data:
        analysis.emit_plot_data(report, args.plot_data, config_digest=digest)
    log.info("overall acoustic improvement %.2f %% over %d frames", report.overall_improvement, report.n_frames)
    return 0


def cmd_mix(args, cfg: RunConfig) -> int:
    clean = to_canonical(read_wav(args.clean))
    noise = to_canonical(read_wav(args.noise))
    mixed = mix_at_snr(clean, noise, args.snr_db)
    peak = float(np.max(np.abs(mixed.samples))) if len(mixed) else 0.0
    if args.encoding == "pcm16" and peak >= 1.0:
        log.warning("mixture peak %.3f would clip; scaling the whole mixture by %.4f", peak, 0.999 / peak)
        mixed = Waveform(mixed.samples * (0.999 / peak), mixed.sample_rate_hz)
    write_wav(args.out, mixed, args.encoding)
    return 0


# -- argument parsing ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration (default: $PAAP_CONFIG)")
    common.add_argument("--backend", choices=("dsp", "neural"), help="descriptor backend (default dsp)")
    common.add_argument("--weights-estimator", dest="estimator_weights", help="estimator weight file for --backend neural")
    common.add_argument("--vocab", help="phoneme vocabulary file (41 labels)")
    common.add_argument("--hop", type=int)
    common.add_argument("--win", type=int)
    common.add_argument("--fft-size", type=int)
    common.add_argument("--jobs", type=int, help="worker processes (0 = all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="paap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("extract", parents=[common], help="compute the N x 25 descriptor matrix")
    p.add_argument("--in", dest="inp", required=True, help="WAV file or directory of WAVs")
    p.add_argument("--out", required=True, help=".csv or binary file, or output directory")
    p.add_argument("--format", choices=("csv", "bin"), default="bin", help="file type when --in is a directory")
    p.add_argument("--weights", dest="estimator_weights_alt", help="alias of --weights-estimator")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("align-ingest", parents=[common], help="alignment JSON -> frame logits")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--frames", type=int)
    p.add_argument("--wav", help="derive the frame count from this WAV (or directory of WAVs)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align_ingest)

    p = sub.add_parser("fit-weights", parents=[common], help="fit acoustic-phonetic weights")
    p.add_argument("--features", required=True, help="directory of feature files or WAVs")
    p.add_argument("--logits", required=True, help="directory of logits .bin or alignment .json")
    p.add_argument("--lambda", dest="ridge_lambda", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_weights)

    p = sub.add_parser("loss", parents=[common], help="phoneme-weighted descriptor loss")
    p.add_argument("--enhanced", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--alignment", required=True)
    p.add_argument("--weights", required=True, help="acoustic-phonetic weights JSON")
    p.add_argument("--weight-mode", choices=("literal", "absolute"))
    p.add_argument("--aux-scale", type=float)
    p.add_argument("--original-loss", type=float, help="report original + aux_scale * loss")
    p.add_argument("--out", help="also write the JSON result here")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("analyze", parents=[common], help="acoustic improvement report")
    p.add_argument("--enhanced", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--alignments", required=True)
    p.add_argument("--out", required=True, help="report.csv or report.json")
    p.add_argument("--plot-data", help="directory for bar/scatter series")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("mix", parents=[common], help="mix clean speech and noise at an SNR")
    p.add_argument("--clean", required=True)
    p.add_argument("--noise", required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--encoding", choices=("pcm16", "float32"), default="pcm16")
    p.set_defaults(func=cmd_mix)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="paap: %(message)s")
    try:
        cfg = resolve_config(
            args.config,
            backend=args.backend,
            weights=args.estimator_weights or getattr(args, "estimator_weights_alt", None),
            vocab=args.vocab,
            hop=args.hop,
            win=args.win,
            fft_size=args.fft_size,
            jobs=args.jobs,
            ridge_lambda=getattr(args, "ridge_lambda", None),
            weight_mode=getattr(args, "weight_mode", None),
            aux_scale=getattr(args, "aux_scale", None),
        )
        return args.func(args, cfg)
    except (PaapError, OSError, ValueError) as exc:
        print(f"paap: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
