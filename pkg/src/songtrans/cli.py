"""Command-line entry point: ``songtrans <subcommand> ...``.

Exit status is 0 on success, 1 on a domain or I/O error and 2 on a usage
error. Logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import core, metrics, pipeline, seqfmt
from .core import SongTransError
from .namodel.features import FrameSeries

logger = logging.getLogger("songtrans")

DEFAULT_TRAIN_CONFIG = Path(__file__).parent / "configs" / "acceptance.ini"


def _read_lyrics(path) -> dict[str, list[str]]:
    """``segment_id<TAB>token token ...`` per line."""
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            seg_id, sep, text = line.partition("\t")
            if not sep:
                raise core.RecordError(path, lineno, "expected segment_id<TAB>lyrics")
            out[seg_id] = text.split()
    return out


def _map(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_segment(args):
    audio = core.read_wav(args.audio)
    params = pipeline.SilenceParams(args.threshold_db, args.min_silence_cs, args.hop_cs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pieces = pipeline.segment_by_silence(audio, params)
    with (out / "segments.tsv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("file\toffset_cs\tduration_cs\n")
        for seg, offset in pieces:
            name = f"{seg.id}.wav"
            core.write_wav(seg, out / name)
            fh.write(f"{name}\t{offset}\t{seg.duration_cs:g}\n")
    logger.info("%s: %d voiced segments", args.audio, len(pieces))


def cmd_filter(args):
    lexicon = core.load_lexicon(args.lexicon)
    crawled = _read_lyrics(args.reference)
    transcribed = _read_lyrics(args.hypothesis)
    lines = ["segment_id\tword_wer\tphone_wer\tdecision"]
    counts = {d: 0 for d in pipeline.GateDecision}
    for seg_id, ref in crawled.items():
        if seg_id not in transcribed:
            raise SongTransError(f"no transcription for segment {seg_id!r}")
        if not ref:
            raise SongTransError(f"segment {seg_id!r} has empty lyrics")
        hyp = transcribed[seg_id]
        w = metrics.wer(ref, hyp)
        p = metrics.phone_wer(ref, hyp, lexicon)
        decision = pipeline.filter_gate(w, p, args.word_threshold, args.phone_threshold)
        counts[decision] += 1
        lines.append(f"{seg_id}\t{float(w):.6f}\t{float(p):.6f}\t{decision.value}")
    _emit("\n".join(lines) + "\n", args.out)
    logger.info("gate: %s", ", ".join(f"{d.value}={n}" for d, n in counts.items()))


def cmd_refine(args):
    merged = pipeline.merge_silence(pipeline.read_alignment(args.alignment))
    pipeline.write_alignment(merged, args.out)


def cmd_pitch_fill(args):
    out = []
    for ann in core.load_annotations(args.annotations):
        filled, all_silent = pipeline.pitch_fill_annotation(ann)
        if all_silent:
            logger.warning("segment %s: every note is silent; left unchanged", ann.segment_id)
        out.append(filled)
    core.save_annotations(out, args.out)


def cmd_encode(args):
    lines = []
    for ann in core.load_annotations(args.annotations):
        for record in seqfmt.ar_oracle(ann):
            lines.append(seqfmt.format_line(record, ann.segment_id))
    _emit("".join(line + "\n" for line in lines), args.out)


def cmd_decode(args):
    out = []
    with Path(args.records).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                seg_id, rec = seqfmt.parse_line(line)
            except SongTransError as exc:
                raise core.RecordError(args.records, lineno, str(exc)) from None
            out.append(json.dumps({"segment_id": seg_id, "kind": rec.kind.value,
                                   "tokens": list(rec.tokens), "values": list(rec.values)},
                                  ensure_ascii=False))
    _emit("".join(o + "\n" for o in out), args.out)


def cmd_synth(args):
    from .synth import SynthConfig, synth_dataset

    config = SynthConfig(
        n_segments=args.n,
        words_per_segment=tuple(args.words),
        notes_per_word=tuple(args.notes),
        pitch_range=tuple(args.pitch),
        note_duration_cs=tuple(args.duration),
        seed=args.seed,
    )
    synth_dataset(config, args.out, jobs=args.jobs)


def cmd_train(args):
    from .namodel.train import load_train_config
    from .runner import fit_corpus
    from .synth import corpus_analyzer, load_corpus, split_corpus

    config = load_train_config(args.config, seed=args.seed, lr=args.lr, steps=args.steps, lam=args.lam)
    train_segs, _ = split_corpus(load_corpus(args.corpus), args.held_out)
    model = fit_corpus(train_segs, config)
    model.save(args.out, corpus_analyzer(args.corpus))
    if args.loss_log:
        Path(args.loss_log).write_text("".join(f"{v!r}\n" for v in model.loss_curve_), encoding="utf-8")
    logger.info("saved model to %s (final loss %.5f)", args.out, model.loss_curve_[-1] if model.loss_curve_ else float("nan"))


def cmd_infer(args):
    from .namodel.estimator import NoteTranscriber
    from .runner import infer_segments
    from .synth import load_corpus, split_corpus

    model, analyzer = NoteTranscriber.load(args.model)
    segments = load_corpus(args.corpus)
    if args.split == "held-out":
        segments = split_corpus(segments, args.held_out)[1]
    lexicon = core.load_lexicon(args.lexicon) if args.lexicon else None
    core.save_annotations(infer_segments(model, segments, analyzer, args.jobs, lexicon), args.out)


def cmd_align(args):
    from .namodel.estimator import FrameFeaturizer, NoteTranscriber

    model, analyzer = NoteTranscriber.load(args.model)
    featurizer = FrameFeaturizer.from_config(analyzer)
    lexicon = core.load_lexicon(args.lexicon) if args.lexicon else None

    pairs: dict[str, dict] = {}
    with Path(args.records).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                seg_id, rec = seqfmt.parse_line(line)
            except SongTransError as exc:
                raise core.RecordError(args.records, lineno, str(exc)) from None
            slot = pairs.setdefault(seg_id, {})
            if rec.kind in slot:
                raise core.RecordError(args.records, lineno, f"second {rec.kind.value} record for {seg_id!r}")
            slot[rec.kind] = rec
    ids = list(pairs)

    def one(seg_id):
        slot = pairs[seg_id]
        if len(slot) != 2:
            raise SongTransError(f"segment {seg_id!r} needs both a WD and an NN record")
        if args.frames_dir:
            path = Path(args.frames_dir) / f"{seg_id}.npz"
            with np.load(path) as z:
                frames = [FrameSeries(z["features"], int(z["hop_cs"]) if "hop_cs" in z else 1)]
            audio_ref = None
        else:
            path = Path(args.audio_dir) / f"{seg_id}.wav"
            frames = featurizer.transform([core.read_wav(path)])
            audio_ref = str(path)
        wd = slot[seqfmt.ArKind.WORD_DURATION]
        nn = slot[seqfmt.ArKind.NOTE_NUMBER]
        ann = model.predict(frames, [(wd, nn)], [seg_id], lexicon)[0]
        return core.SegmentAnnotation(ann.segment_id, ann.words, audio_ref)

    core.save_annotations(_map(one, ids, args.jobs), args.out)


def cmd_eval(args):
    pred = core.load_annotations(args.pred)
    truth = core.load_annotations(args.truth)
    lexicon = core.load_lexicon(args.lexicon) if args.lexicon else core.Lexicon()
    report = metrics.evaluate(pred, truth, lexicon, args.tolerance_cs)
    width = max(map(len, report))
    sys.stdout.write("".join(f"{k:<{width}}  {v:.6f}\n" for k, v in report.items()))
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _range(value: str):
    lo, sep, hi = value.partition(",")
    try:
        return int(lo), int(hi if sep else lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO,HI integers, got {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    # Logging flags are accepted before or after the subcommand name.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS,
                        help="warnings and errors only")
    parser = argparse.ArgumentParser(prog="songtrans", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    _add = sub.add_parser
    sub.add_parser = lambda *a, **kw: _add(*a, parents=[common], **kw)

    p = sub.add_parser("segment", help="split audio at silences")
    p.add_argument("--audio", required=True, help="mono PCM16 WAV")
    p.add_argument("--out", required=True, help="output directory for segment WAVs + segments.tsv")
    p.add_argument("--threshold-db", type=float, default=-40.0)
    p.add_argument("--min-silence-cs", type=int, default=30)
    p.add_argument("--hop-cs", type=int, default=1)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("filter", help="accept or reject crawled lyrics by word/phone WER")
    p.add_argument("--reference", required=True, help="crawled lyrics, segment_id<TAB>tokens")
    p.add_argument("--hypothesis", required=True, help="transcribed lyrics, same layout")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--word-threshold", type=Fraction, default=pipeline.WORD_WER_THRESHOLD)
    p.add_argument("--phone-threshold", type=Fraction, default=pipeline.PHONE_WER_THRESHOLD)
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("refine", help="merge aligner silences into neighbouring phones")
    p.add_argument("--alignment", required=True, help="start_cs<TAB>end_cs<TAB>label lines")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("pitch-fill", help="replace rest pitches with neighbouring pitches")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pitch_fill)

    p = sub.add_parser("encode", help="annotations -> WD|/NN| sequence records")
    p.add_argument("--annotations", required=True)
    p.add_argument("--out", help="record file (default stdout)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="validate sequence records and print them as JSON lines")
    p.add_argument("--records", required=True)
    p.add_argument("--out", help="default stdout")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--n", type=int, default=200, help="number of segments")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.add_argument("--words", type=_range, default=(3, 8), metavar="LO,HI")
    p.add_argument("--notes", type=_range, default=(1, 4), metavar="LO,HI")
    p.add_argument("--pitch", type=_range, default=(55, 79), metavar="LO,HI")
    p.add_argument("--duration", type=_range, default=(10, 40), metavar="LO,HI", help="note duration, cs")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the note model on a synthetic corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model file (.npz)")
    p.add_argument("--config", default=str(DEFAULT_TRAIN_CONFIG), help="INI file with a [train] section")
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--held-out", type=float, default=0.1, help="fraction of segments kept out of training")
    p.add_argument("--loss-log", help="write one training loss per line")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="annotate corpus segments using ground-truth sequence records")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("held-out", "all"), default="held-out")
    p.add_argument("--held-out", type=float, default=0.1)
    p.add_argument("--lexicon")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("align", help="sequence records + audio + model -> annotations")
    p.add_argument("--records", required=True, help="WD|id|... and NN|id|... lines")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--audio-dir", help="directory holding <segment_id>.wav")
    src.add_argument("--frames-dir", help="directory holding <segment_id>.npz with raw 'features'")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("eval", help="score predicted annotations against the truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--tolerance-cs", type=int, default=3)
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=cmd_eval)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    verbose, quiet = getattr(args, "verbose", False), getattr(args, "quiet", False)
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        args.func(args)
    except (SongTransError, OSError) as exc:
        logger.error("%s", exc)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
