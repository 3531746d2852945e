"""Synthetic songs with exactly known lyrics, word durations and notes.

Every note is a sine at its MIDI pitch whose amplitude ramps up from zero
over the first centisecond, which leaves an audible onset at each note
boundary. Corpora on disk look like::

    manifest.tsv        segment_id, audio path, tensor path (relative)
    annotations.jsonl   ground truth, one segment per line
    lexicon.tsv         pronunciations of every generated token
    synth.json          generator settings
    audio/<id>.wav      PCM16 mono
    tensors/<id>.npz    features, boundary_labels, note_intervals, note_pitches
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    AudioSegment,
    Lexicon,
    NoteEvent,
    SegmentAnnotation,
    SongTransError,
    WordAnnotation,
    cs_to_samples,
    read_wav,
    save_annotations,
    write_wav,
)
from .namodel.features import AnalyzerConfig, FrameSeries, boundary_labels, frame_features, note_targets

logger = logging.getLogger(__name__)

MIN_PITCH, MAX_PITCH = 36, 96
MIN_NOTE_CS = 5
AMPLITUDE = 0.5
RAMP_CS = 1

CONSONANTS = ("b", "d", "g", "k", "l", "m", "n", "p", "s", "t")
VOWELS = ("a", "e", "i", "o", "u")


@dataclass(frozen=True)
class SegmentSpec:
    """Words as ``(token, [(pitch_midi, duration_cs), ...])`` pairs."""

    words: tuple
    segment_id: str = "synth"
    phones: tuple | None = None


def synth_segment(spec: SegmentSpec, seed: int = 0, sample_rate_hz: int = 16000) -> tuple[AudioSegment, SegmentAnnotation]:
    """Render ``spec`` and return the audio with its ground-truth annotation.

    ``seed`` only picks each note's starting phase.
    """
    rng = np.random.default_rng(seed)
    chunks = []
    words = []
    for wi, (token, notes) in enumerate(spec.words):
        if not notes:
            raise SongTransError(f"word {token!r} has no notes")
        events = []
        for pitch, dur in notes:
            if not MIN_PITCH <= pitch <= MAX_PITCH:
                raise SongTransError(f"pitch {pitch} outside [{MIN_PITCH}, {MAX_PITCH}]")
            if dur < MIN_NOTE_CS:
                raise SongTransError(f"note duration {dur} cs is below {MIN_NOTE_CS} cs")
            chunks.append(_render_note(pitch, dur, rng.uniform(0, 2 * np.pi), sample_rate_hz))
            events.append(NoteEvent(int(pitch), int(dur)))
        phones = spec.phones[wi] if spec.phones is not None else ()
        words.append(WordAnnotation(token, sum(e.duration_cs for e in events), tuple(events), tuple(phones)))
    if not words:
        raise SongTransError("segment spec has no words")
    audio = AudioSegment(np.concatenate(chunks), sample_rate_hz, spec.segment_id)
    return audio, SegmentAnnotation(spec.segment_id, tuple(words))


def midi_hz(pitch: float) -> float:
    return 440.0 * 2.0 ** ((pitch - 69) / 12.0)


def _render_note(pitch: int, duration_cs: int, phase: float, sr: int) -> np.ndarray:
    n = cs_to_samples(duration_cs, sr)
    t = np.arange(n) / sr
    env = np.ones(n)
    ramp = min(cs_to_samples(RAMP_CS, sr), n)
    env[:ramp] = np.arange(ramp) / ramp
    return AMPLITUDE * env * np.sin(2 * np.pi * midi_hz(pitch) * t + phase)


@dataclass(frozen=True)
class SynthConfig:
    n_segments: int = 200
    words_per_segment: tuple[int, int] = (3, 8)
    notes_per_word: tuple[int, int] = (1, 4)
    pitch_range: tuple[int, int] = (55, 79)
    note_duration_cs: tuple[int, int] = (10, 40)
    seed: int = 7
    sample_rate_hz: int = 16000

    def __post_init__(self):
        for name in ("words_per_segment", "notes_per_word", "pitch_range", "note_duration_cs"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 1:
                raise SongTransError(f"{name} must be a nonempty range of positive integers")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if self.n_segments < 0:
            raise SongTransError("n_segments must be >= 0")
        if self.pitch_range[0] < MIN_PITCH or self.pitch_range[1] > MAX_PITCH:
            raise SongTransError(f"pitch range must lie within [{MIN_PITCH}, {MAX_PITCH}]")
        if self.note_duration_cs[0] < MIN_NOTE_CS:
            raise SongTransError(f"note durations must be >= {MIN_NOTE_CS} cs")


def syllable_inventory() -> list[str]:
    return [c + v for c in CONSONANTS for v in VOWELS]


def synth_lexicon() -> Lexicon:
    return Lexicon({s: (s[0], s[1:]) for s in syllable_inventory()})


def random_spec(config: SynthConfig, index: int) -> tuple[SegmentSpec, int]:
    """Spec and phase seed for segment ``index``, drawn from its own stream."""
    rng = np.random.default_rng([config.seed, index])
    lexicon = synth_lexicon()
    vocab = syllable_inventory()
    words = []
    for _ in range(rng.integers(config.words_per_segment[0], config.words_per_segment[1] + 1)):
        token = vocab[rng.integers(len(vocab))]
        k = rng.integers(config.notes_per_word[0], config.notes_per_word[1] + 1)
        notes = [
            (int(rng.integers(config.pitch_range[0], config.pitch_range[1] + 1)),
             int(rng.integers(config.note_duration_cs[0], config.note_duration_cs[1] + 1)))
            for _ in range(k)
        ]
        words.append((token, notes))
    phones = tuple(lexicon.entries[t] for t, _ in words)
    spec = SegmentSpec(tuple(words), segment_id=f"seg{index:05d}", phones=phones)
    return spec, int(rng.integers(2**31))


def quantize_pcm16(audio: AudioSegment) -> AudioSegment:
    """The audio as it reads back from a PCM16 file."""
    pcm = np.clip(np.round(audio.samples * 32767.0), -32768, 32767)
    return AudioSegment(pcm / 32768.0, audio.sample_rate_hz, audio.id)


def training_tensors(audio: AudioSegment, annotation: SegmentAnnotation, analyzer: AnalyzerConfig | None = None):
    """``(frames, boundary_labels, note_intervals, note_pitches)`` for one segment."""
    frames = frame_features(audio, analyzer)
    labels = boundary_labels(annotation, frames.n, frames.hop_cs)
    intervals, pitches = note_targets(annotation, frames.n, frames.hop_cs)
    return frames, labels, intervals, pitches


def _build_one(config: SynthConfig, index: int, out: Path, analyzer: AnalyzerConfig):
    spec, phase_seed = random_spec(config, index)
    audio, ann = synth_segment(spec, phase_seed, config.sample_rate_hz)
    audio_rel = f"audio/{spec.segment_id}.wav"
    tensor_rel = f"tensors/{spec.segment_id}.npz"
    write_wav(audio, out / audio_rel)
    frames, labels, intervals, pitches = training_tensors(quantize_pcm16(audio), ann, analyzer)
    np.savez(out / tensor_rel, features=frames.features, boundary_labels=labels,
             note_intervals=intervals, note_pitches=pitches, hop_cs=np.int64(frames.hop_cs))
    ann = SegmentAnnotation(ann.segment_id, ann.words, audio_ref=audio_rel)
    return ann, (spec.segment_id, audio_rel, tensor_rel)


def synth_dataset(config: SynthConfig, out_dir, analyzer: AnalyzerConfig | None = None, jobs: int = 1) -> list[SegmentAnnotation]:
    """Write a synthetic corpus to ``out_dir`` and return its annotations.

    Output depends only on ``config`` (each segment has its own derived
    seed), so ``jobs`` changes speed, not content.
    """
    analyzer = analyzer or AnalyzerConfig()
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    (out / "tensors").mkdir(exist_ok=True)
    indices = range(config.n_segments)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(lambda i: _build_one(config, i, out, analyzer), indices))
    else:
        results = [_build_one(config, i, out, analyzer) for i in indices]

    annotations = [r[0] for r in results]
    save_annotations(annotations, out / "annotations.jsonl")
    with (out / "manifest.tsv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("segment_id\taudio\ttensors\n")
        for _, row in results:
            fh.write("\t".join(row) + "\n")
    with (out / "lexicon.tsv").open("w", encoding="utf-8", newline="\n") as fh:
        for word, phones in synth_lexicon().entries.items():
            fh.write(f"{word}\t{' '.join(phones)}\n")
    settings = {"synth": asdict(config), "analyzer": asdict(analyzer)}
    (out / "synth.json").write_text(json.dumps(settings, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote %d synthetic segments to %s", len(annotations), out)
    return annotations


@dataclass(eq=False)
class CorpusSegment:
    segment_id: str
    annotation: SegmentAnnotation
    audio_path: Path
    tensor_path: Path

    def load_tensors(self):
        with np.load(self.tensor_path) as z:
            frames = FrameSeries(z["features"], int(z["hop_cs"]))
            return frames, z["boundary_labels"].copy(), z["note_intervals"].copy(), z["note_pitches"].copy()

    def load_audio(self) -> AudioSegment:
        return read_wav(self.audio_path)


def load_corpus(corpus_dir) -> list[CorpusSegment]:
    """Segments of a corpus written by :func:`synth_dataset`, in manifest order."""
    from .core import load_annotations

    root = Path(corpus_dir)
    anns = {a.segment_id: a for a in load_annotations(root / "annotations.jsonl")}
    out = []
    with (root / "manifest.tsv").open(encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("segment_id"):
            raise SongTransError(f"{root / 'manifest.tsv'}: missing header")
        for line in fh:
            if not line.strip():
                continue
            seg_id, audio_rel, tensor_rel = line.rstrip("\n").split("\t")
            if seg_id not in anns:
                raise SongTransError(f"manifest lists {seg_id!r} but annotations do not")
            out.append(CorpusSegment(seg_id, anns[seg_id], root / audio_rel, root / tensor_rel))
    return out


def corpus_analyzer(corpus_dir) -> AnalyzerConfig:
    """Front-end settings a corpus's tensors were computed with."""
    path = Path(corpus_dir) / "synth.json"
    try:
        settings = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        return AnalyzerConfig()
    return AnalyzerConfig(**settings["analyzer"])


def split_corpus(segments: Sequence, held_out_fraction: float = 0.1):
    """Deterministic split: the last ``held_out_fraction`` of segments is held out."""
    n_test = int(round(len(segments) * held_out_fraction))
    cut = len(segments) - n_test
    return list(segments[:cut]), list(segments[cut:])
