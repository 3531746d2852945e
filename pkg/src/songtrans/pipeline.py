"""Corpus-preparation transforms.

Silence-based resegmentation of audio, the word/phone WER acceptance gate,
folding aligner silence into neighbouring phones, and filling rest pitches
from neighbouring notes.
"""

from __future__ import annotations

import enum
import math
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import AudioSegment, NoteEvent, RecordError, SegmentAnnotation, SongTransError, cs_to_samples

logger = logging.getLogger(__name__)

SILENCE = "SIL"
WORD_WER_THRESHOLD = Fraction(3, 10)
PHONE_WER_THRESHOLD = Fraction(2, 5)


@dataclass(frozen=True)
class SilenceParams:
    energy_threshold_db: float = -40.0
    min_silence_cs: int = 30
    frame_hop_cs: int = 1

    def __post_init__(self):
        if self.energy_threshold_db >= 0:
            raise SongTransError("energy_threshold_db must be negative (dBFS)")
        if self.frame_hop_cs <= 0 or self.min_silence_cs <= 0:
            raise SongTransError("min_silence_cs and frame_hop_cs must be positive")
        if self.min_silence_cs < self.frame_hop_cs:
            raise SongTransError("min_silence_cs must be >= frame_hop_cs")


def frame_rms_db(audio: AudioSegment, hop_cs: int = 1) -> np.ndarray:
    """RMS level in dBFS of consecutive non-overlapping frames of ``hop_cs``.

    The last frame may be shorter than the others. A full-scale sine sits
    at about -3 dBFS; digital silence maps to -inf.
    """
    hop = cs_to_samples(hop_cs, audio.sample_rate_hz)
    x = audio.samples
    n_frames = -(-x.size // hop)
    padded = np.zeros(n_frames * hop)
    padded[: x.size] = x ** 2
    sums = padded.reshape(n_frames, hop).sum(axis=1)
    counts = np.full(n_frames, hop, dtype=np.float64)
    counts[-1] = x.size - hop * (n_frames - 1)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(sums / counts)


def silent_runs(levels_db: np.ndarray, threshold_db: float, min_frames: int) -> list[tuple[int, int]]:
    """Maximal runs ``[start, end)`` of frames below threshold, at least ``min_frames`` long."""
    quiet = np.concatenate([[False], levels_db < threshold_db, [False]])
    edges = np.flatnonzero(np.diff(quiet.astype(np.int8)))
    runs = zip(edges[0::2], edges[1::2])
    return [(int(a), int(b)) for a, b in runs if b - a >= min_frames]


def segment_by_silence(audio: AudioSegment, params: SilenceParams | None = None) -> list[tuple[AudioSegment, int]]:
    """Split ``audio`` at long quiet stretches; returns ``(segment, offset_cs)`` pairs.

    Quiet stretches are dropped. Offsets are measured from the start of the
    input, so the voiced spans and the dropped spans tile the input.
    """
    params = params or SilenceParams()
    hop_cs = params.frame_hop_cs
    levels = frame_rms_db(audio, hop_cs)
    min_frames = -(-params.min_silence_cs // hop_cs)
    runs = silent_runs(levels, params.energy_threshold_db, min_frames)

    hop = cs_to_samples(hop_cs, audio.sample_rate_hz)
    out = []
    cursor = 0
    for start, end in runs + [(len(levels), len(levels))]:
        if start > cursor:
            a, b = cursor * hop, min(start * hop, audio.samples.size)
            seg_id = f"{audio.id}_{len(out):03d}" if audio.id else f"{len(out):03d}"
            out.append((AudioSegment(audio.samples[a:b], audio.sample_rate_hz, seg_id), cursor * hop_cs))
        cursor = end
    return out


class GateDecision(str, enum.Enum):
    ACCEPT_WORD = "AcceptWord"
    ACCEPT_PHONE = "AcceptPhone"
    REJECT = "Reject"


def filter_gate(word_wer: float, phone_wer: float,
                word_threshold: float = WORD_WER_THRESHOLD,
                phone_threshold: float = PHONE_WER_THRESHOLD) -> GateDecision:
    """Decide whether crawled lyrics can be trusted given WERs against a transcript.

    Both comparisons are strict and exact: floats are read as the decimal
    they print as, so ``0.3`` means 3/10 rather than the nearest binary value.
    """
    word_wer, phone_wer = _exact(word_wer), _exact(phone_wer)
    word_threshold, phone_threshold = _exact(word_threshold), _exact(phone_threshold)
    if word_wer < 0 or phone_wer < 0:
        raise SongTransError("WER values must be non-negative")
    if word_wer < word_threshold:
        return GateDecision.ACCEPT_WORD
    if phone_wer < phone_threshold:
        return GateDecision.ACCEPT_PHONE
    return GateDecision.REJECT


def _exact(x) -> Fraction:
    if isinstance(x, float):
        if not math.isfinite(x):
            raise SongTransError(f"WER and thresholds must be finite, got {x}")
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class AlignedPhone:
    phone: str
    start_cs: int
    end_cs: int

    def __post_init__(self):
        if not self.phone:
            raise SongTransError("aligned phone label must be nonempty")
        if not 0 <= self.start_cs < self.end_cs:
            raise SongTransError(f"bad interval {self.start_cs}-{self.end_cs} for {self.phone!r}")

    @property
    def is_silence(self) -> bool:
        return self.phone == SILENCE

    @property
    def duration_cs(self) -> int:
        return self.end_cs - self.start_cs


def check_contiguous(alignment: Sequence[AlignedPhone]) -> None:
    for prev, cur in zip(alignment, alignment[1:]):
        if cur.start_cs != prev.end_cs:
            raise SongTransError(
                f"alignment not contiguous: {prev.phone!r} ends at {prev.end_cs}, "
                f"{cur.phone!r} starts at {cur.start_cs}"
            )


def merge_silence(alignment: Sequence[AlignedPhone]) -> list[AlignedPhone]:
    """Fold every silence interval into the phone before it.

    Silence at the very start has no predecessor and extends the first
    phone backwards instead.
    """
    alignment = list(alignment)
    check_contiguous(alignment)
    voiced = [p for p in alignment if not p.is_silence]
    if not voiced:
        raise SongTransError("alignment contains only silence")
    out: list[AlignedPhone] = []
    lead_start = None
    for p in alignment:
        if p.is_silence:
            if out:
                out[-1] = replace(out[-1], end_cs=p.end_cs)
            elif lead_start is None:
                lead_start = p.start_cs
        elif not out and lead_start is not None:
            out.append(replace(p, start_cs=lead_start))
        else:
            out.append(p)
    return out


def read_alignment(path) -> list[AlignedPhone]:
    """Read ``start_cs<TAB>end_cs<TAB>label`` lines."""
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise RecordError(path, lineno, "expected start_cs<TAB>end_cs<TAB>label")
            try:
                out.append(AlignedPhone(fields[2], int(fields[0]), int(fields[1])))
            except ValueError as exc:
                raise RecordError(path, lineno, str(exc)) from None
    return out


def write_alignment(alignment: Sequence[AlignedPhone], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for p in alignment:
            fh.write(f"{p.start_cs}\t{p.end_cs}\t{p.phone}\n")


def pitch_fill(notes: Sequence[NoteEvent]) -> tuple[list[NoteEvent], bool]:
    """Replace rest pitches with the pitch of the nearest pitched note.

    On equal distance the earlier note wins. Returns ``(notes, all_silent)``;
    an all-rest sequence comes back unchanged with ``all_silent`` set.
    """
    notes = list(notes)
    if not notes:
        raise SongTransError("pitch_fill needs at least one note")
    pitched = [i for i, n in enumerate(notes) if not n.is_silence]
    if not pitched:
        return notes, True
    out = []
    j = 0  # index into pitched of the nearest pitched note at or after i
    for i, n in enumerate(notes):
        if not n.is_silence:
            out.append(n)
            continue
        while j < len(pitched) and pitched[j] < i:
            j += 1
        before = pitched[j - 1] if j > 0 else None
        after = pitched[j] if j < len(pitched) else None
        if after is None or (before is not None and i - before <= after - i):
            src = before
        else:
            src = after
        out.append(NoteEvent(notes[src].pitch_midi, n.duration_cs))
    return out, False


def pitch_fill_annotation(annotation: SegmentAnnotation) -> tuple[SegmentAnnotation, bool]:
    """Apply :func:`pitch_fill` across the segment's whole note sequence.

    Neighbours may come from adjacent words, since rests are mostly seen at
    the start or end of a sentence.
    """
    filled, all_silent = pitch_fill(annotation.notes)
    it = iter(filled)
    words = [replace(w, notes=tuple(next(it) for _ in w.notes)) for w in annotation.words]
    return replace(annotation, words=tuple(words)), all_silent
