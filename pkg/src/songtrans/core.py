"""Domain types shared by every stage, plus annotation and lexicon persistence.

Durations are integer centiseconds throughout. Pitch 0 means silence/rest.
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

SCHEMA_VERSION = 1
SILENCE_PITCH = 0
#: Allowed difference between a word's duration and the sum of its notes.
DURATION_SLACK_CS = 1


class SongTransError(ValueError):
    """Base class for domain errors (bad input, violated invariants)."""


class InvariantError(SongTransError):
    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class RecordError(SongTransError):
    """A malformed or invalid record in a line-delimited file."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True, eq=False)
class AudioSegment:
    samples: np.ndarray
    sample_rate_hz: int = 16000
    id: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64).reshape(-1)
        if samples.size == 0:
            raise InvariantError("audio-nonempty", "audio has no samples")
        if not np.all(np.isfinite(samples)):
            raise InvariantError("audio-finite", "audio contains non-finite samples")
        if np.max(np.abs(samples)) > 1.0:
            raise InvariantError("audio-range", "samples must lie in [-1, 1]")
        if int(self.sample_rate_hz) <= 0:
            raise InvariantError("sample-rate", "sample_rate_hz must be positive")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_cs(self) -> float:
        return 100.0 * self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class NoteEvent:
    pitch_midi: int
    duration_cs: int

    def __post_init__(self):
        if not 0 <= self.pitch_midi <= 127:
            raise InvariantError("pitch-range", f"pitch {self.pitch_midi} outside [0, 127]")
        if self.duration_cs < 0:
            raise InvariantError("note-duration", f"negative note duration {self.duration_cs}")

    @property
    def is_silence(self) -> bool:
        return self.pitch_midi == SILENCE_PITCH


@dataclass(frozen=True)
class WordAnnotation:
    text: str
    duration_cs: int
    notes: tuple[NoteEvent, ...]
    phones: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))
        object.__setattr__(self, "phones", tuple(self.phones))
        problems = _word_problems(self.text, self.duration_cs, [n.duration_cs for n in self.notes])
        if problems:
            raise InvariantError(*problems[0])

    @property
    def note_count(self) -> int:
        return len(self.notes)


@dataclass(frozen=True)
class SegmentAnnotation:
    segment_id: str
    words: tuple[WordAnnotation, ...]
    audio_ref: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise InvariantError("words-nonempty", f"segment {self.segment_id!r} has no words")

    @property
    def tokens(self) -> list[str]:
        return [w.text for w in self.words]

    @property
    def duration_cs(self) -> int:
        return sum(w.duration_cs for w in self.words)

    @property
    def notes(self) -> list[NoteEvent]:
        return [n for w in self.words for n in w.notes]

    def to_record(self) -> dict[str, Any]:
        record: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "segment_id": self.segment_id}
        if self.audio_ref is not None:
            record["audio_ref"] = self.audio_ref
        record["words"] = [
            {
                "text": w.text,
                "phones": list(w.phones),
                "duration_cs": w.duration_cs,
                "notes": [{"pitch_midi": n.pitch_midi, "duration_cs": n.duration_cs} for n in w.notes],
            }
            for w in self.words
        ]
        return record

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "SegmentAnnotation":
        """Build from a decoded JSON record; raises on the first problem found."""
        problems = diagnose_record(record)
        if problems:
            raise InvariantError(problems[0].invariant, problems[0].message)
        words = [
            WordAnnotation(
                text=w["text"],
                phones=tuple(w.get("phones", ())),
                duration_cs=w["duration_cs"],
                notes=tuple(NoteEvent(n["pitch_midi"], n["duration_cs"]) for n in w["notes"]),
            )
            for w in record["words"]
        ]
        return cls(segment_id=record["segment_id"], words=tuple(words), audio_ref=record.get("audio_ref"))


def _word_problems(text, duration_cs, note_durations) -> list[tuple[str, str]]:
    problems = []
    if not isinstance(text, str) or not text:
        problems.append(("text-nonempty", "word text must be a nonempty string"))
    if not _is_int(duration_cs) or duration_cs <= 0:
        problems.append(("word-duration", f"word duration must be a positive integer, got {duration_cs!r}"))
    if not note_durations:
        problems.append(("notes-nonempty", "word has no notes"))
    elif _is_int(duration_cs) and all(_is_int(d) for d in note_durations):
        total = sum(note_durations)
        if abs(total - duration_cs) > DURATION_SLACK_CS:
            problems.append(
                ("duration-sum", f"notes sum to {total} cs but word lasts {duration_cs} cs")
            )
    return problems


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass(frozen=True)
class Diagnostic:
    invariant: str
    message: str
    word_index: int | None = None

    def __str__(self):
        where = "" if self.word_index is None else f"word {self.word_index}: "
        return f"{where}{self.invariant}: {self.message}"


def diagnose_record(record: Mapping[str, Any]) -> list[Diagnostic]:
    """Check a raw annotation record against the schema and every invariant.

    Returns one :class:`Diagnostic` per violation; an empty list means the
    record can be turned into a :class:`SegmentAnnotation`.
    """
    out: list[Diagnostic] = []
    if not isinstance(record, Mapping):
        return [Diagnostic("schema", "record must be an object")]
    version = record.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        out.append(Diagnostic("schema", f"unsupported schema_version {version!r}"))
    if not isinstance(record.get("segment_id"), str):
        out.append(Diagnostic("schema", "field 'segment_id' must be a string"))
    if "audio_ref" in record and record["audio_ref"] is not None and not isinstance(record["audio_ref"], str):
        out.append(Diagnostic("schema", "field 'audio_ref' must be a string"))
    words = record.get("words")
    if not isinstance(words, list):
        out.append(Diagnostic("schema", "field 'words' must be an array"))
        return out
    if not words:
        out.append(Diagnostic("words-nonempty", "segment has no words"))
    for i, w in enumerate(words):
        if not isinstance(w, Mapping):
            out.append(Diagnostic("schema", "word must be an object", i))
            continue
        phones = w.get("phones", [])
        if not isinstance(phones, list) or not all(isinstance(p, str) for p in phones):
            out.append(Diagnostic("schema", "field 'phones' must be an array of strings", i))
        notes = w.get("notes")
        if not isinstance(notes, list):
            out.append(Diagnostic("schema", "field 'notes' must be an array", i))
            continue
        durations = []
        for j, n in enumerate(notes):
            if not isinstance(n, Mapping) or not _is_int(n.get("pitch_midi")) or not _is_int(n.get("duration_cs")):
                out.append(Diagnostic("schema", f"note {j} needs integer 'pitch_midi' and 'duration_cs'", i))
                continue
            if not 0 <= n["pitch_midi"] <= 127:
                out.append(Diagnostic("pitch-range", f"note {j} pitch {n['pitch_midi']} outside [0, 127]", i))
            if n["duration_cs"] < 0:
                out.append(Diagnostic("note-duration", f"note {j} has negative duration", i))
            durations.append(n["duration_cs"])
        if len(durations) < len(notes):
            continue
        for invariant, message in _word_problems(w.get("text"), w.get("duration_cs"), durations):
            out.append(Diagnostic(invariant, message, i))
    return out


def load_annotations(path) -> list[SegmentAnnotation]:
    """Read a JSON-lines annotation file. Blank lines are skipped."""
    path = Path(path)
    out = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(path, lineno, f"malformed JSON: {exc.msg}") from None
            problems = diagnose_record(record)
            if problems:
                raise RecordError(path, lineno, str(problems[0]))
            out.append(SegmentAnnotation.from_record(record))
    return out


def save_annotations(annotations: Iterable[SegmentAnnotation], path) -> None:
    lines = [json.dumps(a.to_record(), ensure_ascii=False) + "\n" for a in annotations]
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        entries = {w: tuple(p) for w, p in dict(self.entries).items()}
        for word, phones in entries.items():
            if not phones:
                raise InvariantError("lexicon-phones", f"lexicon entry {word!r} has no phones")
        object.__setattr__(self, "entries", entries)

    def __contains__(self, word):
        return word in self.entries

    def __len__(self):
        return len(self.entries)


def load_lexicon(path) -> Lexicon:
    """Read ``word<TAB>phone phone ...`` lines (UTF-8)."""
    path = Path(path)
    entries = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            word, sep, phones = line.partition("\t")
            if not sep or not word:
                raise RecordError(path, lineno, "expected 'word<TAB>phones'")
            phones = phones.split()
            if not phones:
                raise RecordError(path, lineno, f"entry {word!r} has no phones")
            entries[word] = tuple(phones)
    return Lexicon(entries)


def phones_of(word: str, lexicon: Lexicon, return_fallback: bool = False):
    """Phones for ``word``; out-of-vocabulary words get one phone per character.

    With ``return_fallback=True`` returns ``(phones, used_fallback)``.
    """
    if not word:
        raise SongTransError("phones_of needs a nonempty word")
    entry = lexicon.entries.get(word)
    fallback = entry is None
    phones = list(word) if fallback else list(entry)
    if return_fallback:
        return phones, fallback
    return phones


def read_wav(path) -> AudioSegment:
    """Read a mono PCM16 WAV file."""
    path = Path(path)
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise SongTransError(f"{path}: only mono audio is supported")
        if wf.getsampwidth() != 2:
            raise SongTransError(f"{path}: only 16-bit PCM is supported")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioSegment(samples, rate, id=path.stem)


def write_wav(audio: AudioSegment, path) -> None:
    pcm = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(audio.sample_rate_hz)
        wf.writeframes(pcm.tobytes())


def cs_to_samples(cs: float, sample_rate_hz: int) -> int:
    return int(math.floor(cs * sample_rate_hz / 100 + 0.5))


def notes_from_pairs(pairs: Sequence[tuple[int, int]]) -> tuple[NoteEvent, ...]:
    return tuple(NoteEvent(int(p), int(d)) for p, d in pairs)
