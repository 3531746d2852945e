"""Random valid values shared by property tests and the acceptance suite."""

from __future__ import annotations

import numpy as np

from songtrans.core import NoteEvent, SegmentAnnotation, WordAnnotation
from songtrans.seqfmt import ArKind, ArRecord

ALPHABET = list("abcdefghijklmnopqrstuvwxyz") + ["é", "ß", "我", "爱", "歌", "ñ"]


def random_token(rng: np.random.Generator, max_len: int = 4) -> str:
    n = int(rng.integers(1, max_len + 1))
    return "".join(ALPHABET[i] for i in rng.integers(len(ALPHABET), size=n))


def random_annotation(rng: np.random.Generator, max_words: int = 6, max_notes: int = 4,
                      exact_sums: bool = False, with_phones: bool = True,
                      segment_id: str | None = None) -> SegmentAnnotation:
    """Any valid annotation. ``exact_sums`` makes every word exactly as long as its notes."""
    words = []
    for _ in range(int(rng.integers(1, max_words + 1))):
        k = int(rng.integers(1, max_notes + 1))
        notes = tuple(NoteEvent(int(rng.integers(0, 128)), int(rng.integers(1, 60))) for _ in range(k))
        total = sum(n.duration_cs for n in notes)
        dur = total if exact_sums else max(1, total + int(rng.integers(-1, 2)))
        phones = tuple(random_token(rng, 2) for _ in range(int(rng.integers(1, 4)))) if with_phones else ()
        words.append(WordAnnotation(random_token(rng), dur, notes, phones))
    seg_id = segment_id if segment_id is not None else f"s{int(rng.integers(10**6))}"
    audio_ref = None if rng.random() < 0.5 else f"audio/{seg_id}.wav"
    return SegmentAnnotation(seg_id, tuple(words), audio_ref)


def random_ar_record(rng: np.random.Generator, max_len: int = 8) -> ArRecord:
    n = int(rng.integers(1, max_len + 1))
    kind = ArKind.WORD_DURATION if rng.random() < 0.5 else ArKind.NOTE_NUMBER
    hi = 500 if kind is ArKind.WORD_DURATION else 8
    return ArRecord(kind, tuple(random_token(rng) for _ in range(n)),
                    tuple(int(v) for v in rng.integers(1, hi + 1, size=n)))
