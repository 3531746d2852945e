"""Text codec for autoregressive outputs: ``tokens <SEP> values``.

Two record kinds share the layout. ``WD`` records carry one duration (cs)
per lyric token, ``NN`` records carry the number of notes sung on each
token. :func:`ar_oracle` projects an annotation onto both kinds and stands
in for trained sequence models.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import InvariantError, SegmentAnnotation, SongTransError

SEP = "<SEP>"


class ArKind(str, enum.Enum):
    WORD_DURATION = "WD"
    NOTE_NUMBER = "NN"


class CodecError(SongTransError):
    pass


@dataclass(frozen=True)
class ArRecord:
    kind: ArKind
    tokens: tuple[str, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", ArKind(self.kind))
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if not self.tokens:
            raise InvariantError("tokens-nonempty", "record has no tokens")
        for t in self.tokens:
            if not t or t.split() != [t] or t == SEP:
                raise InvariantError("token-form", f"invalid token {t!r}")
        if len(self.values) != len(self.tokens):
            raise InvariantError(
                "parallel-length", f"{len(self.tokens)} tokens but {len(self.values)} values"
            )
        if any(v < 1 for v in self.values):
            what = "note count" if self.kind is ArKind.NOTE_NUMBER else "word duration"
            raise InvariantError("value-domain", f"every {what} must be >= 1, got {list(self.values)}")


def encode_ar(record: ArRecord) -> str:
    return " ".join([*record.tokens, SEP, *map(str, record.values)])


def decode_ar(text: str, kind) -> ArRecord:
    parts = text.split()
    n_sep = parts.count(SEP)
    if n_sep != 1:
        raise CodecError(f"expected exactly one {SEP} token, found {n_sep}")
    i = parts.index(SEP)
    tokens, raw_values = parts[:i], parts[i + 1 :]
    values = []
    for v in raw_values:
        try:
            values.append(int(v, 10))
        except ValueError:
            raise CodecError(f"value {v!r} is not a base-10 integer") from None
    if len(tokens) != len(values):
        raise CodecError(f"length mismatch: {len(tokens)} tokens but {len(values)} values")
    try:
        return ArRecord(ArKind(kind), tuple(tokens), tuple(values))
    except InvariantError as exc:
        raise CodecError(str(exc)) from None


def ar_oracle(annotation: SegmentAnnotation) -> tuple[ArRecord, ArRecord]:
    """Ground-truth (word-duration, note-number) records for an annotation."""
    tokens = tuple(annotation.tokens)
    wd = ArRecord(ArKind.WORD_DURATION, tokens, tuple(w.duration_cs for w in annotation.words))
    nn = ArRecord(ArKind.NOTE_NUMBER, tokens, tuple(w.note_count for w in annotation.words))
    return wd, nn


def format_line(record: ArRecord, segment_id: str = "") -> str:
    """One line of a record file: ``KIND|segment_id|encoded``."""
    return f"{record.kind.value}|{segment_id}|{encode_ar(record)}"


def parse_line(line: str) -> tuple[str, ArRecord]:
    """Inverse of :func:`format_line`; the segment id field is optional."""
    fields = line.rstrip("\n").split("|", 2)
    if len(fields) < 2:
        raise CodecError("record line must start with 'WD|' or 'NN|'")
    try:
        kind = ArKind(fields[0])
    except ValueError:
        raise CodecError(f"unknown record kind {fields[0]!r}") from None
    if len(fields) == 2:
        segment_id, body = "", fields[1]
    else:
        segment_id, body = fields[1], fields[2]
    return segment_id, decode_ar(body, kind)
