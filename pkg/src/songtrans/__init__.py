"""Lyric and note transcription with word-level lyric/note alignment."""

from .core import (
    AudioSegment,
    Lexicon,
    NoteEvent,
    SegmentAnnotation,
    SongTransError,
    WordAnnotation,
    load_annotations,
    load_lexicon,
    phones_of,
    save_annotations,
)
from .seqfmt import ArKind, ArRecord, ar_oracle, decode_ar, encode_ar
from .metrics import boundary_f1, note_pitch_wer, padded_mae, phone_wer, wer
from .assembler import assemble, validate
from .namodel import FrameFeaturizer, NoteTranscriber

__version__ = "0.1.0"
