"""Join word-level sequence outputs with frame-level note predictions.

The word-duration record fixes where every word sits on the frame axis;
the note-number record says how many notes each word holds; the note
model supplies boundary posteriors and pitches inside each word.
"""

from __future__ import annotations

import logging
import warnings
from typing import Mapping

import numpy as np

from .core import Diagnostic, SegmentAnnotation, SongTransError, WordAnnotation, diagnose_record, phones_of
from .namodel.decode import decode_notes
from .namodel.features import FrameSeries
from .namodel.network import NaModelParams, boundary_posteriors, encoder_forward
from .seqfmt import ArKind, ArRecord

logger = logging.getLogger(__name__)


class DurationTruncationWarning(UserWarning):
    """Word durations ran past the end of the audio and were cut short."""


def word_windows(durations_cs, n_frames: int, hop_cs: int = 1) -> list[tuple[int, int]]:
    """Consecutive frame windows from word durations, starting at frame 0.

    Windows past ``n_frames`` are cut at the end of the audio (with a
    :class:`DurationTruncationWarning`); a word left with no frames is an error.
    """
    windows = []
    t = 0
    truncated = False
    for i, dur in enumerate(durations_cs):
        if dur <= 0:
            raise SongTransError(f"word {i} has non-positive duration {dur}")
        start = int(np.floor(t / hop_cs + 0.5))
        t += dur
        end = int(np.floor(t / hop_cs + 0.5))
        if end > n_frames:
            truncated = True
            end = n_frames
        if end <= start:
            raise SongTransError(f"word {i} has no frames left after truncation to {n_frames} frames")
        windows.append((start, end))
    if truncated:
        total = sum(durations_cs)
        warnings.warn(f"word durations sum to {total} cs but audio has {n_frames * hop_cs} cs; "
                      "final word truncated", DurationTruncationWarning, stacklevel=2)
    return windows


def assemble_from_posteriors(wd: ArRecord, nn: ArRecord, encoded, posteriors, params: NaModelParams,
                             hop_cs: int = 1, segment_id: str = "", audio_ref: str | None = None,
                             lexicon=None) -> SegmentAnnotation:
    """:func:`assemble` with the encoder and boundary head already applied."""
    _check_records(wd, nn)
    posteriors = np.asarray(posteriors, dtype=np.float64)
    windows = word_windows(wd.values, posteriors.size, hop_cs)
    notes = decode_notes(encoded, posteriors, list(zip(windows, nn.values)), params, hop_cs)
    words = []
    for token, (a, b), word_notes in zip(wd.tokens, windows, notes):
        phones = tuple(phones_of(token, lexicon)) if lexicon is not None else ()
        words.append(WordAnnotation(token, (b - a) * hop_cs, tuple(word_notes), phones))
    return SegmentAnnotation(segment_id, tuple(words), audio_ref)


def assemble(wd: ArRecord, nn: ArRecord, frames: FrameSeries, params: NaModelParams,
             segment_id: str = "", audio_ref: str | None = None, lexicon=None) -> SegmentAnnotation:
    """Build an annotation from the two sequence records and frame features.

    ``frames`` must already be in the model's input space (normalized the
    same way as during training).
    """
    _check_records(wd, nn)
    encoded = encoder_forward(frames, params)
    post = boundary_posteriors(encoded, params)
    return assemble_from_posteriors(wd, nn, encoded, post, params, frames.hop_cs, segment_id, audio_ref, lexicon)


def _check_records(wd: ArRecord, nn: ArRecord) -> None:
    if wd.kind is not ArKind.WORD_DURATION or nn.kind is not ArKind.NOTE_NUMBER:
        raise SongTransError("assemble needs a WD record and an NN record")
    if wd.tokens != nn.tokens:
        raise SongTransError(f"lyric mismatch between records: {' '.join(wd.tokens)!r} vs {' '.join(nn.tokens)!r}")


def validate(annotation: SegmentAnnotation | Mapping) -> list[Diagnostic]:
    """Invariant violations of an annotation or raw annotation record."""
    record = annotation.to_record() if isinstance(annotation, SegmentAnnotation) else annotation
    return diagnose_record(record)


def oracle_inputs(annotation: SegmentAnnotation, hop_cs: int = 1) -> tuple[FrameSeries, NaModelParams]:
    """Frames and hand-set weights under which :func:`assemble` is exact.

    Each frame is a one-hot of its true pitch plus a channel that is 1 on
    true within-word boundary frames. The encoder passes both through (a
    single-frame identity layer); the boundary head reads the boundary
    channel and the pitch head maps the pitch channels back onto themselves.
    So the boundary posterior is near 1 exactly on true boundaries and the
    pooled pitch of any true note span peaks at its pitch.
    """
    from .namodel.features import N_PITCHES, boundary_labels, note_targets

    n = int(np.floor(annotation.duration_cs / hop_cs + 0.5))
    intervals, pitches = note_targets(annotation, n, hop_cs)
    frames = np.zeros((n, N_PITCHES + 1))
    for (a, b), pitch in zip(intervals, pitches):
        frames[a:b, pitch] = 1.0
    frames[:, N_PITCHES] = boundary_labels(annotation, n, hop_cs)

    d = N_PITCHES + 1
    boundary_w = np.zeros(d)
    boundary_w[N_PITCHES] = 50.0
    params = NaModelParams(
        context=0,
        enc_w1=np.eye(d), enc_b1=np.zeros(d),
        enc_w2=np.eye(d), enc_b2=np.zeros(d),
        boundary_w=boundary_w, boundary_b=np.asarray(-25.0),
        pitch_w=np.eye(d)[:, :N_PITCHES], pitch_b=np.zeros(N_PITCHES),
    )
    return FrameSeries(frames, hop_cs), params
