"""Constrained inference: split each word into its predicted number of notes."""

from __future__ import annotations

import logging
import warnings
from typing import Sequence

import numpy as np

from ..core import NoteEvent, SongTransError
from .network import NaModelParams, pitch_posterior, pool_note_feature

logger = logging.getLogger(__name__)


class BoundaryClampWarning(UserWarning):
    """A word window holds fewer candidate frames than requested boundaries."""


def select_boundaries(posteriors, word_window, k: int) -> list[int]:
    """Indices of the ``k - 1`` highest-posterior frames in ``[start, end)``.

    Ties go to the earlier frame; the result is sorted ascending. If the
    window is too short, every frame in it is returned and a
    :class:`BoundaryClampWarning` is issued.
    """
    start, end = int(word_window[0]), int(word_window[1])
    posteriors = np.asarray(posteriors, dtype=np.float64)
    if k < 1:
        raise SongTransError(f"note count must be >= 1, got {k}")
    if not 0 <= start < end <= posteriors.size:
        raise SongTransError(f"word window [{start}, {end}) is empty or outside {posteriors.size} frames")
    want = k - 1
    if want > end - start:
        warnings.warn(
            f"window [{start}, {end}) has {end - start} frames but {want} boundaries were requested",
            BoundaryClampWarning, stacklevel=2,
        )
        want = end - start
    # stable sort on the negated scores keeps earlier frames first among ties
    order = np.argsort(-posteriors[start:end], kind="stable")[:want]
    return sorted(int(i) + start for i in order)


def decode_notes(encoded, posteriors, words: Sequence[tuple[tuple[int, int], int]],
                 params: NaModelParams, hop_cs: int = 1) -> list[list[NoteEvent]]:
    """Notes for each ``((start_frame, end_frame), k)`` word.

    A word's first frame is its own onset, so internal boundaries are picked
    from the remaining frames. Each of the ``k`` pieces takes the pitch with
    the highest posterior on its pooled encoding; durations are frame counts
    times ``hop_cs`` and add up to the word window.
    """
    out = []
    for (start, end), k in words:
        start, end = int(start), int(end)
        if end <= start:
            raise SongTransError(f"empty word window [{start}, {end})")
        cuts = select_boundaries(posteriors, (start + 1, end), k) if end - start > 1 else []
        if k > 1 and end - start == 1:
            warnings.warn(f"one-frame window [{start}, {end}) cannot hold {k} notes",
                          BoundaryClampWarning, stacklevel=2)
        edges = [start, *cuts, end]
        notes = []
        for a, b in zip(edges, edges[1:]):
            pitch = int(np.argmax(pitch_posterior(pool_note_feature(encoded, (a, b)), params)))
            notes.append(NoteEvent(pitch, (b - a) * hop_cs))
        out.append(notes)
    return out
