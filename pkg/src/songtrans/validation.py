"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .core import AudioSegment, SongTransError
from .namodel.features import N_PITCHES, FrameSeries


def check_frames(X, n_features: int | None = None) -> list[FrameSeries]:
    """Coerce ``X`` into a list of FrameSeries with a common feature width.

    Accepts a single FrameSeries or 2-D array as a one-element list.
    """
    if isinstance(X, FrameSeries) or (isinstance(X, np.ndarray) and X.ndim == 2):
        X = [X]
    out = []
    for i, x in enumerate(X):
        hop = x.hop_cs if isinstance(x, FrameSeries) else 1
        mat = x.features if isinstance(x, FrameSeries) else x
        try:
            mat = check_array(mat, dtype=np.float64, ensure_min_samples=1)
        except ValueError as exc:
            raise SongTransError(f"segment {i}: {exc}") from None
        if n_features is not None and mat.shape[1] != n_features:
            raise SongTransError(f"segment {i} has {mat.shape[1]} features, expected {n_features}")
        n_features = mat.shape[1]
        out.append(FrameSeries(mat, hop))
    if not out:
        raise SongTransError("no segments given")
    return out


def check_audio(X) -> list[AudioSegment]:
    if isinstance(X, AudioSegment):
        return [X]
    out = [x if isinstance(x, AudioSegment) else AudioSegment(np.asarray(x)) for x in X]
    if not out:
        raise SongTransError("no audio given")
    return out


def check_targets(y, frames: list[FrameSeries]):
    """Validate ``(boundary_labels, intervals, pitches)`` per segment."""
    y = list(y)
    if len(y) != len(frames):
        raise SongTransError(f"{len(y)} targets for {len(frames)} segments")
    out = []
    for i, ((labels, intervals, pitches), f) in enumerate(zip(y, frames)):
        labels = np.asarray(labels).reshape(-1)
        if labels.size != f.n:
            raise SongTransError(f"segment {i}: {labels.size} boundary labels for {f.n} frames")
        if not np.isin(labels, (0, 1)).all():
            raise SongTransError(f"segment {i}: boundary labels must be 0 or 1")
        intervals = np.asarray(intervals, dtype=np.int64).reshape(-1, 2)
        pitches = np.asarray(pitches, dtype=np.int64).reshape(-1)
        if pitches.size != intervals.shape[0]:
            raise SongTransError(f"segment {i}: {pitches.size} pitches for {intervals.shape[0]} notes")
        if pitches.size and (pitches.min() < 0 or pitches.max() >= N_PITCHES):
            raise SongTransError(f"segment {i}: pitch outside [0, {N_PITCHES - 1}]")
        if intervals.size and ((intervals[:, 0] < 0).any() or (intervals[:, 1] > f.n).any()
                               or (intervals[:, 1] <= intervals[:, 0]).any()):
            raise SongTransError(f"segment {i}: note interval empty or outside the frames")
        out.append((labels, intervals, pitches))
    return out
