"""Frame-level acoustic features and frame-level training targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import AudioSegment, SegmentAnnotation, SongTransError, cs_to_samples

N_PITCHES = 128


@dataclass(frozen=True, eq=False)
class FrameSeries:
    features: np.ndarray
    hop_cs: int = 1

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise SongTransError(f"frame features must be an (n >= 1, d) matrix, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise SongTransError("frame features contain non-finite values")
        if int(self.hop_cs) <= 0:
            raise SongTransError("hop_cs must be positive")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "hop_cs", int(self.hop_cs))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class AnalyzerConfig:
    """Front-end settings.

    Frame ``i`` summarizes a Hann window of ``window_cs`` centred on the hop
    span ``[i * hop_cs, (i + 1) * hop_cs)``; the signal is zero-padded at both
    ends, and a trailing partial hop is dropped. Bands are triangular on a
    MIDI (log-frequency) axis with centres evenly spaced from ``fmin_midi``
    to ``fmax_midi``.
    """

    window_cs: float = 2.5
    hop_cs: int = 1
    n_bands: int = 16
    fmin_midi: float = 36.0
    fmax_midi: float = 96.0
    n_fft: int = 1024
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.window_cs < self.hop_cs:
            raise SongTransError("analysis window must be at least one hop long")
        if self.n_bands < 2 or self.fmax_midi <= self.fmin_midi:
            raise SongTransError("need at least two bands over a nonempty pitch range")

    @property
    def dim(self) -> int:
        return self.n_bands + 1


def midi_to_hz(m):
    return 440.0 * 2.0 ** ((np.asarray(m, dtype=np.float64) - 69.0) / 12.0)


def band_centers_midi(config: AnalyzerConfig) -> np.ndarray:
    return np.linspace(config.fmin_midi, config.fmax_midi, config.n_bands)


def band_weights(config: AnalyzerConfig, sample_rate_hz: int) -> np.ndarray:
    """Triangular filter weights, shape ``(n_fft // 2 + 1, n_bands)``."""
    freqs = np.fft.rfftfreq(config.n_fft, 1.0 / sample_rate_hz)
    with np.errstate(divide="ignore"):
        bin_midi = 69.0 + 12.0 * np.log2(freqs / 440.0)
    centers = band_centers_midi(config)
    spacing = centers[1] - centers[0]
    dist = np.abs(bin_midi[:, None] - centers[None, :]) / spacing
    return np.clip(1.0 - dist, 0.0, None)


def frame_features(audio: AudioSegment, config: AnalyzerConfig | None = None) -> FrameSeries:
    """Per-frame ``[log energy, log band energies...]``."""
    config = config or AnalyzerConfig()
    sr = audio.sample_rate_hz
    hop = cs_to_samples(config.hop_cs, sr)
    win = cs_to_samples(config.window_cs, sr)
    x = audio.samples
    if x.size < win:
        raise SongTransError(f"audio has {x.size} samples, shorter than one {win}-sample window")
    if win > config.n_fft:
        raise SongTransError("n_fft must be at least the window length")
    n = x.size // hop

    left = (win - hop) // 2
    padded = np.concatenate([np.zeros(left), x, np.zeros(win)])
    idx = np.arange(n)[:, None] * hop + np.arange(win)[None, :]
    window = np.hanning(win + 2)[1:-1]
    frames = padded[idx] * window

    energy = (frames ** 2).sum(axis=1) / (window ** 2).sum()
    power = np.abs(np.fft.rfft(frames, n=config.n_fft, axis=1)) ** 2 / (window ** 2).sum()
    bands = power @ band_weights(config, sr)
    feats = np.column_stack([np.log(energy + config.log_floor), np.log(bands + config.log_floor)])
    return FrameSeries(feats, config.hop_cs)


def boundary_labels(annotation: SegmentAnnotation, n_frames: int, hop_cs: int = 1) -> np.ndarray:
    """0/1 per frame; 1 on the frame whose start is nearest each within-word onset."""
    labels = np.zeros(n_frames, dtype=np.int8)
    t = 0
    for w in annotation.words:
        pos = t
        for note in w.notes[:-1]:
            pos += note.duration_cs
            i = int(np.floor(pos / hop_cs + 0.5))
            if 0 <= i < n_frames:
                labels[i] = 1
        t += w.duration_cs
    return labels


def note_targets(annotation: SegmentAnnotation, n_frames: int, hop_cs: int = 1):
    """``(intervals, pitches)``: half-open frame span and pitch of each note.

    Notes are laid out inside their word, the last one ending at the word's
    end. Spans are clipped to ``n_frames``; notes left empty are dropped.
    """

    def frame(t):
        return min(int(np.floor(t / hop_cs + 0.5)), n_frames)

    bounds = []
    pitches = []
    t = 0
    for w in annotation.words:
        starts = [t]
        for note in w.notes[:-1]:
            starts.append(starts[-1] + note.duration_cs)
        ends = starts[1:] + [t + w.duration_cs]
        for note, a, b in zip(w.notes, starts, ends):
            a, b = frame(a), frame(b)
            if b > a:
                bounds.append((a, b))
                pitches.append(note.pitch_midi)
        t += w.duration_cs
    return np.array(bounds, dtype=np.int64).reshape(-1, 2), np.array(pitches, dtype=np.int64)


def pitch_onehot(pitches) -> np.ndarray:
    pitches = np.asarray(pitches, dtype=np.int64)
    out = np.zeros((pitches.size, N_PITCHES))
    out[np.arange(pitches.size), pitches] = 1.0
    return out
