import numpy as np
import pytest

from songtrans.core import AudioSegment, SegmentAnnotation, SongTransError, WordAnnotation, notes_from_pairs
from songtrans.namodel.features import (
    AnalyzerConfig,
    FrameSeries,
    band_centers_midi,
    band_weights,
    boundary_labels,
    frame_features,
    note_targets,
    pitch_onehot,
)

SR = 16000


def test_zero_audio_sits_at_floor():
    config = AnalyzerConfig()
    f = frame_features(AudioSegment(np.zeros(SR)), config)
    assert np.all(f.features == f.features[0])
    assert f.features[0, 0] == pytest.approx(np.log(config.log_floor))


def test_one_second_is_one_hundred_frames():
    f = frame_features(AudioSegment(np.zeros(SR)))
    assert (f.n, f.dim, f.hop_cs) == (100, 17, 1)
    coarse = AnalyzerConfig(window_cs=10, hop_cs=10, n_fft=2048)
    assert frame_features(AudioSegment(np.zeros(10 * SR)), coarse).n == 100


def _direct_band_energies(frame, config, sr):
    """Band energies from an explicit DFT sum, independent of the FFT path."""
    k = np.arange(config.n_fft // 2 + 1)
    t = np.arange(frame.size)
    spectrum = np.exp(-2j * np.pi * np.outer(k, t) / config.n_fft) @ frame
    return (np.abs(spectrum) ** 2) @ band_weights(config, sr)


def test_440_peaks_in_its_band():
    config = AnalyzerConfig()
    t = np.arange(SR // 2) / SR
    f = frame_features(AudioSegment(0.5 * np.sin(2 * np.pi * 440 * t)), config)
    nearest = int(np.argmin(np.abs(band_centers_midi(config) - 69)))
    assert np.all(np.argmax(f.features[5:-5, 1:], axis=1) == nearest)

    # frame 20 by hand: window centred on samples [3200, 3360)
    win, hop = 400, 160
    start = 20 * hop - (win - hop) // 2
    window = np.hanning(win + 2)[1:-1]
    seg = 0.5 * np.sin(2 * np.pi * 440 * np.arange(start, start + win) / SR) * window
    direct = _direct_band_energies(seg, config, SR) / (window ** 2).sum()
    np.testing.assert_allclose(np.exp(f.features[20, 1:]) - config.log_floor, direct, rtol=1e-6, atol=1e-9)
    assert int(np.argmax(direct)) == nearest


def test_louder_is_higher_energy():
    t = np.arange(SR // 4) / SR
    quiet = frame_features(AudioSegment(0.1 * np.sin(2 * np.pi * 300 * t)))
    loud = frame_features(AudioSegment(0.5 * np.sin(2 * np.pi * 300 * t)))
    assert np.all(loud.features[5:-5, 0] > quiet.features[5:-5, 0])


def test_too_short_audio():
    with pytest.raises(SongTransError):
        frame_features(AudioSegment(np.zeros(100)))


def test_config_validation():
    with pytest.raises(SongTransError):
        AnalyzerConfig(window_cs=0.5)
    with pytest.raises(SongTransError):
        AnalyzerConfig(fmin_midi=90, fmax_midi=80)


def test_frame_series_validation():
    with pytest.raises(SongTransError):
        FrameSeries(np.zeros((0, 3)))
    with pytest.raises(SongTransError):
        FrameSeries(np.array([[np.inf]]))
    with pytest.raises(SongTransError):
        FrameSeries(np.zeros((2, 2)), hop_cs=0)


def annotation():
    return SegmentAnnotation("s", (
        WordAnnotation("a", 30, notes_from_pairs([(60, 10), (62, 20)])),
        WordAnnotation("b", 21, notes_from_pairs([(64, 10), (65, 10)])),
    ))


def test_boundary_labels():
    labels = boundary_labels(annotation(), 51)
    assert labels.sum() == 2
    assert np.flatnonzero(labels).tolist() == [10, 40]


def test_note_targets_follow_word_layout():
    intervals, pitches = note_targets(annotation(), 51)
    assert intervals.tolist() == [[0, 10], [10, 30], [30, 40], [40, 51]]
    assert pitches.tolist() == [60, 62, 64, 65]


def test_note_targets_clip_to_frames():
    intervals, pitches = note_targets(annotation(), 35)
    assert intervals.tolist() == [[0, 10], [10, 30], [30, 35]]
    assert pitches.tolist() == [60, 62, 64]


def test_pitch_onehot():
    oh = pitch_onehot([0, 127])
    assert oh.shape == (2, 128) and oh.sum(axis=1).tolist() == [1, 1]
    assert oh[0, 0] == oh[1, 127] == 1
