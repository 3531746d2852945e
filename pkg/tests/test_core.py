import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from songtrans.core import (
    AudioSegment,
    InvariantError,
    Lexicon,
    NoteEvent,
    RecordError,
    SegmentAnnotation,
    SongTransError,
    WordAnnotation,
    cs_to_samples,
    diagnose_record,
    load_annotations,
    load_lexicon,
    notes_from_pairs,
    phones_of,
    read_wav,
    save_annotations,
    write_wav,
)

from gen import random_annotation


def simple(seg_id="s1", text="la"):
    return SegmentAnnotation(seg_id, (WordAnnotation(text, 50, notes_from_pairs([(60, 20), (62, 30)]), ("l", "a")),))


def test_load_single_record(tmp_path):
    path = tmp_path / "a.jsonl"
    save_annotations([simple()], path)
    loaded = load_annotations(path)
    assert len(loaded) == 1
    assert loaded[0] == simple()


def test_duration_sum_violation_names_invariant(tmp_path):
    record = simple().to_record()
    record["words"][0]["notes"][1]["duration_cs"] += 5
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(record) + "\n", encoding="utf-8")
    with pytest.raises(RecordError, match="duration-sum") as info:
        load_annotations(path)
    assert info.value.line == 1


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert load_annotations(path) == []


def test_blank_lines_skipped_and_line_numbers_kept(tmp_path):
    path = tmp_path / "a.jsonl"
    path.write_text("\n" + json.dumps(simple().to_record()) + "\n\n{not json\n", encoding="utf-8")
    with pytest.raises(RecordError) as info:
        load_annotations(path)
    assert info.value.line == 4


def test_unicode_round_trip(tmp_path):
    ann = SegmentAnnotation("中文", (WordAnnotation("我", 30, notes_from_pairs([(64, 30)])),
                                      WordAnnotation("爱", 40, notes_from_pairs([(65, 20), (67, 20)]))))
    path = tmp_path / "u.jsonl"
    save_annotations([ann], path)
    assert "我" in path.read_text(encoding="utf-8")
    assert load_annotations(path) == [ann]


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        save_annotations([simple()], tmp_path / "missing-dir" / "a.jsonl")


def test_save_does_not_leave_partial_file_on_bad_input(tmp_path):
    path = tmp_path / "a.jsonl"
    with pytest.raises(AttributeError):
        save_annotations([simple(), "not an annotation"], path)
    assert not path.exists()


@given(st.integers(0, 2**32 - 1))
def test_round_trip_property(tmp_path_factory, seed):
    rng = np.random.default_rng(seed)
    anns = [random_annotation(rng, segment_id=f"s{i}") for i in range(3)]
    path = tmp_path_factory.mktemp("rt") / "a.jsonl"
    save_annotations(anns, path)
    assert load_annotations(path) == anns


def test_duration_slack_of_one_cs():
    WordAnnotation("a", 51, notes_from_pairs([(60, 50)]))
    WordAnnotation("a", 49, notes_from_pairs([(60, 50)]))
    with pytest.raises(InvariantError) as info:
        WordAnnotation("a", 52, notes_from_pairs([(60, 50)]))
    assert info.value.invariant == "duration-sum"


@pytest.mark.parametrize("pitch", [-1, 128])
def test_pitch_range(pitch):
    with pytest.raises(InvariantError, match="pitch-range"):
        NoteEvent(pitch, 10)


def test_word_needs_notes_and_text():
    with pytest.raises(InvariantError, match="notes-nonempty"):
        WordAnnotation("a", 10, ())
    with pytest.raises(InvariantError, match="text-nonempty"):
        WordAnnotation("", 10, notes_from_pairs([(60, 10)]))


def test_segment_needs_words():
    with pytest.raises(InvariantError, match="words-nonempty"):
        SegmentAnnotation("s", ())


def test_segment_properties():
    a = simple()
    assert a.tokens == ["la"]
    assert a.duration_cs == 50
    assert [n.pitch_midi for n in a.notes] == [60, 62]


def test_diagnose_reports_every_violation():
    record = simple().to_record()
    record["words"].append({"text": "", "duration_cs": 10, "notes": [{"pitch_midi": 300, "duration_cs": 10}]})
    names = {(d.invariant, d.word_index) for d in diagnose_record(record)}
    assert names == {("text-nonempty", 1), ("pitch-range", 1)}


def test_diagnose_schema_problems():
    assert [d.invariant for d in diagnose_record([])] == ["schema"]
    assert diagnose_record({"segment_id": "x", "words": "nope"})[0].invariant == "schema"
    assert diagnose_record({"schema_version": 2, "segment_id": "x", "words": []})[0].invariant == "schema"


def test_phones_of():
    lex = Lexicon({"ni": ("n", "i")})
    assert phones_of("ni", lex) == ["n", "i"]
    assert phones_of("ab", lex) == ["a", "b"]
    assert phones_of("x", Lexicon()) == ["x"]
    assert phones_of("ab", lex, return_fallback=True) == (["a", "b"], True)
    assert phones_of("ni", lex, return_fallback=True) == (["n", "i"], False)
    with pytest.raises(SongTransError):
        phones_of("", lex)


def test_load_lexicon(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("ni\tn i\n\n爱\tai\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert lex.entries == {"ni": ("n", "i"), "爱": ("ai",)}
    path.write_text("broken line\n", encoding="utf-8")
    with pytest.raises(RecordError):
        load_lexicon(path)


def test_audio_validation():
    with pytest.raises(InvariantError):
        AudioSegment(np.array([]))
    with pytest.raises(InvariantError):
        AudioSegment(np.array([0.0, 1.5]))
    with pytest.raises(InvariantError):
        AudioSegment(np.array([0.0, np.nan]))
    with pytest.raises(InvariantError):
        AudioSegment(np.zeros(4), sample_rate_hz=0)
    a = AudioSegment(np.zeros(16000))
    assert a.duration_cs == 100.0
    assert not a.samples.flags.writeable


def test_wav_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    audio = AudioSegment(rng.uniform(-0.9, 0.9, 800), 8000, "x")
    write_wav(audio, tmp_path / "x.wav")
    back = read_wav(tmp_path / "x.wav")
    assert back.sample_rate_hz == 8000 and back.id == "x"
    assert np.max(np.abs(back.samples - audio.samples)) < 1e-4


def test_cs_to_samples():
    assert cs_to_samples(1, 16000) == 160
    assert cs_to_samples(2.5, 16000) == 400
