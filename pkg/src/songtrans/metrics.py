"""Error rates and duration errors used to score transcriptions."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

from .core import Lexicon, NoteEvent, SegmentAnnotation, SongTransError, phones_of


@dataclass(frozen=True)
class EditStats:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> Fraction:
        if self.ref_len == 0:
            raise SongTransError("error rate is undefined for an empty reference")
        return Fraction(self.errors, self.ref_len)


def edit_stats(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> EditStats:
    """Unit-cost Levenshtein alignment, with S/D/I counts from the traceback.

    Among minimal-cost alignments the traceback prefers substitutions, then
    deletions, then insertions.
    """
    ref, hyp = list(reference), list(hypothesis)
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            cost = 0 if r == hyp[j - 1] else 1
            row[j] = min(prev[j - 1] + cost, prev[j] + 1, row[j - 1] + 1)

    s = d = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            d += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditStats(s, d, ins, n)


def wer(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> Fraction:
    """(S + D + I) / len(reference), as an exact fraction."""
    if len(reference) == 0:
        raise SongTransError("wer needs a nonempty reference")
    return edit_stats(reference, hypothesis).rate


def _phone_sequence(words, lexicon: Lexicon) -> list[str]:
    if isinstance(words, SegmentAnnotation):
        words = words.tokens
    return [p for w in words for p in phones_of(w, lexicon)]


def phone_wer(reference, hypothesis, lexicon: Lexicon) -> Fraction:
    """WER over the concatenated phones of each word sequence.

    Either argument may be a token sequence or a SegmentAnnotation; phones
    always come from ``lexicon`` (with the per-character fallback).
    """
    ref = _phone_sequence(reference, lexicon)
    if not ref:
        raise SongTransError("phone_wer needs a nonempty reference")
    return wer(ref, _phone_sequence(hypothesis, lexicon))


def padded_mae(predicted: Sequence[int], truth: Sequence[int]) -> Fraction:
    """Mean absolute error after zero-padding the shorter sequence at the end."""
    length = max(len(predicted), len(truth))
    if length == 0:
        raise SongTransError("padded_mae needs at least one nonempty sequence")
    return Fraction(padded_abs_error(predicted, truth), length)


def padded_abs_error(predicted: Sequence[int], truth: Sequence[int]) -> int:
    length = max(len(predicted), len(truth))
    p = list(predicted) + [0] * (length - len(predicted))
    t = list(truth) + [0] * (length - len(truth))
    return sum(abs(a - b) for a, b in zip(p, t))


def note_pitch_wer(predicted: Sequence[NoteEvent], truth: Sequence[NoteEvent]) -> Fraction:
    if not truth:
        raise SongTransError("note_pitch_wer needs a nonempty truth sequence")
    return wer([n.pitch_midi for n in truth], [n.pitch_midi for n in predicted])


def boundary_f1(predicted: Sequence[int], truth: Sequence[int], tolerance_cs: int = 3) -> tuple[float, float, float]:
    """Precision, recall and F1 of onset times under one-to-one matching.

    Predictions are visited earliest first; each takes the earliest unmatched
    truth onset within ``tolerance_cs``. With no predictions precision is 0,
    except that two empty sets score (1, 1, 1).
    """
    if tolerance_cs < 0:
        raise SongTransError("tolerance_cs must be >= 0")
    return _prf(match_onsets(predicted, truth, tolerance_cs), len(predicted), len(truth))


def match_onsets(predicted: Sequence[int], truth: Sequence[int], tolerance_cs: int) -> int:
    """Number of greedy earliest-first matches within the tolerance."""
    ref = sorted(truth)
    used = [False] * len(ref)
    hits = 0
    for p in sorted(predicted):
        for k, t in enumerate(ref):
            if not used[k] and abs(p - t) <= tolerance_cs:
                used[k] = True
                hits += 1
                break
    return hits


def _prf(hits: int, n_pred: int, n_ref: int) -> tuple[float, float, float]:
    if n_pred == 0 and n_ref == 0:
        return 1.0, 1.0, 1.0
    precision = hits / n_pred if n_pred else 0.0
    recall = hits / n_ref if n_ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def internal_onsets(annotation: SegmentAnnotation) -> list[int]:
    """Absolute times (cs) of note onsets after the first note of each word."""
    out = []
    t = 0
    for w in annotation.words:
        pos = t
        for n in w.notes[:-1]:
            pos += n.duration_cs
            out.append(pos)
        t += w.duration_cs
    return out


def evaluate(predicted: Sequence[SegmentAnnotation], truth: Sequence[SegmentAnnotation],
             lexicon: Lexicon | None = None, tolerance_cs: int = 3) -> dict[str, float]:
    """Corpus report keyed by metric name; segments are paired by id.

    Rates and MAEs are pooled over the corpus (total error / total length)
    rather than averaged per segment.
    """
    lexicon = lexicon if lexicon is not None else Lexicon()
    by_id = {a.segment_id: a for a in predicted}
    missing = [t.segment_id for t in truth if t.segment_id not in by_id]
    if missing:
        raise SongTransError(f"no prediction for segments: {', '.join(missing[:5])}")
    if not truth:
        raise SongTransError("evaluation needs at least one truth segment")

    word_err = word_len = phone_err = phone_len = 0
    dur_err = dur_len = num_err = num_len = 0
    pitch_err = pitch_len = note_dur_err = note_dur_len = 0
    pitch_hits = pitch_pairs = 0
    tp = n_pred = n_ref = 0
    for ref in truth:
        hyp = by_id[ref.segment_id]
        st = edit_stats(ref.tokens, hyp.tokens)
        word_err, word_len = word_err + st.errors, word_len + st.ref_len
        st = edit_stats(_phone_sequence(ref, lexicon), _phone_sequence(hyp, lexicon))
        phone_err, phone_len = phone_err + st.errors, phone_len + st.ref_len

        ref_durs, hyp_durs = [w.duration_cs for w in ref.words], [w.duration_cs for w in hyp.words]
        dur_err += padded_abs_error(hyp_durs, ref_durs)
        dur_len += max(len(ref_durs), len(hyp_durs))
        ref_k, hyp_k = [w.note_count for w in ref.words], [w.note_count for w in hyp.words]
        num_err += padded_abs_error(hyp_k, ref_k)
        num_len += max(len(ref_k), len(hyp_k))

        ref_notes, hyp_notes = ref.notes, hyp.notes
        st = edit_stats([n.pitch_midi for n in ref_notes], [n.pitch_midi for n in hyp_notes])
        pitch_err, pitch_len = pitch_err + st.errors, pitch_len + st.ref_len
        ref_nd, hyp_nd = [n.duration_cs for n in ref_notes], [n.duration_cs for n in hyp_notes]
        note_dur_err += padded_abs_error(hyp_nd, ref_nd)
        note_dur_len += max(len(ref_nd), len(hyp_nd))
        pitch_hits += sum(a.pitch_midi == b.pitch_midi for a, b in zip(ref_notes, hyp_notes))
        pitch_pairs += max(len(ref_notes), len(hyp_notes))

        p_on, t_on = internal_onsets(hyp), internal_onsets(ref)
        tp += match_onsets(p_on, t_on, tolerance_cs)
        n_pred, n_ref = n_pred + len(p_on), n_ref + len(t_on)

    precision, recall, f1 = _prf(tp, n_pred, n_ref)
    return {
        "lyric_wer": word_err / word_len,
        "phone_wer": phone_err / phone_len if phone_len else 0.0,
        "word_dur_mae_cs": dur_err / dur_len,
        "note_num_mae": num_err / num_len,
        "pitch_wer": pitch_err / pitch_len,
        "note_dur_mae_cs": note_dur_err / note_dur_len,
        "note_pitch_acc": pitch_hits / pitch_pairs,
        "boundary_precision": precision,
        "boundary_recall": recall,
        "boundary_f1": f1,
    }
