"""Train / infer / evaluate over a synthetic corpus directory."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

from .core import SegmentAnnotation, read_wav
from .metrics import evaluate
from .namodel.estimator import FrameFeaturizer, NoteTranscriber
from .namodel.features import AnalyzerConfig
from .namodel.train import TrainConfig
from .seqfmt import ar_oracle
from .synth import CorpusSegment, corpus_analyzer, load_corpus, split_corpus, synth_lexicon

logger = logging.getLogger(__name__)


def fit_corpus(segments: list[CorpusSegment], config: TrainConfig) -> NoteTranscriber:
    frames, targets = [], []
    for seg in segments:
        f, labels, intervals, pitches = seg.load_tensors()
        frames.append(f)
        targets.append((labels, intervals, pitches))
    logger.info("training on %d segments (%d frames)", len(frames), sum(f.n for f in frames))
    return NoteTranscriber.from_config(config).fit(frames, targets)


def infer_segments(model: NoteTranscriber, segments: list[CorpusSegment], analyzer: AnalyzerConfig,
                   jobs: int = 1, lexicon=None) -> list[SegmentAnnotation]:
    """Annotate segments from their audio, using ground-truth sequence records."""
    featurizer = FrameFeaturizer.from_config(analyzer)

    def one(seg: CorpusSegment) -> SegmentAnnotation:
        frames = featurizer.transform([read_wav(seg.audio_path)])
        pred = model.predict(frames, [ar_oracle(seg.annotation)], [seg.segment_id], lexicon)[0]
        return SegmentAnnotation(pred.segment_id, pred.words, seg.annotation.audio_ref)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(one, segments))
    return [one(s) for s in segments]


def run_corpus(corpus_dir, config: TrainConfig, held_out_fraction: float = 0.1, tolerance_cs: int = 3,
               analyzer: AnalyzerConfig | None = None):
    """Full loop: split, train, annotate held-out segments, score.

    Returns ``(model, predictions, truth, report)``.
    """
    analyzer = analyzer or corpus_analyzer(corpus_dir)
    train_segs, test_segs = split_corpus(load_corpus(corpus_dir), held_out_fraction)
    model = fit_corpus(train_segs, config)
    lexicon = synth_lexicon()
    preds = infer_segments(model, test_segs, analyzer, lexicon=lexicon)
    truth = [s.annotation for s in test_segs]
    report = evaluate(preds, truth, lexicon, tolerance_cs)
    return model, preds, truth, report

