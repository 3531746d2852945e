"""scikit-learn style wrappers around the feature front-end and note model."""

from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.preprocessing import StandardScaler
from sklearn.utils.validation import check_is_fitted

from ..core import SongTransError
from ..validation import check_audio, check_frames, check_targets
from .features import N_PITCHES, AnalyzerConfig, FrameSeries, frame_features
from .network import NaModelParams, boundary_posteriors, encoder_forward
from .train import TrainConfig, train

MODEL_FORMAT = "songtrans-namodel"
MODEL_VERSION = 1


class FrameFeaturizer(TransformerMixin, BaseEstimator):
    """Audio segments -> FrameSeries. Stateless; ``fit`` only records settings."""

    def __init__(self, window_cs=2.5, hop_cs=1, n_bands=16, fmin_midi=36.0, fmax_midi=96.0,
                 n_fft=1024, log_floor=1e-10):
        self.window_cs = window_cs
        self.hop_cs = hop_cs
        self.n_bands = n_bands
        self.fmin_midi = fmin_midi
        self.fmax_midi = fmax_midi
        self.n_fft = n_fft
        self.log_floor = log_floor

    @classmethod
    def from_config(cls, config: AnalyzerConfig) -> "FrameFeaturizer":
        return cls(**asdict(config))

    @property
    def config(self) -> AnalyzerConfig:
        return AnalyzerConfig(**{f.name: getattr(self, f.name) for f in fields(AnalyzerConfig)})

    def fit(self, X=None, y=None):
        self.config_ = self.config
        return self

    def transform(self, X) -> list[FrameSeries]:
        config = self.config
        return [frame_features(a, config) for a in check_audio(X)]


class NoteTranscriber(BaseEstimator):
    """Boundary and pitch model over frame features.

    ``fit`` takes a list of FrameSeries and, per segment, a
    ``(boundary_labels, note_intervals, note_pitches)`` tuple. Features are
    standardized with statistics from the training frames before entering
    the encoder.
    """

    def __init__(self, lr=2.0, steps=2000, lam=1.0, seed=0, context=2, hidden=32, d_enc=32, batch_size=30):
        self.lr = lr
        self.steps = steps
        self.lam = lam
        self.seed = seed
        self.context = context
        self.hidden = hidden
        self.d_enc = d_enc
        self.batch_size = batch_size

    @classmethod
    def from_config(cls, config: TrainConfig) -> "NoteTranscriber":
        return cls(**asdict(config))

    @property
    def train_config(self) -> TrainConfig:
        return TrainConfig(**{f.name: getattr(self, f.name) for f in fields(TrainConfig)})

    def fit(self, X, y):
        frames = check_frames(X)
        targets = check_targets(y, frames)
        self.n_features_in_ = frames[0].dim
        self.hop_cs_ = frames[0].hop_cs
        self.scaler_ = StandardScaler().fit(np.vstack([f.features for f in frames]))
        dataset = [(self._scale(f), *t) for f, t in zip(frames, targets)]
        self.params_, self.loss_curve_ = train(dataset, self.train_config, d_in=self.n_features_in_)
        return self

    def _scale(self, frames: FrameSeries) -> np.ndarray:
        return self.scaler_.transform(frames.features)

    def scaled(self, X) -> list[FrameSeries]:
        """Frames mapped into the model's input space."""
        check_is_fitted(self, "params_")
        return [FrameSeries(self._scale(f), f.hop_cs) for f in check_frames(X, self.n_features_in_)]

    def transform(self, X) -> list[FrameSeries]:
        """Encoded frames, one FrameSeries per segment."""
        return [encoder_forward(f, self.params_) for f in self.scaled(X)]

    def predict_boundary_proba(self, X) -> list[np.ndarray]:
        return [boundary_posteriors(v, self.params_) for v in self.transform(X)]

    def predict(self, X, records, segment_ids=None, lexicon=None) -> list:
        """Annotations from frames plus one ``(wd, nn)`` record pair per segment."""
        from ..assembler import assemble

        frames = self.scaled(X)
        records = list(records)
        if len(records) != len(frames):
            raise SongTransError(f"{len(records)} record pairs for {len(frames)} segments")
        ids = segment_ids if segment_ids is not None else [""] * len(frames)
        return [assemble(wd, nn, f, self.params_, segment_id=sid, lexicon=lexicon)
                for f, (wd, nn), sid in zip(frames, records, ids)]

    def save(self, path, analyzer: AnalyzerConfig | None = None) -> None:
        check_is_fitted(self, "params_")
        save_model(path, self.params_, self.scaler_.mean_, self.scaler_.scale_, self.hop_cs_,
                   analyzer, self.train_config)

    @classmethod
    def load(cls, path) -> tuple["NoteTranscriber", AnalyzerConfig]:
        bundle = load_model(path)
        est = cls.from_config(bundle["train"]) if bundle["train"] is not None else cls()
        params = bundle["params"]
        est.params_ = params
        est.n_features_in_ = params.d_in
        est.hop_cs_ = bundle["hop_cs"]
        scaler = StandardScaler()
        scaler.mean_ = bundle["feature_mean"]
        scaler.scale_ = bundle["feature_scale"]
        scaler.var_ = scaler.scale_ ** 2
        scaler.n_features_in_ = params.d_in
        est.scaler_ = scaler
        est.loss_curve_ = []
        return est, bundle["analyzer"]


def save_model(path, params: NaModelParams, feature_mean, feature_scale, hop_cs: int = 1,
               analyzer: AnalyzerConfig | None = None, train_config: TrainConfig | None = None) -> None:
    """Write the model container (a NumPy ``.npz`` archive of row-major arrays)."""
    meta = {
        "analyzer": asdict(analyzer or AnalyzerConfig()),
        "train": asdict(train_config) if train_config is not None else None,
    }
    dims = np.array([params.d_in, params.context, params.hidden, params.d_enc, N_PITCHES], dtype=np.int64)
    with Path(path).open("wb") as fh:
        np.savez(
            fh,
            format=np.array(MODEL_FORMAT),
            version=np.int64(MODEL_VERSION),
            dims=dims,
            hop_cs=np.int64(hop_cs),
            feature_mean=np.asarray(feature_mean, dtype=np.float64),
            feature_scale=np.asarray(feature_scale, dtype=np.float64),
            meta=np.array(json.dumps(meta, sort_keys=True)),
            **{k: np.asarray(v, order="C") for k, v in params.arrays().items()},
        )


def load_model(path) -> dict:
    try:
        z = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise SongTransError(f"cannot read model file {path}: {exc}") from None
    with z:
        if "format" not in z or str(z["format"]) != MODEL_FORMAT:
            raise SongTransError(f"{path} is not a {MODEL_FORMAT} file")
        if int(z["version"]) != MODEL_VERSION:
            raise SongTransError(f"{path}: unsupported model version {int(z['version'])}")
        d_in, context, hidden, d_enc, n_pitch = (int(v) for v in z["dims"])
        if n_pitch != N_PITCHES:
            raise SongTransError(f"{path}: model has {n_pitch} pitch classes, expected {N_PITCHES}")
        params = NaModelParams(context, **{k: z[k] for k in NaModelParams.ARRAYS})
        if (params.d_in, params.hidden, params.d_enc) != (d_in, hidden, d_enc):
            raise SongTransError(f"{path}: weight shapes disagree with the dims header")
        meta = json.loads(str(z["meta"]))
        return {
            "params": params,
            "feature_mean": z["feature_mean"].copy(),
            "feature_scale": z["feature_scale"].copy(),
            "hop_cs": int(z["hop_cs"]),
            "analyzer": AnalyzerConfig(**meta["analyzer"]),
            "train": TrainConfig(**meta["train"]) if meta.get("train") else None,
        }
