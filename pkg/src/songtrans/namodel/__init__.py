"""Frame-level note model: boundary detection and pitch classification."""

from .decode import BoundaryClampWarning, decode_notes, select_boundaries
from .features import AnalyzerConfig, FrameSeries, boundary_labels, frame_features, note_targets, pitch_onehot
from .network import (
    NaModelParams,
    boundary_loss,
    boundary_posteriors,
    encoder_forward,
    gradient_check,
    init_params,
    pitch_loss,
    pitch_posterior,
    pool_note_feature,
)
from .train import TrainConfig, TrainingDiverged, load_train_config, train
from .estimator import FrameFeaturizer, NoteTranscriber, load_model, save_model
