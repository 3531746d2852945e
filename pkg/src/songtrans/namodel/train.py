"""Plain gradient descent on the joint boundary + pitch objective."""

from __future__ import annotations

import configparser
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from ..core import SongTransError
from .network import NaModelParams, init_params, loss_and_grad, make_batch

logger = logging.getLogger(__name__)


class TrainingDiverged(SongTransError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"loss became {loss} at step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 2.0
    steps: int = 2000
    seed: int = 0
    lam: float = 1.0
    context: int = 2
    hidden: int = 32
    d_enc: int = 32
    #: segments per minibatch; 0 means full batch
    batch_size: int = 30

    def __post_init__(self):
        if not self.lr >= 0:
            raise SongTransError("lr must be non-negative")
        if self.steps < 0 or self.batch_size < 0:
            raise SongTransError("steps and batch_size must be non-negative")
        if self.lam < 0:
            raise SongTransError("lam must be non-negative")


_INI_KEYS = {"lambda": "lam"}


def load_train_config(path, **overrides) -> TrainConfig:
    """Read the ``[train]`` section of an INI file; ``overrides`` win over the file."""
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise SongTransError(f"cannot read training config {path}")
    if not parser.has_section("train"):
        raise SongTransError(f"{path}: missing [train] section")
    types = {f.name: f.type for f in fields(TrainConfig)}
    values = {}
    for key, raw in parser["train"].items():
        name = _INI_KEYS.get(key, key)
        if name not in types:
            raise SongTransError(f"{path}: unknown training key {key!r}")
        values[name] = float(raw) if types[name] in (float, "float") else int(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**values)


def write_train_config(config: TrainConfig, path) -> None:
    parser = configparser.ConfigParser()
    inv = {v: k for k, v in _INI_KEYS.items()}
    parser["train"] = {inv.get(k, k): str(v) for k, v in asdict(config).items()}
    with Path(path).open("w", encoding="utf-8") as fh:
        parser.write(fh)


def train(dataset, hyper: TrainConfig, d_in: int | None = None, init: NaModelParams | None = None):
    """Fit note-model weights; returns ``(params, per_step_losses)``.

    ``dataset`` is a sequence of ``(frames, boundary_labels, intervals,
    pitches)`` already in model input space. Segments are shuffled once
    with ``hyper.seed`` and cut into fixed minibatches that are visited in
    turn, so the run is fully determined by its inputs.
    """
    dataset = list(dataset)
    if not dataset:
        raise SongTransError("training set is empty")
    if d_in is None:
        d_in = np.asarray(getattr(dataset[0][0], "features", dataset[0][0])).shape[1]
    params = init if init is not None else init_params(d_in, hyper.context, hyper.hidden, hyper.d_enc, hyper.seed)
    params = params.copy()
    if hyper.steps == 0:
        return params, []

    order = np.random.default_rng(hyper.seed).permutation(len(dataset))
    size = hyper.batch_size or len(dataset)
    batches = [make_batch([dataset[i] for i in order[j : j + size]], params.context)
               for j in range(0, len(dataset), size)]

    losses = []
    for step in range(hyper.steps):
        # overflow shows up as a non-finite loss, reported below
        with np.errstate(over="ignore", invalid="ignore"):
            loss, parts, grads = loss_and_grad(params, batches[step % len(batches)], hyper.lam)
        if not np.isfinite(loss):
            raise TrainingDiverged(step, loss)
        losses.append(loss)
        for name in NaModelParams.ARRAYS:
            setattr(params, name, getattr(params, name) - hyper.lr * grads[name])
        if step % 250 == 0 or step == hyper.steps - 1:
            logger.info("step %d loss %.5f (boundary %.5f, pitch %.5f)",
                        step, loss, parts["boundary"], parts["pitch"])
    try:
        params.check()
    except SongTransError:
        raise TrainingDiverged(hyper.steps, float("nan")) from None
    return params, losses
