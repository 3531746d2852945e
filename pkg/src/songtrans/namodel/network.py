"""Frame encoder, boundary/pitch heads, BCE losses and their gradients.

The encoder is a context-window MLP: each frame is concatenated with its
``context`` neighbours on either side (zeros past the edges), passed
through one tanh hidden layer and a linear output layer. Two sigmoid heads
sit on top. The boundary head scores every encoded frame; the pitch head
scores the mean encoded frame of a note against all 128 MIDI pitches
independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import SongTransError
from .features import N_PITCHES, FrameSeries

EPS = 1e-7


@dataclass(eq=False)
class NaModelParams:
    context: int
    enc_w1: np.ndarray  # ((2c+1)*d_in, hidden)
    enc_b1: np.ndarray  # (hidden,)
    enc_w2: np.ndarray  # (hidden, d_enc)
    enc_b2: np.ndarray  # (d_enc,)
    boundary_w: np.ndarray  # (d_enc,)
    boundary_b: np.ndarray  # () scalar
    pitch_w: np.ndarray  # (d_enc, 128)
    pitch_b: np.ndarray  # (128,)

    ARRAYS = ("enc_w1", "enc_b1", "enc_w2", "enc_b2", "boundary_w", "boundary_b", "pitch_w", "pitch_b")

    def __post_init__(self):
        for name in self.ARRAYS:
            setattr(self, name, np.array(getattr(self, name), dtype=np.float64))
        self.context = int(self.context)
        self.check()

    @property
    def d_in(self) -> int:
        return self.enc_w1.shape[0] // (2 * self.context + 1)

    @property
    def hidden(self) -> int:
        return self.enc_w1.shape[1]

    @property
    def d_enc(self) -> int:
        return self.enc_w2.shape[1]

    def check(self) -> None:
        if self.context < 0:
            raise SongTransError("context must be >= 0")
        w1, w2 = self.enc_w1, self.enc_w2
        if w1.ndim != 2 or w1.shape[0] % (2 * self.context + 1):
            raise SongTransError(f"enc_w1 rows {w1.shape} not a multiple of {2 * self.context + 1}")
        h, d = w1.shape[1], w2.shape[1] if w2.ndim == 2 else -1
        expected = {
            "enc_b1": (h,), "enc_w2": (h, d), "enc_b2": (d,), "boundary_w": (d,),
            "boundary_b": (), "pitch_w": (d, N_PITCHES), "pitch_b": (N_PITCHES,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise SongTransError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in self.ARRAYS:
            if not np.all(np.isfinite(getattr(self, name))):
                raise SongTransError(f"{name} contains non-finite weights")

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.ARRAYS}

    def copy(self) -> "NaModelParams":
        return NaModelParams(self.context, **{k: v.copy() for k, v in self.arrays().items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, k).ravel() for k in self.ARRAYS])

    def with_flat(self, vec: np.ndarray) -> "NaModelParams":
        out, pos = {}, 0
        for k in self.ARRAYS:
            a = getattr(self, k)
            out[k] = np.asarray(vec[pos : pos + a.size]).reshape(a.shape)
            pos += a.size
        return NaModelParams(self.context, **out)


BOUNDARY_PRIOR = 0.05
PITCH_PRIOR = 1.0 / N_PITCHES


def init_params(d_in: int, context: int = 2, hidden: int = 32, d_enc: int = 32, seed: int = 0) -> NaModelParams:
    """Seeded initialization.

    Weights are Gaussian with variance 1/fan_in. Encoder biases start at
    zero; head biases start at the logit of the label base rate, so the
    first steps are not spent pushing every negative class down.
    """
    rng = np.random.default_rng(seed)
    fan1 = (2 * context + 1) * d_in
    return NaModelParams(
        context=context,
        enc_w1=rng.standard_normal((fan1, hidden)) / np.sqrt(fan1),
        enc_b1=np.zeros(hidden),
        enc_w2=rng.standard_normal((hidden, d_enc)) / np.sqrt(hidden),
        enc_b2=np.zeros(d_enc),
        boundary_w=rng.standard_normal(d_enc) / np.sqrt(d_enc),
        boundary_b=np.asarray(_logit(BOUNDARY_PRIOR)),
        pitch_w=rng.standard_normal((d_enc, N_PITCHES)) / np.sqrt(d_enc),
        pitch_b=np.full(N_PITCHES, _logit(PITCH_PRIOR)),
    )


def _logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def context_stack(x: np.ndarray, context: int) -> np.ndarray:
    """Row i becomes ``[x[i-c], ..., x[i+c]]`` with zero rows past either edge."""
    n, d = x.shape
    if context == 0:
        return x
    padded = np.vstack([np.zeros((context, d)), x, np.zeros((context, d))])
    return np.hstack([padded[k : k + n] for k in range(2 * context + 1)])


def _as_matrix(frames) -> np.ndarray:
    return frames.features if isinstance(frames, FrameSeries) else np.asarray(frames, dtype=np.float64)


def _encode(x: np.ndarray, params: NaModelParams):
    if x.ndim != 2 or x.shape[1] != params.d_in:
        raise SongTransError(f"frames have dimension {x.shape[-1]}, model expects {params.d_in}")
    xc = context_stack(x, params.context)
    h = np.tanh(xc @ params.enc_w1 + params.enc_b1)
    v = h @ params.enc_w2 + params.enc_b2
    return xc, h, v


def encoder_forward(frames, params: NaModelParams) -> FrameSeries:
    hop = frames.hop_cs if isinstance(frames, FrameSeries) else 1
    return FrameSeries(_encode(_as_matrix(frames), params)[2], hop)


def boundary_posteriors(encoded, params: NaModelParams) -> np.ndarray:
    return sigmoid(_as_matrix(encoded) @ params.boundary_w + params.boundary_b)


def bce(p, y) -> float:
    """Mean binary cross-entropy with probabilities clamped to [EPS, 1 - EPS]."""
    p = np.clip(np.asarray(p, dtype=np.float64), EPS, 1.0 - EPS)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise SongTransError(f"posterior shape {p.shape} does not match label shape {y.shape}")
    if p.size == 0:
        raise SongTransError("BCE of an empty sequence is undefined")
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def boundary_loss(posteriors, labels) -> float:
    return bce(posteriors, labels)


def pool_note_feature(encoded, interval) -> np.ndarray:
    v = _as_matrix(encoded)
    start, end = int(interval[0]), int(interval[1])
    if not 0 <= start < end <= v.shape[0]:
        raise SongTransError(f"note interval [{start}, {end}) is empty or outside {v.shape[0]} frames")
    return v[start:end].mean(axis=0)


def pitch_posterior(note_feature, params: NaModelParams) -> np.ndarray:
    """Independent sigmoid per MIDI pitch (not normalized across pitches)."""
    return sigmoid(np.asarray(note_feature) @ params.pitch_w + params.pitch_b)


def pitch_loss(posterior, target) -> float:
    posterior, target = np.asarray(posterior), np.asarray(target)
    if posterior.shape[-1] != N_PITCHES or target.shape != posterior.shape:
        raise SongTransError(f"pitch posterior and target must both have {N_PITCHES} entries per note")
    return bce(posterior, target)


@dataclass(eq=False)
class Batch:
    """Training data flattened across segments.

    ``stacked`` holds frames already context-stacked per segment, so the
    encoder can run on the whole batch without leaking context across
    segments. ``note_frames`` lists the frames of note 0, then note 1, and
    so on; ``note_starts`` indexes where each note begins in that list.
    """

    stacked: np.ndarray
    boundary_labels: np.ndarray
    note_frames: np.ndarray
    note_starts: np.ndarray
    note_lengths: np.ndarray
    pitch_targets: np.ndarray
    disjoint: bool = True

    @property
    def n_frames(self) -> int:
        return self.stacked.shape[0]

    @property
    def n_notes(self) -> int:
        return self.pitch_targets.shape[0]


def make_batch(samples, context: int) -> Batch:
    """``samples``: iterable of ``(frames, boundary_labels, intervals, pitches)``.

    ``pitches`` may be integer MIDI numbers or a ready ``(notes, 128)`` target
    matrix.
    """
    stacked, labels, note_frames, lengths, targets = [], [], [], [], []
    offset = 0
    for frames, b, intervals, pitches in samples:
        x = _as_matrix(frames)
        b = np.asarray(b, dtype=np.float64).reshape(-1)
        if b.shape[0] != x.shape[0]:
            raise SongTransError(f"{b.shape[0]} boundary labels for {x.shape[0]} frames")
        intervals = np.asarray(intervals, dtype=np.int64).reshape(-1, 2)
        pitches = np.asarray(pitches)
        if pitches.ndim == 1:
            onehot = np.zeros((pitches.size, N_PITCHES))
            onehot[np.arange(pitches.size), pitches.astype(np.int64)] = 1.0
        else:
            onehot = pitches.astype(np.float64)
        if onehot.shape != (intervals.shape[0], N_PITCHES):
            raise SongTransError("need one pitch target per note interval")
        for a, e in intervals:
            if not 0 <= a < e <= x.shape[0]:
                raise SongTransError(f"note interval [{a}, {e}) outside {x.shape[0]} frames")
            note_frames.append(np.arange(a, e) + offset)
            lengths.append(e - a)
        stacked.append(context_stack(x, context))
        labels.append(b)
        targets.append(onehot)
        offset += x.shape[0]
    if not stacked:
        raise SongTransError("training data is empty")

    def cat(parts, dtype, width=None):
        if parts:
            return np.concatenate(parts).astype(dtype)
        return np.zeros((0,) if width is None else (0, width), dtype=dtype)

    frames_all = cat(note_frames, np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    return Batch(
        stacked=np.vstack(stacked),
        boundary_labels=cat(labels, np.float64),
        note_frames=frames_all,
        note_starts=np.concatenate([[0], np.cumsum(lengths)[:-1]]).astype(np.int64),
        note_lengths=lengths.astype(np.float64),
        pitch_targets=cat(targets, np.float64, N_PITCHES),
        disjoint=np.unique(frames_all).size == frames_all.size,
    )


def loss_and_grad(params: NaModelParams, batch: Batch, lam: float = 1.0, need_grad: bool = True):
    """Joint objective ``boundary_loss + lam * pitch_loss`` and its gradient.

    Returns ``(loss, parts, grads)`` where ``parts`` holds the two losses and
    ``grads`` maps array names to gradients (``None`` when not requested).
    Gradients are zero wherever a probability was clamped.
    """
    xc = batch.stacked
    if xc.shape[1] != params.enc_w1.shape[0]:
        raise SongTransError("batch was stacked for a different context or feature size")
    h = np.tanh(xc @ params.enc_w1 + params.enc_b1)
    v = h @ params.enc_w2 + params.enc_b2

    pb = sigmoid(v @ params.boundary_w + params.boundary_b)
    loss_b = bce(pb, batch.boundary_labels)

    has_notes = batch.n_notes > 0
    if has_notes:
        vm = np.add.reduceat(v[batch.note_frames], batch.note_starts, axis=0) / batch.note_lengths[:, None]
        pn = sigmoid(vm @ params.pitch_w + params.pitch_b)
        loss_n = bce(pn, batch.pitch_targets)
    else:
        loss_n = 0.0
    loss = loss_b + lam * loss_n
    parts = {"boundary": loss_b, "pitch": loss_n}
    if not need_grad:
        return loss, parts, None

    g = {}
    dzb = (pb - batch.boundary_labels) * ((pb > EPS) & (pb < 1 - EPS)) / pb.size
    g["boundary_w"] = v.T @ dzb
    g["boundary_b"] = np.asarray(dzb.sum())
    dv = np.outer(dzb, params.boundary_w)

    if has_notes:
        dzn = lam * (pn - batch.pitch_targets) * ((pn > EPS) & (pn < 1 - EPS)) / pn.size
        g["pitch_w"] = vm.T @ dzn
        g["pitch_b"] = dzn.sum(axis=0)
        dvm = (dzn @ params.pitch_w.T) / batch.note_lengths[:, None]
        per_frame = np.repeat(dvm, batch.note_lengths.astype(np.int64), axis=0)
        if batch.disjoint:
            dv[batch.note_frames] += per_frame
        else:
            np.add.at(dv, batch.note_frames, per_frame)
    else:
        g["pitch_w"] = np.zeros_like(params.pitch_w)
        g["pitch_b"] = np.zeros_like(params.pitch_b)

    g["enc_w2"] = h.T @ dv
    g["enc_b2"] = dv.sum(axis=0)
    da = (dv @ params.enc_w2.T) * (1.0 - h ** 2)
    g["enc_w1"] = xc.T @ da
    g["enc_b1"] = da.sum(axis=0)
    return loss, parts, g


GradFn = Callable[[NaModelParams, Batch, float], dict]


def analytic_grad(params: NaModelParams, batch: Batch, lam: float = 1.0) -> dict:
    return loss_and_grad(params, batch, lam)[2]


def gradient_check(params: NaModelParams, sample, h: float = 1e-4, lam: float = 1.0,
                   grad_fn: GradFn = analytic_grad) -> float:
    """Largest relative gap between ``grad_fn`` and central differences.

    ``sample`` is a :class:`Batch` or ``(frames, labels, intervals, pitches)``.
    Relative error per coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if h <= 0:
        raise SongTransError("finite-difference step must be positive")
    batch = sample if isinstance(sample, Batch) else make_batch([sample], params.context)
    analytic = grad_fn(params, batch, lam)
    a = np.concatenate([np.asarray(analytic[k]).ravel() for k in NaModelParams.ARRAYS])
    base = params.flat()
    numeric = np.empty_like(base)
    for i in range(base.size):
        orig = base[i]
        base[i] = orig + h
        up = loss_and_grad(params.with_flat(base), batch, lam, need_grad=False)[0]
        base[i] = orig - h
        down = loss_and_grad(params.with_flat(base), batch, lam, need_grad=False)[0]
        base[i] = orig
        numeric[i] = (up - down) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(a - numeric) / denom))
