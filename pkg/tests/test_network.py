import math

import numpy as np
import pytest

from songtrans.core import SongTransError
from songtrans.namodel.features import N_PITCHES, FrameSeries
from songtrans.namodel.network import (
    EPS,
    NaModelParams,
    analytic_grad,
    bce,
    boundary_loss,
    boundary_posteriors,
    context_stack,
    encoder_forward,
    gradient_check,
    init_params,
    loss_and_grad,
    make_batch,
    pitch_loss,
    pitch_posterior,
    pool_note_feature,
    sigmoid,
)


def zero_params(d_in=3, context=1, hidden=4, d_enc=2):
    p = init_params(d_in, context, hidden, d_enc, seed=0)
    return p.with_flat(np.zeros_like(p.flat()))


def tiny_sample(rng, n=12, d_in=4):
    frames = rng.standard_normal((n, d_in))
    labels = (rng.random(n) < 0.3).astype(float)
    cuts = np.sort(rng.choice(np.arange(1, n), size=2, replace=False))
    edges = [0, *cuts, n]
    intervals = np.array(list(zip(edges, edges[1:])))
    pitches = rng.integers(0, N_PITCHES, size=len(intervals))
    return frames, labels, intervals, pitches


def test_zero_weights_encode_to_zero():
    p = zero_params()
    out = encoder_forward(FrameSeries(np.ones((5, 3))), p)
    assert out.features.shape == (5, 2) and np.all(out.features == 0)


def test_identity_single_frame_config():
    d = 3
    p = NaModelParams(0, np.eye(d), np.zeros(d), np.eye(d), np.zeros(d),
                      np.zeros(d), np.asarray(0.0), np.zeros((d, N_PITCHES)), np.zeros(N_PITCHES))
    x = np.array([[0.1, -2.0, 0.5], [3.0, 0.0, -0.3]])
    np.testing.assert_allclose(encoder_forward(x, p).features, np.tanh(x))


def test_seed_42_regression():
    p = init_params(3, context=1, hidden=4, d_enc=2, seed=42)
    x = np.arange(12.0).reshape(4, 3) / 10
    expected = np.array([
        [0.2161678961274111, 0.12402309922704344],
        [0.415113672455713, 0.19125234127796564],
        [0.5535844369515345, 0.21856457435690213],
        [0.6495041242339964, 0.12049829591632658],
    ])
    np.testing.assert_allclose(encoder_forward(x, p).features, expected, rtol=1e-12)


def test_init_is_seeded():
    a, b = init_params(5, seed=3), init_params(5, seed=3)
    assert np.array_equal(a.flat(), b.flat())
    assert not np.array_equal(a.flat(), init_params(5, seed=4).flat())


def test_context_stack_zero_pads_edges():
    x = np.array([[1.0], [2.0], [3.0]])
    np.testing.assert_array_equal(context_stack(x, 1), [[0, 1, 2], [1, 2, 3], [2, 3, 0]])


def test_boundary_posteriors():
    p = zero_params()
    assert np.all(boundary_posteriors(np.ones((4, 2)), p) == 0.5)
    p.boundary_w = np.array([1.0, 0.0])
    assert boundary_posteriors(np.array([[0.5, 9.0]]), p)[0] == pytest.approx(1 / (1 + math.exp(-0.5)))
    assert boundary_posteriors(np.array([[0.5, 9.0]]), p)[0] == pytest.approx(0.6225, abs=1e-4)
    p.boundary_b = np.asarray(1e3)
    post = boundary_posteriors(np.zeros((1, 2)), p)
    assert 1 - EPS < post[0] <= 1


def test_sigmoid_is_stable():
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        out = sigmoid(np.array([-1e4, 0.0, 1e4]))
    np.testing.assert_array_equal(out, [0.0, 0.5, 1.0])


def test_boundary_loss_values():
    assert boundary_loss(np.full(7, 0.5), np.array([1, 0, 1, 1, 0, 0, 1])) == pytest.approx(math.log(2), abs=1e-12)
    assert boundary_loss(np.array([1.0, 0.0]), np.array([1, 0])) <= 1e-6
    assert boundary_loss(np.array([0.9, 0.2]), np.array([1, 0])) == pytest.approx(-(math.log(0.9) + math.log(0.8)) / 2)
    assert boundary_loss(np.array([0.9, 0.2]), np.array([1, 0])) == pytest.approx(0.1643, abs=1e-4)


def test_bce_errors():
    with pytest.raises(SongTransError):
        bce([0.5], [1, 0])
    with pytest.raises(SongTransError):
        bce([], [])


def test_pool_note_feature():
    v = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 3.0]])
    np.testing.assert_array_equal(pool_note_feature(v, (2, 3)), [3, 3])
    np.testing.assert_array_equal(pool_note_feature(np.ones((2, 2)), (0, 2)), [1, 1])
    np.testing.assert_array_equal(pool_note_feature(v, (0, 2)), [0.5, 0.5])
    with pytest.raises(SongTransError):
        pool_note_feature(v, (1, 1))
    with pytest.raises(SongTransError):
        pool_note_feature(v, (2, 4))


def test_pitch_posterior():
    p = zero_params()
    assert np.all(pitch_posterior(np.array([1.0, -2.0]), p) == 0.5)
    p.pitch_b = np.full(N_PITCHES, -50.0)
    p.pitch_b[64] = 50.0
    post = pitch_posterior(np.zeros(2), p)
    assert post[64] > 1 - 1e-9 and np.all(np.delete(post, 64) < 1e-9)

    p.pitch_w = np.zeros((2, N_PITCHES))
    p.pitch_w[:, 0] = [1.0, 2.0]
    p.pitch_w[:, 1] = [-1.0, 0.5]
    p.pitch_b[:2] = [0.1, -0.2]
    v = np.array([0.3, -0.4])
    out = pitch_posterior(v, p)
    assert out[0] == pytest.approx(1 / (1 + math.exp(-(0.3 - 0.8 + 0.1))))
    assert out[1] == pytest.approx(1 / (1 + math.exp(-(-0.3 - 0.2 - 0.2))))


def test_pitch_loss():
    target = np.zeros(N_PITCHES)
    target[60] = 1
    assert pitch_loss(np.full(N_PITCHES, 0.5), target) == pytest.approx(math.log(2), abs=1e-12)
    assert pitch_loss(target.copy(), target) <= 1e-6
    rng = np.random.default_rng(5)
    post = rng.uniform(0.05, 0.95, N_PITCHES)
    scalar = -sum(math.log(q) if y else math.log(1 - q) for q, y in zip(post, target)) / N_PITCHES
    assert pitch_loss(post, target) == pytest.approx(scalar, rel=1e-12)
    with pytest.raises(SongTransError):
        pitch_loss(np.full(3, 0.5), np.zeros(3))


def test_joint_loss_matches_parts():
    rng = np.random.default_rng(0)
    sample = tiny_sample(rng)
    p = init_params(4, 1, 5, 4, seed=1)
    loss, parts, _ = loss_and_grad(p, make_batch([sample], 1), lam=0.5)
    v = encoder_forward(sample[0], p)
    lb = boundary_loss(boundary_posteriors(v, p), sample[1])
    posts = np.array([pitch_posterior(pool_note_feature(v, iv), p) for iv in sample[2]])
    targets = np.eye(N_PITCHES)[sample[3]]
    ln = pitch_loss(posts, targets)
    assert parts["boundary"] == pytest.approx(lb, rel=1e-12)
    assert parts["pitch"] == pytest.approx(ln, rel=1e-12)
    assert loss == pytest.approx(lb + 0.5 * ln, rel=1e-12)


def test_batch_keeps_segments_apart():
    rng = np.random.default_rng(2)
    a, b = tiny_sample(rng), tiny_sample(rng)
    p = init_params(4, 2, 5, 4, seed=0)
    both = loss_and_grad(p, make_batch([a, b], 2), need_grad=False)[1]["boundary"]
    la = loss_and_grad(p, make_batch([a], 2), need_grad=False)[1]["boundary"]
    lb = loss_and_grad(p, make_batch([b], 2), need_grad=False)[1]["boundary"]
    assert both == pytest.approx((la + lb) / 2, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    p = init_params(4, context=1, hidden=5, d_enc=4, seed=seed)
    assert gradient_check(p, tiny_sample(rng), h=1e-4) < 1e-3


def test_gradient_check_overlapping_notes():
    rng = np.random.default_rng(9)
    frames, labels, _, _ = tiny_sample(rng)
    intervals = np.array([[0, 6], [3, 9], [8, 12]])
    p = init_params(4, 1, 5, 4, seed=2)
    assert gradient_check(p, (frames, labels, intervals, np.array([1, 2, 3]))) < 1e-3


def test_gradient_check_catches_sign_flip():
    rng = np.random.default_rng(0)
    p = init_params(4, context=1, hidden=5, d_enc=4, seed=0)

    def flipped(params, batch, lam):
        g = analytic_grad(params, batch, lam)
        g["boundary_w"] = g["boundary_w"].copy()
        g["boundary_w"][0] *= -1
        return g

    assert gradient_check(p, tiny_sample(rng), grad_fn=flipped) > 1e-1


def test_gradient_check_bias_only_model():
    d_in = 3
    p = NaModelParams(0, np.zeros((d_in, 0)), np.zeros(0), np.zeros((0, 0)), np.zeros(0),
                      np.zeros(0), np.asarray(0.3), np.zeros((0, N_PITCHES)), np.full(N_PITCHES, -1.0))
    assert p.flat().size == 1 + N_PITCHES
    assert gradient_check(p, tiny_sample(np.random.default_rng(0), d_in=d_in)) < 1e-3


def test_gradient_masked_where_clamped():
    p = zero_params(d_in=4, context=0, hidden=2, d_enc=2)
    p.boundary_b = np.asarray(100.0)
    frames = np.zeros((3, 4))
    batch = make_batch([(frames, np.zeros(3), np.array([[0, 3]]), np.array([60]))], 0)
    _, _, g = loss_and_grad(p, batch)
    assert g["boundary_b"] == 0


def test_params_shape_checks():
    p = init_params(3, 1, 4, 2)
    with pytest.raises(SongTransError):
        NaModelParams(1, p.enc_w1, p.enc_b1, p.enc_w2, p.enc_b2, p.boundary_w, np.zeros(1), p.pitch_w, p.pitch_b)
    with pytest.raises(SongTransError):
        NaModelParams(1, p.enc_w1[:-1], p.enc_b1, p.enc_w2, p.enc_b2, p.boundary_w, p.boundary_b, p.pitch_w, p.pitch_b)
    bad = p.enc_b1.copy()
    bad[0] = np.nan
    with pytest.raises(SongTransError):
        NaModelParams(1, p.enc_w1, bad, p.enc_w2, p.enc_b2, p.boundary_w, p.boundary_b, p.pitch_w, p.pitch_b)
    with pytest.raises(SongTransError):
        encoder_forward(np.zeros((2, 5)), p)


def test_flat_round_trip():
    p = init_params(3, 1, 4, 2, seed=8)
    q = p.with_flat(p.flat())
    for k in NaModelParams.ARRAYS:
        np.testing.assert_array_equal(getattr(p, k), getattr(q, k))
        assert getattr(p, k).shape == getattr(q, k).shape
