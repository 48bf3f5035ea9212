import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midas.core import AnnotatorVotes, LabeledClip, SoftLabel, VideoClip
from midas.errors import InsufficientDataError, ShapeError
from midas.mixing import (
    decompose_vicinity,
    midas_batch,
    mix_clips,
    mix_label_vectors,
    mix_labels,
    mix_weights,
    soft_mixture,
)
from midas.sampling import MixCoefficient, RngStream


def clip_of(value, shape=(2, 3, 3, 1)):
    return VideoClip(np.full(shape, value, dtype=np.float32))


def random_clip(rng, shape=(3, 4, 4, 2)):
    return VideoClip(rng.random(shape).astype(np.float32))


def test_mix_clip_endpoints(rng):
    a, b = random_clip(rng), random_clip(rng)
    assert mix_clips(a, b, 1.0).equals(a)
    assert mix_clips(a, b, 0.0).equals(b)


def test_mix_clip_scalar():
    out = mix_clips(clip_of(0.0), clip_of(1.0), 0.25)
    np.testing.assert_array_equal(out.frames, np.full((2, 3, 3, 1), 0.75, dtype=np.float32))


def test_mix_clip_matches_formula(rng):
    a, b = random_clip(rng), random_clip(rng)
    lam = 0.3141
    want = (lam * a.frames.astype(np.float64) + (1 - lam) * b.frames.astype(np.float64)).astype(np.float32)
    got = mix_clips(a, b, lam).frames
    # float64 weights differ from lam by at most half an ulp of 0.5
    np.testing.assert_array_max_ulp(got, want, maxulp=1)


def test_mix_clip_shape_mismatch():
    with pytest.raises(ShapeError):
        mix_clips(clip_of(0.0), clip_of(0.0, (3, 3, 3, 1)), 0.5)


def test_mix_weights_sum_and_swap():
    for lam in np.random.default_rng(0).random(1000).tolist() + [0.0, 0.5, 1.0, 0.1, 0.9]:
        wa, wb = mix_weights(lam)
        assert wa + wb == 1.0
        assert abs(wa - lam) <= 2**-54
        assert mix_weights(1.0 - lam) == (wb, wa)


def test_mix_labels_examples():
    yi, yj = SoftLabel([1.0, 0.0]), SoftLabel([0.0, 1.0])
    label, pre = mix_labels(yi, yj, 1.0, normalize=False)
    assert label.equals(yi)
    label, pre = mix_labels(yi, yj, 0.6, normalize=False)
    np.testing.assert_allclose(label.probs, [0.6, 0.4], atol=1e-15)
    label, pre = mix_labels(yi, yj, 0.6, normalize=True)
    p = 1 / (1 + math.exp(-0.2))
    np.testing.assert_allclose(label.probs, [p, 1 - p], atol=1e-12)
    np.testing.assert_allclose(pre, [0.6, 0.4], atol=1e-15)
    with pytest.raises(ShapeError):
        mix_labels(yi, SoftLabel([1.0, 0, 0]), 0.5)


simplex = st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda v: sum(v) > 1e-3).map(
    lambda v: np.asarray(v) / sum(v)
)


@given(simplex, st.data(), st.floats(0, 1))
def test_label_mix_properties(yi, data, lam):
    yj = np.asarray(data.draw(st.lists(st.floats(0, 1), min_size=len(yi), max_size=len(yi)).filter(lambda v: sum(v) > 1e-3)))
    yj = yj / yj.sum()
    pre = mix_label_vectors(yi, yj, lam)
    assert abs(pre.sum() - 1) <= 1e-9
    SoftLabel(pre)  # valid without renormalisation
    np.testing.assert_array_equal(pre, mix_label_vectors(yj, yi, 1.0 - lam))


@settings(max_examples=50)
@given(st.integers(0, 2**32), st.floats(0, 1))
def test_clip_mix_convex_and_symmetric(seed, lam):
    rng = np.random.default_rng(seed)
    a, b = random_clip(rng), random_clip(rng)
    m = mix_clips(a, b, lam)
    lo = np.minimum(a.frames, b.frames)
    hi = np.maximum(a.frames, b.frames)
    # elementwise convexity up to the final float32 rounding
    assert (m.frames >= np.nextafter(lo, -np.inf)).all() and (m.frames <= np.nextafter(hi, np.inf)).all()
    assert 0.0 <= m.frames.min() and m.frames.max() <= 1.0
    assert m.equals(mix_clips(b, a, 1.0 - lam))


def _dataset(labels, shape=(4, 2, 2, 1)):
    rng = np.random.default_rng(0)
    return [
        LabeledClip(f"s{k}", VideoClip(rng.random(shape).astype(np.float32)), SoftLabel(p))
        for k, p in enumerate(labels)
    ]


def test_batch_two_clip_dataset():
    ds = _dataset([[0.6, 0.4], [0.2, 0.8]])
    batch = midas_batch(ds, 50, rng=RngStream(3))
    assert len(batch) == 50
    assert all({m.source_i, m.source_j} == {"s0", "s1"} for m in batch)


def test_batch_hard_mode_prenorm():
    ds = _dataset([[0.6, 0.4], [0.2, 0.8]])
    batch = midas_batch(ds, 200, label_mode="hard", normalize=False, rng=RngStream(4))
    for m in batch:
        lam = m.lam.lam
        expected = [lam, 1 - lam] if m.source_i == "s0" else [1 - lam, lam]
        np.testing.assert_allclose(m.label_pre_norm, expected, atol=1e-15)
    # lam = 0.5 by hand: one-hot [1,0] and [0,1] average to [0.5, 0.5]
    label, pre = mix_labels(SoftLabel([1.0, 0.0]), SoftLabel([0.0, 1.0]), 0.5, normalize=False)
    np.testing.assert_array_equal(pre, [0.5, 0.5])


def test_batch_normalised_labels_are_softmax_of_prenorm():
    ds = _dataset([[0.6, 0.4], [0.2, 0.8], [1.0, 0.0]])
    for m in midas_batch(ds, 20, rng=RngStream(5)):
        z = np.exp(m.label_pre_norm - m.label_pre_norm.max())
        np.testing.assert_allclose(m.label.probs, z / z.sum(), atol=1e-15)


def test_batch_deterministic_and_worker_independent():
    ds = _dataset([[0.6, 0.4], [0.2, 0.8], [0.5, 0.5], [0.0, 1.0]])
    a = midas_batch(ds, 30, rng=RngStream(6), num_segments=3)
    b = midas_batch(ds, 30, rng=RngStream(6), num_segments=3, workers=4)
    for x, y in zip(a, b):
        assert (x.source_i, x.source_j, x.lam) == (y.source_i, y.source_j, y.lam)
        assert x.clip.equals(y.clip) and x.label.equals(y.label)
    assert a[0].clip.num_frames == 3


def test_batch_needs_two():
    with pytest.raises(InsufficientDataError):
        midas_batch(_dataset([[1.0, 0.0]]), 4)


def test_batch_requires_equal_lengths_without_segments():
    rng = np.random.default_rng(0)
    ds = [
        LabeledClip("a", VideoClip(rng.random((4, 2, 2, 1))), SoftLabel([1.0, 0.0])),
        LabeledClip("b", VideoClip(rng.random((6, 2, 2, 1))), SoftLabel([0.0, 1.0])),
    ]
    with pytest.raises(ShapeError):
        midas_batch(ds, 2, rng=RngStream(0))
    assert midas_batch(ds, 2, rng=RngStream(0), num_segments=4)[0].clip.num_frames == 4


def test_vicinity_all_correct():
    q_j = SoftLabel([0.2, 0.5, 0.3])
    for lam in (0.0, 0.3, 0.99):
        d = decompose_vicinity(lam, 1, AnnotatorVotes([1] * 6), q_j)
        assert d.lambda_prime == pytest.approx(lam, abs=1e-15)
        np.testing.assert_allclose(d.y_prime_j, q_j.probs, atol=1e-15)


def test_vicinity_lambda_prime_by_hand():
    votes = AnnotatorVotes([0] * 8 + [1, 2])
    d = decompose_vicinity(MixCoefficient(0.5, 0.4), 0, votes, SoftLabel([0.1, 0.2, 0.7]))
    assert d.correct_votes == 8 and d.num_annotators == 10
    assert d.lambda_prime == pytest.approx(0.4, abs=1e-15)


def test_vicinity_degenerate():
    d = decompose_vicinity(1.0, 2, AnnotatorVotes([2, 2, 2]), SoftLabel([0.5, 0.5, 0.0]))
    assert d.degenerate and d.lambda_prime == 1.0
    np.testing.assert_allclose(d.reconstruct(2), [0, 0, 1])


def test_vicinity_identity_random():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10**4):
        C = int(rng.integers(2, 11))
        S = int(rng.integers(1, 21))
        votes = AnnotatorVotes(rng.integers(0, C, size=S))
        q_j = SoftLabel(rng.dirichlet(np.ones(C)))
        lam = float(rng.random())
        true_class = int(rng.integers(C))
        d = decompose_vicinity(lam, true_class, votes, q_j)
        assert 0 <= d.lambda_prime <= lam + 1e-15
        assert d.y_prime_j.min() >= 0 and abs(d.y_prime_j.sum() - 1) <= 1e-9
        worst = max(worst, np.abs(d.reconstruct(true_class) - soft_mixture(lam, votes, q_j)).max())
    assert worst <= 1e-12
