import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from midas.errors import InsufficientDataError, ParameterError
from midas.sampling import (
    RngStream,
    sample_lambda,
    sample_lambdas,
    sample_pair,
    sample_segments,
    segment_bounds,
)


def beta_variance_by_quadrature(alpha):
    pdf = stats.beta(alpha, alpha).pdf
    mean, _ = integrate.quad(lambda x: x * pdf(x), 0, 1, limit=200)
    second, _ = integrate.quad(lambda x: x * x * pdf(x), 0, 1, limit=200)
    return second - mean**2


def test_beta_variance_formula_matches_quadrature():
    assert beta_variance_by_quadrature(0.4) == pytest.approx(1 / (4 * (2 * 0.4 + 1)), abs=1e-6)
    assert 1 / (4 * (2 * 0.4 + 1)) == pytest.approx(0.13889, abs=1e-5)


def test_lambda_moments_alpha_04():
    lam = sample_lambdas(0.4, 10**6, RngStream(1))
    assert lam.min() >= 0.0 and lam.max() <= 1.0
    assert abs(lam.mean() - 0.5) <= 0.01
    assert abs(lam.var() - 0.13889) <= 0.005


def test_lambda_alpha_one_is_uniform():
    lam = sample_lambdas(1.0, 20000, RngStream(2))
    assert stats.kstest(lam, "uniform").pvalue > 0.001


def test_lambda_histogram_matches_beta():
    lam = sample_lambdas(0.4, 10**6, RngStream(3))
    edges = np.linspace(0, 1, 51)
    observed, _ = np.histogram(lam, edges)
    expected = np.diff(stats.beta(0.4, 0.4).cdf(edges)) * lam.size
    assert stats.chisquare(observed, expected).pvalue > 0.001


def test_sample_lambda_scalar_and_errors():
    m = sample_lambda(0.4, RngStream(5))
    assert 0 <= m.lam <= 1 and m.alpha == 0.4
    for bad in (0.0, -1.0):
        with pytest.raises(ParameterError):
            sample_lambda(bad, RngStream(5))


def test_streams_are_reproducible_and_distinct():
    a = RngStream(9, (1, 2)).generator().random(5)
    b = RngStream(9, (1, 2)).generator().random(5)
    c = RngStream(9, (1, 3)).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(9).child(1, 2).key == (1, 2)
    assert RngStream(9, (1, 2)).stream_id == RngStream(9, (1, 2)).stream_id
    with pytest.raises(ParameterError):
        RngStream(-1)


def test_pair_two_items():
    g = RngStream(0).generator()
    seen = {sample_pair(2, g) for _ in range(200)}
    assert seen == {(0, 1), (1, 0)}


def test_pair_never_self():
    g = RngStream(1).generator()
    pairs = np.array([sample_pair(100, g) for _ in range(10**5)])
    assert (pairs[:, 0] != pairs[:, 1]).all()


def test_pair_marginals_uniform():
    g = RngStream(2).generator()
    pairs = np.array([sample_pair(10, g) for _ in range(10**5)])
    for col in (0, 1):
        freq = np.bincount(pairs[:, col], minlength=10) / len(pairs)
        assert np.abs(freq - 0.1).max() <= 0.01
        assert stats.chisquare(freq * len(pairs)).pvalue > 0.001


def test_pair_needs_two():
    with pytest.raises(InsufficientDataError):
        sample_pair(1, RngStream(0))


@pytest.mark.parametrize(
    "total, num, expected",
    [
        (8, 8, [0, 1, 2, 3, 4, 5, 6, 7]),
        (16, 8, [1, 3, 5, 7, 9, 11, 13, 15]),
        (3, 8, [0, 0, 0, 1, 1, 1, 2, 2]),
    ],
)
def test_segments_center(total, num, expected):
    assert sample_segments(total, num, "center") == expected


def test_segments_errors():
    with pytest.raises(ParameterError):
        sample_segments(0, 8, "center")
    with pytest.raises(ParameterError):
        sample_segments(8, 0, "center")
    with pytest.raises(ParameterError):
        sample_segments(8, 8, "sideways")


@given(st.integers(1, 200), st.integers(1, 32), st.integers(0, 2**32))
def test_segments_random_within_bounds(total, num, seed):
    idx = sample_segments(total, num, "random", RngStream(seed))
    bounds = segment_bounds(total, num)
    assert len(idx) == num
    assert all(0 <= i < total for i in idx)
    assert all(a <= b for a, b in zip(idx, idx[1:]))
    for k, i in enumerate(idx):
        lo, hi = bounds[k], bounds[k + 1]
        assert (lo <= i < hi) if hi > lo else i == lo


def test_segments_random_covers_segment():
    g = RngStream(4).generator()
    draws = np.array([sample_segments(16, 8, "random", g) for _ in range(400)])
    for k in range(8):
        assert set(draws[:, k]) == {2 * k, 2 * k + 1}
