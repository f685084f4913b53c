import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vtc.errors import NonFiniteInput, ShapeMismatch, ZeroNormRow
from vtc.tensor import (
    AttentionTensor,
    TokenTensor,
    cosine_matrix,
    minmax_normalize,
    pairwise_sq_euclidean,
    softmax_rows,
)

finite = st.floats(-50, 50, allow_nan=False, width=32)


def test_softmax_uniform():
    np.testing.assert_allclose(softmax_rows(np.zeros((2, 2)), 1.0), [[0.5, 0.5], [0.5, 0.5]])


def test_softmax_closed_form():
    out = softmax_rows([[0.0, math.log(2)], [0.0, 0.0]], 1.0)
    np.testing.assert_allclose(out, [[1 / 3, 2 / 3], [0.5, 0.5]], atol=1e-12)


def test_softmax_shift_invariance():
    x = np.array([[0.3, -1.2, 4.0]])
    np.testing.assert_allclose(softmax_rows(x + 17.5, 2.0), softmax_rows(x, 2.0), atol=1e-12)


def test_softmax_large_logits_stable():
    out = softmax_rows([[1000.0, 1000.0, -1000.0]], 1.0)
    np.testing.assert_allclose(out, [[0.5, 0.5, 0.0]])


def test_softmax_rejects_nan():
    with pytest.raises(NonFiniteInput):
        softmax_rows([[0.0, np.nan]])
    with pytest.raises(ValueError):
        softmax_rows([[0.0]], scale=0.0)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 64), st.integers(1, 64)), elements=finite),
       st.floats(0.1, 10))
def test_softmax_rows_sum_to_one(x, scale):
    out = softmax_rows(x, scale)
    assert np.all(out >= 0) and np.all(out <= 1)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)


@pytest.mark.parametrize("a, b, want", [
    ([[1, 0]], [[1, 0]], 1.0),
    ([[1, 0]], [[0, 1]], 0.0),
    ([[3, 4]], [[6, 8]], 1.0),
])
def test_cosine_examples(a, b, want):
    assert cosine_matrix(TokenTensor.from_rows(a), TokenTensor.from_rows(b))[0, 0] == pytest.approx(want, abs=1e-12)


def test_cosine_zero_rows():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    c = cosine_matrix(a, a)
    assert c[0].tolist() == [0.0, 0.0] and c[:, 0].tolist() == [0.0, 0.0]
    assert c[1, 1] == pytest.approx(1.0)
    with pytest.raises(ZeroNormRow) as e:
        cosine_matrix(a, a, zero_policy="raise")
    assert e.value.index == 0


def test_cosine_dimension_mismatch():
    with pytest.raises(ShapeMismatch):
        cosine_matrix(np.ones((2, 3)), np.ones((2, 4)))


vectors = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 8)),
                 elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=150, deadline=None)
@given(vectors, st.data())
def test_cosine_unit_diagonal_and_scale_invariance(x, data):
    norms = np.linalg.norm(x, axis=1)
    c = cosine_matrix(x, x)
    assert np.all(c <= 1 + 1e-6) and np.all(c >= -1 - 1e-6)
    nz = norms > 1e-6
    np.testing.assert_allclose(np.diag(c)[nz], 1.0, atol=1e-6)
    scales = data.draw(arrays(np.float64, x.shape[0], elements=st.floats(0.01, 100)))
    np.testing.assert_allclose(cosine_matrix(x * scales[:, None], x), c, atol=1e-5)


@pytest.mark.parametrize("v, want", [
    ([0.3, 0.5, 0.4], [0.0, 1.0, 0.5]),
    ([7, 7, 7], [0, 0, 0]),
    ([1], [0]),
])
def test_minmax_examples(v, want):
    np.testing.assert_allclose(minmax_normalize(v), want, atol=1e-12)


def test_minmax_rejects_nonfinite():
    with pytest.raises(NonFiniteInput):
        minmax_normalize([1.0, np.inf])


def test_sq_euclidean_examples():
    assert pairwise_sq_euclidean([[0.0, 0.0], [3.0, 4.0]]).tolist() == [[0, 25], [25, 0]]
    assert pairwise_sq_euclidean([[1.0, 2.0]]).tolist() == [[0.0]]


def _naive_sq(x):
    n = len(x)
    return [[sum((a - b) ** 2 for a, b in zip(x[i], x[j])) for j in range(n)] for i in range(n)]


@settings(max_examples=100, deadline=None)
@given(vectors)
def test_sq_euclidean_matches_double_loop(x):
    d = pairwise_sq_euclidean(x)
    np.testing.assert_allclose(d, _naive_sq(x.tolist()), atol=1e-5)
    np.testing.assert_allclose(d, d.T, atol=1e-5)
    assert np.all(np.diag(d) == 0)


def test_sq_euclidean_permutation_equivariance():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((9, 4))
    p = rng.permutation(9)
    np.testing.assert_allclose(pairwise_sq_euclidean(x[p]), pairwise_sq_euclidean(x)[np.ix_(p, p)])


def test_token_tensor_validation():
    with pytest.raises(NonFiniteInput):
        TokenTensor.from_rows([[np.nan, 1.0]])
    with pytest.raises(ShapeMismatch):
        TokenTensor.from_rows([[1.0], [2.0]], keys=[(0, 0), (0, 0)])
    t = TokenTensor.from_video(np.zeros((2, 3, 4)))
    assert t.n == 6 and t.d == 4
    assert t.keys[:4] == [(0, 0), (0, 1), (0, 2), (1, 0)]
    assert t.data.dtype == np.float32


def test_attention_tensor_validation():
    a = AttentionTensor.from_logits(np.zeros((2, 3, 3)), scale=1.0)
    assert a.heads == 2 and a.size == 3
    with pytest.raises(ShapeMismatch):
        AttentionTensor(np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        AttentionTensor(np.full((2, 2), 2.0))
