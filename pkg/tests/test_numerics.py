import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dbnclass.numerics import RngStream, matmul, sigmoid, softmax

finite = st.floats(-700, 700, allow_nan=False)


def test_sigmoid_examples():
    assert sigmoid([0.0])[0] == 0.5
    assert sigmoid([math.log(3)])[0] == pytest.approx(0.75, abs=1e-15)
    v = sigmoid([-1000.0])[0]
    assert 0 <= v <= 1e-300 and not math.isnan(v)


@given(arrays(np.float64, st.integers(1, 20), elements=finite))
def test_sigmoid_symmetry(v):
    np.testing.assert_allclose(sigmoid(v) + sigmoid(-v), 1.0, atol=1e-12)


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])
    np.testing.assert_allclose(softmax([7.5, 7.5, 7.5]), [1 / 3] * 3)
    np.testing.assert_allclose(softmax(np.log([1.0, 2.0, 3.0])), [1 / 6, 2 / 6, 3 / 6], rtol=1e-14)
    with pytest.raises(ValueError):
        softmax([])


@given(arrays(np.float64, st.integers(1, 30), elements=finite))
def test_softmax_is_a_distribution(v):
    p = softmax(v)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) <= 1e-12


def test_matmul_examples(gen):
    M = gen.normal(size=(2, 2))
    np.testing.assert_array_equal(matmul(np.eye(2), M), M)
    np.testing.assert_array_equal(matmul([[1, 2], [3, 4]], [[1], [1]]), [[3], [7]])
    np.testing.assert_array_equal(matmul(np.zeros((2, 2)), M), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_associative(gen):
    for _ in range(20):
        a, b, c = gen.normal(size=(4, 5)), gen.normal(size=(5, 3)), gen.normal(size=(3, 6))
        left, right = matmul(matmul(a, b), c), matmul(a, matmul(b, c))
        assert np.linalg.norm(left - right) / np.linalg.norm(left) <= 1e-9


def test_matmul_repeatable(gen):
    a, b = gen.normal(size=(50, 70)), gen.normal(size=(70, 40))
    assert matmul(a, b).tobytes() == matmul(a, b).tobytes()


def test_rng_streams_reproducible():
    a = RngStream(7, 3).uniform(10_000)
    b = RngStream(7, 3).uniform(10_000)
    assert a.tobytes() == b.tobytes()


def test_rng_streams_distinct():
    a = RngStream(7, 3).uniform(10_000)
    b = RngStream(7, 4).uniform(10_000)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05


def test_child_streams_ignore_parent_consumption():
    parent = RngStream(1)
    first = parent.child("layer", 2).uniform(5)
    parent.uniform(1000)
    np.testing.assert_array_equal(parent.child("layer", 2).uniform(5), first)
    assert not np.array_equal(parent.child("layer", 3).uniform(5), first)
