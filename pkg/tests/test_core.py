import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatlab.core import (entropy, euclidean_distance, normalize,
                         pairwise_distances, softmax)
from fatlab.errors import DegenerateVectorError, DimensionMismatchError

finite_floats = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def vectors(dim):
    return st.lists(finite_floats, min_size=dim, max_size=dim).map(np.array)


class TestEuclideanDistance:
    def test_three_four_five(self):
        assert euclidean_distance((0, 0), (3, 4)) == 5.0

    def test_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            x = rng.normal(size=6)
            assert euclidean_distance(x, x) == 0.0

    def test_matches_componentwise_loop(self):
        rng = np.random.default_rng(7)
        u = rng.normal(size=8)
        v = rng.normal(size=8)
        acc = 0.0
        for a, b in zip(u, v):
            acc += (a - b) ** 2
        assert euclidean_distance(u, v) == pytest.approx(math.sqrt(acc), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        u, v = rng.normal(size=(2, 5))
        assert euclidean_distance(u, v) == euclidean_distance(v, u)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            euclidean_distance((1, 2), (1, 2, 3))

    @settings(max_examples=200, deadline=None)
    @given(vectors(4), vectors(4), vectors(4))
    def test_triangle_inequality(self, a, b, c):
        assert euclidean_distance(a, b) <= \
            euclidean_distance(a, c) + euclidean_distance(c, b) + 1e-9

    @settings(max_examples=200, deadline=None)
    @given(vectors(3), vectors(3), vectors(3))
    def test_two_sided_centroid_bound(self, a, p, c):
        # the sample-to-sample distance is sandwiched by routes through c
        d_ap = euclidean_distance(a, p)
        d_ac = euclidean_distance(a, c)
        d_cp = euclidean_distance(c, p)
        assert max(0.0, d_ac - d_cp) - 1e-9 <= d_ap <= d_ac + d_cp + 1e-9


class TestNormalize:
    def test_three_four(self):
        np.testing.assert_allclose(normalize((3, 4)), [0.6, 0.8], atol=1e-15)

    def test_unit_vector_fixed_point(self):
        rng = np.random.default_rng(5)
        v = normalize(rng.normal(size=7))
        np.testing.assert_allclose(normalize(v), v, atol=1e-12)
        assert abs(np.linalg.norm(normalize(v)) - 1.0) < 1e-12

    def test_zero_vector_raises(self):
        with pytest.raises(DegenerateVectorError):
            normalize((0.0, 0.0))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax((0, 0, 0, 0)), [0.25] * 4)

    def test_no_overflow(self):
        p = softmax((1000.0, 0.0))
        assert abs(p[0] - 1.0) < 1e-12 and p[1] < 1e-12
        assert np.all(np.isfinite(p))

    def test_matches_extended_precision_oracle(self):
        import mpmath
        mpmath.mp.dps = 50
        exps = [mpmath.exp(k) for k in (1, 2, 3)]
        total = sum(exps)
        expected = [float(e / total) for e in exps]
        np.testing.assert_allclose(softmax((1.0, 2.0, 3.0)), expected,
                                   rtol=1e-14)

    def test_sums_to_one(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            assert abs(softmax(rng.normal(size=6) * 10).sum() - 1.0) < 1e-12


class TestEntropy:
    def test_one_hot_is_zero(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_uniform_four(self):
        assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-12)

    def test_half_half(self):
        assert entropy([0.5, 0.5, 0.0, 0.0]) == pytest.approx(math.log(2),
                                                              abs=1e-12)

    def test_bounded_by_log_support(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            p = rng.dirichlet(np.ones(5))
            assert entropy(p) <= math.log(5) + 1e-12

    def test_max_only_at_uniform(self):
        p = np.array([0.26, 0.24, 0.25, 0.25])
        assert entropy(p) < math.log(4)


def test_pairwise_distances_matches_scalar():
    rng = np.random.default_rng(17)
    x = rng.normal(size=(6, 4))
    d = pairwise_distances(x)
    for i in range(6):
        for j in range(6):
            assert d[i, j] == pytest.approx(
                euclidean_distance(x[i], x[j]), abs=1e-12)
