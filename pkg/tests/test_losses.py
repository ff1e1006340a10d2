import math

import numpy as np
import pytest

from conftest import central_difference, clustered_data, relative_error
from fatlab.clusters import ClusterStats, compute_centroids
from fatlab.core import euclidean_distance
from fatlab.errors import (DegenerateVectorError, EmptyTripletSetError,
                           InvalidBatchError, NoNegativeClusterError)
from fatlab.losses import (LossConfig, cross_entropy, fat_loss,
                           fat_loss_normalized, hybrid_loss, p2s_loss,
                           p2s_loss_normalized, point_to_set_batch,
                           triplet_batch_all, triplet_batch_hard)


def brute_force_batch_all(x, labels, margin):
    """Independent oracle: plain loops over every index triple."""
    n = len(labels)
    terms = []
    for a in range(n):
        for p in range(n):
            if p == a or labels[p] != labels[a]:
                continue
            for q in range(n):
                if labels[q] == labels[a]:
                    continue
                d_ap = euclidean_distance(x[a], x[p])
                d_an = euclidean_distance(x[a], x[q])
                terms.append(max(0.0, d_ap + margin - d_an))
    return terms


class TestTripletBatchAll:
    def test_separated_classes_zero_loss(self, backend):
        x = np.array([[0.0, 0], [1, 0], [5, 0], [6, 0]])
        y = np.array([0, 0, 1, 1])
        out = triplet_batch_all(x, y, 1.0, backend=backend)
        assert len(brute_force_batch_all(x, y, 1.0)) == 8
        assert out.value == 0.0
        assert out.term_count == 8
        assert out.active_count == 0
        np.testing.assert_array_equal(out.gradients, 0.0)

    def test_two_triplet_mean(self, backend):
        x = np.array([[0.0, 0], [1, 0], [1.5, 0]])
        y = np.array([0, 0, 1])
        oracle = brute_force_batch_all(x, y, 1.0)
        assert sorted(oracle) == [0.5, 1.5]
        out = triplet_batch_all(x, y, 1.0, backend=backend)
        assert out.value == pytest.approx(1.0, abs=1e-12)
        assert out.term_count == 2 and out.active_count == 2

    def test_all_identical_points(self, backend):
        x = np.zeros((4, 3))
        y = np.array([0, 0, 1, 1])
        out = triplet_batch_all(x, y, 1.0, backend=backend)
        assert out.value == pytest.approx(1.0, abs=1e-15)

    def test_matches_oracle_on_random_batches(self, backend):
        rng = np.random.default_rng(0)
        for _ in range(5):
            x, y = clustered_data(rng, 3, 3, 4, spread=2.0)
            oracle = brute_force_batch_all(x, y, 1.0)
            out = triplet_batch_all(x, y, 1.0, backend=backend)
            assert out.value == pytest.approx(np.mean(oracle), rel=1e-12)
            assert out.term_count == len(oracle)

    def test_active_only_average(self, backend):
        x = np.array([[0.0, 0], [1, 0], [1.5, 0], [30, 0]])
        y = np.array([0, 0, 1, 1])
        oracle = brute_force_batch_all(x, y, 1.0)
        active = [t for t in oracle if t > 0]
        out = triplet_batch_all(x, y, 1.0, average_active_only=True,
                                backend=backend)
        assert out.value == pytest.approx(np.mean(active), rel=1e-12)

    def test_no_valid_triplet_raises(self, backend):
        with pytest.raises(EmptyTripletSetError):
            triplet_batch_all(np.zeros((3, 2)), np.array([0, 1, 2]), 1.0,
                              backend=backend)
        with pytest.raises(EmptyTripletSetError):
            triplet_batch_all(np.zeros((3, 2)), np.array([0, 0, 0]), 1.0,
                              backend=backend)

    def test_gradient_finite_difference(self, backend):
        rng = np.random.default_rng(1)
        x, y = clustered_data(rng, 3, 3, 4, spread=1.5)
        out = triplet_batch_all(x, y, 1.0, backend=backend)

        def scalar(flat):
            return triplet_batch_all(flat.reshape(x.shape), y, 1.0,
                                     backend=backend).value
        fd = central_difference(scalar, x.ravel())
        assert relative_error(out.gradients, fd) < 1e-6


class TestTripletBatchHard:
    def test_hand_enumeration(self, backend):
        # anchors (0,0) and (1,0) of class A against class B at (1.5,0)
        x = np.array([[0.0, 0], [1, 0], [1.5, 0], [9, 9]])
        y = np.array([0, 0, 1, 1])
        out = triplet_batch_hard(x, y, 1.0, backend=backend)
        # per-anchor: 0.5, 1.5, max(0,@), max(0,@) computed by hand
        d_b1_a2 = euclidean_distance(x[2], x[3])
        h3 = max(0.0, d_b1_a2 + 1.0 - 0.5)
        h4 = max(0.0, d_b1_a2 + 1.0 - euclidean_distance(x[3], x[1]))
        assert out.value == pytest.approx((0.5 + 1.5 + h3 + h4) / 4, rel=1e-12)

    def test_missing_positive_raises(self, backend):
        x = np.array([[0.0, 0], [1, 0], [1.5, 0]])
        y = np.array([0, 0, 1])  # class 1 is a singleton
        with pytest.raises(InvalidBatchError):
            triplet_batch_hard(x, y, 1.0, backend=backend)

    def test_one_sample_per_class_raises(self, backend):
        with pytest.raises(InvalidBatchError):
            triplet_batch_hard(np.zeros((3, 2)), np.array([0, 1, 2]), 1.0,
                               backend=backend)

    def test_hard_at_least_batch_all(self, backend):
        rng = np.random.default_rng(2)
        for _ in range(10):
            x, y = clustered_data(rng, 3, 4, 3, spread=1.0)
            hard = triplet_batch_hard(x, y, 1.0, backend=backend).value
            ball = triplet_batch_all(x, y, 1.0, backend=backend).value
            assert hard >= ball - 1e-12

    def test_gradient_finite_difference(self, backend):
        rng = np.random.default_rng(3)
        x, y = clustered_data(rng, 3, 3, 4, spread=1.5)
        out = triplet_batch_hard(x, y, 1.0, backend=backend)

        def scalar(flat):
            return triplet_batch_hard(flat.reshape(x.shape), y, 1.0,
                                      backend=backend).value
        fd = central_difference(scalar, x.ravel())
        assert relative_error(out.gradients, fd) < 1e-6


def singleton_stats(label, point, radius=0.0):
    return ClusterStats(label, np.asarray(point, dtype=np.float64),
                        radius, 1)


class TestFatLoss:
    def test_singleton_inactive_hinge(self, backend):
        a = np.array([0.0, 0.0])
        out = fat_loss(a, singleton_stats(0, a), [singleton_stats(1, (3.0, 0.0))],
                       1.0, backend=backend)
        assert out.value == 0.0
        assert out.active_count == 0

    def test_direct_evaluation(self, backend):
        # geometry: d(a,c_a)=1, d(a,c_n)=2, R(a)=0.5, R(n)=0.25
        a = np.array([0.0, 0.0])
        own = ClusterStats(0, np.array([1.0, 0.0]), 0.5, 3)
        neg = ClusterStats(1, np.array([2.0, 0.0]), 0.25, 3)
        out = fat_loss(a, own, [neg], 1.0, backend=backend)
        assert out.value == pytest.approx(0.75, abs=1e-12)
        out4 = fat_loss(a, own, [neg], 4.0, backend=backend)
        assert out4.value == pytest.approx(3.75, abs=1e-12)

    def test_mean_over_negatives(self, backend):
        rng = np.random.default_rng(4)
        a = rng.normal(size=3)
        own = ClusterStats(0, rng.normal(size=3), 0.3, 2)
        negs = [ClusterStats(i + 1, rng.normal(size=3), 0.1 * i, 2)
                for i in range(4)]
        out = fat_loss(a, own, negs, 1.0, backend=backend)
        d_own = euclidean_distance(a, own.centroid)
        per = [max(0.0, d_own + 1.0 - euclidean_distance(a, s.centroid))
               + own.radius + s.radius for s in negs]
        assert out.value == pytest.approx(np.mean(per), rel=1e-12)

    def test_no_negative_raises(self, backend):
        with pytest.raises(NoNegativeClusterError):
            fat_loss(np.zeros(2), singleton_stats(0, (0, 0)), [], 1.0,
                     backend=backend)

    def test_gradient_anchor_only_finite_difference(self, backend):
        rng = np.random.default_rng(5)
        a = rng.normal(size=4)
        own = ClusterStats(0, rng.normal(size=4), 0.4, 2)
        negs = [ClusterStats(1, a + rng.normal(size=4), 0.2, 2),
                ClusterStats(2, rng.normal(size=4), 0.1, 2)]

        def scalar(v):
            return fat_loss(v, own, negs, 2.0, backend=backend).value
        out = fat_loss(a, own, negs, 2.0, backend=backend)
        fd = central_difference(scalar, a)
        assert relative_error(out.gradients, fd) < 1e-6


class TestP2sLoss:
    def test_radii_removed(self, backend):
        a = np.array([0.0, 0.0])
        own = ClusterStats(0, np.array([1.0, 0.0]), 0.5, 3)
        neg = ClusterStats(1, np.array([2.0, 0.0]), 0.25, 3)
        assert p2s_loss(a, own, [neg], 1.0, backend=backend).value == 0.0

    def test_margin_exactly(self, backend):
        a = np.array([0.0, 0.0])
        own = ClusterStats(0, np.array([2.0, 0.0]), 0.0, 1)
        neg = ClusterStats(1, np.array([0.0, 2.0]), 0.0, 1)
        out = p2s_loss(a, own, [neg], 1.0, backend=backend)
        assert out.value == pytest.approx(1.0, abs=1e-12)

    def test_p2s_never_exceeds_fat(self, backend):
        rng = np.random.default_rng(6)
        for _ in range(20):
            a = rng.normal(size=3)
            own = ClusterStats(0, rng.normal(size=3), rng.uniform(0, 1), 2)
            negs = [ClusterStats(1, rng.normal(size=3), rng.uniform(0, 1), 2)]
            assert p2s_loss(a, own, negs, 1.0, backend=backend).value <= \
                fat_loss(a, own, negs, 1.0, backend=backend).value + 1e-15

    def test_fat_minus_p2s_is_radii(self, backend):
        rng = np.random.default_rng(7)
        for _ in range(10):
            a = rng.normal(size=4)
            own = ClusterStats(0, rng.normal(size=4), rng.uniform(0, 2), 3)
            negs = [ClusterStats(i + 1, rng.normal(size=4),
                                 rng.uniform(0, 2), 3) for i in range(3)]
            f = fat_loss(a, own, negs, 1.0, backend=backend).value
            p = p2s_loss(a, own, negs, 1.0, backend=backend).value
            radii = own.radius + np.mean([s.radius for s in negs])
            assert f - p == pytest.approx(radii, rel=1e-12)


class TestFatLossNormalized:
    def test_inactive_case(self, backend):
        out = fat_loss_normalized(
            np.array([2.0, 0.0]), singleton_stats(0, (1.0, 0.0)),
            [singleton_stats(1, (0.0, 1.0))], 0.1, backend=backend)
        assert out.value == 0.0

    def test_active_case(self, backend):
        out = fat_loss_normalized(
            np.array([2.0, 0.0]), singleton_stats(0, (0.0, 1.0)),
            [singleton_stats(1, (1.0, 0.0))], 0.1, backend=backend)
        assert out.value == pytest.approx(math.sqrt(2) + 0.1, abs=1e-12)

    def test_scale_invariance(self, backend):
        rng = np.random.default_rng(8)
        a = rng.normal(size=3)
        own = ClusterStats(0, rng.normal(size=3), 0.2, 2)
        negs = [ClusterStats(1, rng.normal(size=3), 0.3, 2)]
        base = fat_loss_normalized(a, own, negs, 0.1, backend=backend).value
        for scale in (0.01, 7.0, 3000.0):
            v = fat_loss_normalized(scale * a, own, negs, 0.1,
                                    backend=backend).value
            assert v == pytest.approx(base, rel=1e-9)

    def test_degenerate_anchor_raises(self, backend):
        with pytest.raises(DegenerateVectorError):
            fat_loss_normalized(np.zeros(3), singleton_stats(0, (1, 0, 0)),
                                [singleton_stats(1, (0, 1, 0))], 0.1,
                                backend=backend)

    def test_gradient_includes_jacobian(self, backend):
        rng = np.random.default_rng(9)
        a = rng.normal(size=4) + 0.5
        own = ClusterStats(0, rng.normal(size=4), 0.1, 2)
        negs = [ClusterStats(1, rng.normal(size=4), 0.2, 2)]

        def scalar(v):
            return fat_loss_normalized(v, own, negs, 0.5,
                                       backend=backend).value
        out = fat_loss_normalized(a, own, negs, 0.5, backend=backend)
        fd = central_difference(scalar, a)
        assert relative_error(out.gradients, fd) < 1e-6


class TestCrossEntropy:
    def test_confident_correct_goes_to_zero(self):
        logits = np.array([30.0, 0.0, 0.0])
        assert cross_entropy(logits, 0).value < 1e-12

    def test_uniform_logits_hard_target(self):
        out = cross_entropy(np.zeros(4), 2)
        assert out.value == pytest.approx(math.log(4), abs=1e-12)

    def test_soft_target_at_softmax_zero_gradient(self):
        from fatlab.core import softmax
        logits = np.array([0.3, -1.2, 2.0])
        out = cross_entropy(logits, softmax(logits))
        np.testing.assert_allclose(out.gradients, 0.0, atol=1e-15)

    def test_gradient_formula(self):
        from fatlab.core import softmax
        rng = np.random.default_rng(10)
        logits = rng.normal(size=5)
        t = rng.dirichlet(np.ones(5))
        out = cross_entropy(logits, t)
        np.testing.assert_allclose(out.gradients, softmax(logits) - t,
                                   atol=1e-12)

    def test_batched_mean(self):
        rng = np.random.default_rng(11)
        logits = rng.normal(size=(4, 3))
        targets = np.array([0, 2, 1, 1])
        vals = [cross_entropy(logits[i], int(targets[i])).value
                for i in range(4)]
        out = cross_entropy(logits, targets)
        assert out.value == pytest.approx(np.mean(vals), rel=1e-12)

    def test_invalid_target(self):
        with pytest.raises(ValueError):
            cross_entropy(np.zeros(3), 5)
        with pytest.raises(ValueError):
            cross_entropy(np.zeros(3), np.array([0.5, 0.2, 0.1]))


class TestHybridLoss:
    def test_zero_weight_is_first_component(self, backend):
        a = np.array([0.0, 0.0])
        own = ClusterStats(0, np.array([1.0, 0.0]), 0.5, 3)
        neg = ClusterStats(1, np.array([2.0, 0.0]), 0.25, 3)
        f = fat_loss(a, own, [neg], 1.0, backend=backend)
        c = cross_entropy(np.zeros(4), 0)
        c.gradients = np.zeros(2)  # pretend it was mapped to embedding space
        h = hybrid_loss(f, c, 0.0)
        assert h.value == f.value
        np.testing.assert_array_equal(h.gradients, f.gradients)

    def test_weighted_sum(self):
        from fatlab.losses import LossOutput
        a = LossOutput(0.75, np.array([1.0, 2.0]), 1, 1)
        b = LossOutput(math.log(4), np.array([0.5, -0.5]), 0, 1)
        h = hybrid_loss(a, b, 1.0)
        assert h.value == pytest.approx(0.75 + math.log(4), abs=1e-12)
        np.testing.assert_allclose(h.gradients, [1.5, 1.5])

    def test_gradient_additivity(self):
        from fatlab.losses import LossOutput
        rng = np.random.default_rng(12)
        g1, g2 = rng.normal(size=(2, 6))
        lam = 2.5
        h = hybrid_loss(LossOutput(1.0, g1, 0, 0), LossOutput(2.0, g2, 0, 0),
                        lam)
        np.testing.assert_allclose(h.gradients, g1 + lam * g2, atol=1e-12)


class TestUpperBoundProperty:
    def test_fat_dominates_triplet(self, backend):
        # the anchor-negative point-to-set term with max radii bounds every
        # matching triplet term from above
        rng = np.random.default_rng(13)
        for _ in range(200):
            p_cl = int(rng.integers(2, 6))
            k = int(rng.integers(1, 6))
            x, y = clustered_data(rng, p_cl, k, 4, spread=3.0)
            m = float(rng.choice([0.1, 1.0, 4.0]))
            stats = compute_centroids(x, y, "C1")
            for a_idx in range(len(y)):
                own = stats[int(y[a_idx])]
                for neg_lab, neg in stats.items():
                    if neg_lab == y[a_idx]:
                        continue
                    bound = fat_loss(x[a_idx], own, [neg], m,
                                     backend=backend).value
                    for p_idx in np.flatnonzero(y == y[a_idx]):
                        if p_idx == a_idx:
                            continue
                        for n_idx in np.flatnonzero(y == neg_lab):
                            t = max(0.0, euclidean_distance(x[a_idx], x[p_idx])
                                    + m - euclidean_distance(x[a_idx], x[n_idx]))
                            assert bound >= t - 1e-9

    def test_tightness_singleton_clusters(self, backend):
        # size-1 clusters: both sides reduce to max(0, m - d(a, n)) exactly
        rng = np.random.default_rng(14)
        for _ in range(100):
            a = rng.normal(size=3)
            n = rng.normal(size=3)
            m = float(rng.choice([0.1, 1.0, 4.0]))
            fat = fat_loss(a, singleton_stats(0, a), [singleton_stats(1, n)],
                           m, backend=backend).value
            triplet = max(0.0, 0.0 + m - euclidean_distance(a, n))
            assert abs(fat - triplet) < 1e-12


class TestBackendEquivalence:
    def test_all_losses_agree_across_backends(self):
        from fatlab.backend import available_backends
        if len(available_backends()) < 2:
            pytest.skip("compiled backend unavailable")
        rng = np.random.default_rng(15)
        x, y = clustered_data(rng, 3, 4, 5, spread=1.0)
        for fn in (triplet_batch_all, triplet_batch_hard):
            a = fn(x, y, 1.0, backend="python")
            b = fn(x, y, 1.0, backend="compiled")
            assert a.value == pytest.approx(b.value, rel=1e-12)
            np.testing.assert_allclose(a.gradients, b.gradients, atol=1e-12)
            assert a.active_count == b.active_count
            assert a.term_count == b.term_count
        stats = compute_centroids(x, y, "C1")
        own = stats[0]
        negs = [stats[1], stats[2]]
        a = fat_loss(x[0], own, negs, 1.0, backend="python")
        b = fat_loss(x[0], own, negs, 1.0, backend="compiled")
        assert a.value == pytest.approx(b.value, rel=1e-12)
        np.testing.assert_allclose(a.gradients, b.gradients, atol=1e-12)


class TestLossConfig:
    def test_defaults(self):
        raw = LossConfig()
        assert raw.margin == 1.0 and raw.centroid_option == "C1"
        norm = LossConfig(normalized=True)
        assert norm.margin == 0.1 and norm.centroid_option == "C4"

    def test_normalized_rejects_c1(self):
        from fatlab.errors import ConfigError
        with pytest.raises(ConfigError):
            LossConfig(normalized=True, centroid_option="C1")
        with pytest.raises(ConfigError):
            LossConfig(normalized=False, centroid_option="C2")

    def test_invalid_margin(self):
        from fatlab.errors import ConfigError
        with pytest.raises(ConfigError):
            LossConfig(margin=0.0)


def test_point_to_set_batch_matches_per_anchor(backend):
    rng = np.random.default_rng(16)
    x, y = clustered_data(rng, 4, 3, 5, spread=2.0)
    stats = compute_centroids(x, y, "C1")
    anchors = x[:6]
    own_cent = np.stack([stats[int(y[i])].centroid for i in range(6)])
    own_rad = np.array([stats[int(y[i])].radius for i in range(6)])
    neg_cent, neg_rad, starts = [], [], [0]
    per_anchor_expect = []
    for i in range(6):
        negs = [stats[l] for l in sorted(stats) if l != y[i]]
        neg_cent.extend(s.centroid for s in negs)
        neg_rad.extend(s.radius for s in negs)
        starts.append(starts[-1] + len(negs))
        per_anchor_expect.append(
            fat_loss(x[i], stats[int(y[i])], negs, 1.0, backend=backend).value)
    out = point_to_set_batch(anchors, own_cent, own_rad,
                             np.stack(neg_cent), np.array(neg_rad),
                             np.array(starts), 1.0, backend=backend)
    assert out.value == pytest.approx(np.mean(per_anchor_expect), rel=1e-12)
