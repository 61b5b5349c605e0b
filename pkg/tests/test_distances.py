import math

import numpy as np
import pytest

from simkit.distances import (
    CorpusStats,
    SparseTermVector,
    asym_set_distance,
    dtw,
    dtw_batch,
    fisher_distance_discrete,
    fisher_distance_gaussian1d,
    js_divergence,
    kl_divergence,
    minkowski,
    sparse_js_divergence,
    sparse_minkowski,
    weight_terms,
)

from oracles import brute_force_dtw

LN2 = math.log(2.0)


def random_distribution(rng, n):
    p = rng.random(n) + 1e-3
    return p / p.sum()


class TestMinkowski:
    def test_identical_is_zero(self):
        assert minkowski([1.0, 2.0], [1.0, 2.0], 2) == 0.0

    def test_l2_345(self):
        assert minkowski([0.0, 0.0], [3.0, 4.0], 2) == 5.0

    def test_l1(self):
        assert minkowski([1.0, 1.0], [2.0, 3.0], 1) == 3.0

    def test_symmetry(self):
        a, b = [1.0, -2.0, 0.5], [0.0, 4.0, 2.5]
        for p in (1, 2):
            assert minkowski(a, b, p) == minkowski(b, a, p)

    def test_errors(self):
        with pytest.raises(ValueError):
            minkowski([1.0], [1.0, 2.0], 2)
        with pytest.raises(ValueError):
            minkowski([1.0], [1.0], 3)


class TestDivergences:
    def test_equal_is_zero(self):
        p = [0.25, 0.25, 0.5]
        assert kl_divergence(p, p) == 0.0
        assert js_divergence(p, p) == 0.0

    def test_kl_absolute_continuity(self):
        with pytest.raises(ValueError):
            kl_divergence([1.0, 0.0], [0.0, 1.0])

    def test_js_disjoint_is_ln2(self):
        assert js_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(LN2, abs=1e-14)

    def test_js_hand_value(self):
        assert js_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(
            0.10174922507919676, abs=1e-14
        )

    def test_js_symmetric_and_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            p = random_distribution(rng, 6)
            q = random_distribution(rng, 6)
            d = js_divergence(p, q)
            assert d == pytest.approx(js_divergence(q, p), abs=1e-14)
            assert 0.0 <= d <= LN2 + 1e-12

    def test_invalid_distribution(self):
        with pytest.raises(ValueError):
            js_divergence([0.5, 0.6], [0.5, 0.5])
        with pytest.raises(ValueError):
            kl_divergence([-0.1, 1.1], [0.5, 0.5])
        with pytest.raises(ValueError):
            js_divergence([0.5, 0.5], [0.3, 0.3, 0.4])


class TestFisherDistances:
    def test_discrete_identical(self):
        assert fisher_distance_discrete([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-7)

    def test_discrete_disjoint_is_pi(self):
        assert fisher_distance_discrete([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.pi)

    def test_discrete_hand_value(self):
        expected = 2 * math.acos(math.sqrt(0.125) + math.sqrt(0.375))
        assert fisher_distance_discrete([0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected)

    def test_discrete_triangle_inequality(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p, q, r = (random_distribution(rng, 5) for _ in range(3))
            dpq = fisher_distance_discrete(p, q)
            dqr = fisher_distance_discrete(q, r)
            dpr = fisher_distance_discrete(p, r)
            assert dpr <= dpq + dqr + 1e-10

    def test_gaussian_identical(self):
        assert fisher_distance_gaussian1d((1.5, 2.0), (1.5, 2.0)) == 0.0

    def test_gaussian_symmetric(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = (rng.normal(), rng.random() + 0.1)
            q = (rng.normal(), rng.random() + 0.1)
            assert fisher_distance_gaussian1d(p, q) == pytest.approx(
                fisher_distance_gaussian1d(q, p), abs=1e-12
            )

    def test_gaussian_hand_value(self):
        expected = math.sqrt(2.0) * math.acosh(1.25)
        assert fisher_distance_gaussian1d((0.0, 1.0), (0.0, 2.0)) == pytest.approx(expected)

    def test_gaussian_sigma_validation(self):
        with pytest.raises(ValueError):
            fisher_distance_gaussian1d((0.0, 0.0), (0.0, 1.0))


class TestDtw:
    def test_single_point_base_case(self):
        assert dtw([1.0], [4.0]) == 3.0

    def test_identical_series(self):
        x = [0.0, 1.0, 0.5, 2.0]
        assert dtw(x, x) == 0.0

    def test_matches_brute_force_small(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            n, m = rng.integers(1, 7, size=2)
            x = rng.normal(size=n)
            y = rng.normal(size=m)
            assert dtw(x, y) == pytest.approx(brute_force_dtw(x, y), abs=1e-12)

    def test_not_above_l2_for_equal_lengths(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            x = rng.normal(size=n)
            y = rng.normal(size=n)
            assert dtw(x, y) <= minkowski(x, y, 2) + 1e-12

    def test_empty_error(self):
        with pytest.raises(ValueError):
            dtw([], [1.0])

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(5)
        queries = [rng.normal(size=int(rng.integers(1, 9))) for _ in range(6)]
        refs = [rng.normal(size=int(rng.integers(1, 9))) for _ in range(4)]
        D = dtw_batch(queries, refs)
        for i, q in enumerate(queries):
            for j, r in enumerate(refs):
                assert D[i, j] == dtw(q, r)


class TestAsymSetDistance:
    def test_subset_is_zero(self):
        X = [np.array([0.0, 1.0]), np.array([2.0, 2.0]), np.array([5.0, 0.0])]
        assert asym_set_distance(X[:2], X) == 0.0

    def test_min_over_candidates(self):
        assert asym_set_distance([[0.0]], [[1.0], [5.0]], base=lambda a, b: minkowski(a, b, 1)) == 1.0

    def test_average_of_mins(self):
        d = asym_set_distance([[0.0], [4.0]], [[1.0], [7.0]], base=lambda a, b: minkowski(a, b, 1))
        assert d == 2.0  # mins are 1 and 3

    def test_asymmetric(self):
        Q = [[0.0]]
        X = [[0.0], [10.0]]
        assert asym_set_distance(Q, X) == 0.0
        assert asym_set_distance(X, Q) == 5.0

    def test_weights_scale_coordinates(self):
        Q = [[1.0, 100.0]]
        X = [[0.0, 0.0]]
        assert asym_set_distance(Q, X, base=lambda a, b: minkowski(a, b, 1), weights=[1.0, 0.0]) == 1.0

    def test_empty_error(self):
        with pytest.raises(ValueError):
            asym_set_distance([], [[1.0]])
        with pytest.raises(ValueError):
            asym_set_distance([[1.0]], [])


class TestTermWeighting:
    def setup_method(self):
        self.stats = CorpusStats(1000, {1: 10, 2: 600, 3: 5}, mean_length=20.0)

    def test_tf_passthrough(self):
        doc = SparseTermVector((1, 3), (3.0, 1.0), 20.0)
        out = weight_terms(doc, self.stats, "tf")
        assert out.frequencies == (3.0, 1.0)

    def test_tfidf_formula(self):
        doc = SparseTermVector((1,), (3.0,), 20.0)
        out = weight_terms(doc, self.stats, "tfidf")
        assert out.frequencies[0] == pytest.approx(math.log(990.5 / 10.5) * 3.0)

    def test_bm25_hand_value(self):
        # H=1000, h=10, f=3, l = mean length, k=1.2, b=0.75
        doc = SparseTermVector((1,), (3.0,), 20.0)
        out = weight_terms(doc, self.stats, "bm25", k=1.2, b=0.75)
        assert out.frequencies[0] == pytest.approx(
            math.log(990.5 / 10.5) * (3.0 * 2.2) / (3.0 + 1.2), abs=1e-12
        )

    def test_b_zero_removes_length_dependence(self):
        short = SparseTermVector((1,), (3.0,), 10.0)
        long = SparseTermVector((1,), (3.0,), 40.0)
        w_short = weight_terms(short, self.stats, "bm25", b=0.0).frequencies[0]
        w_long = weight_terms(long, self.stats, "bm25", b=0.0).frequencies[0]
        assert w_short == w_long

    def test_negative_idf_passthrough(self):
        doc = SparseTermVector((2,), (1.0,), 20.0)  # h=600 > H/2
        out = weight_terms(doc, self.stats, "bm25")
        assert out.frequencies[0] < 0

    def test_unknown_term_error(self):
        doc = SparseTermVector((99,), (1.0,), 20.0)
        with pytest.raises(KeyError):
            weight_terms(doc, self.stats, "bm25")

    def test_parameter_validation(self):
        doc = SparseTermVector((1,), (1.0,), 20.0)
        with pytest.raises(ValueError):
            weight_terms(doc, self.stats, "bm25", k=0.0)
        with pytest.raises(ValueError):
            weight_terms(doc, self.stats, "bm25", b=1.5)
        with pytest.raises(ValueError):
            weight_terms(doc, self.stats, "okapi2")

    def test_sparse_minkowski_matches_dense(self):
        a = SparseTermVector((1, 3, 5), (2.0, 1.0, 4.0), 7.0)
        b = SparseTermVector((1, 4), (1.0, 2.0), 3.0)
        dense_a = np.array([2.0, 1.0, 0.0, 4.0])  # support {1,3,4,5}
        dense_b = np.array([1.0, 0.0, 2.0, 0.0])
        assert sparse_minkowski(a, b, 1) == minkowski(dense_a, dense_b, 1)
        assert sparse_minkowski(a, b, 2) == pytest.approx(minkowski(dense_a, dense_b, 2))
        assert sparse_minkowski(a, a, 2) == 0.0

    def test_sparse_js_matches_dense(self):
        a = SparseTermVector((1, 2), (3.0, 1.0), 4.0)
        b = SparseTermVector((2, 3), (1.0, 1.0), 2.0)
        want = js_divergence([0.75, 0.25, 0.0], [0.0, 0.5, 0.5])
        assert sparse_js_divergence(a, b) == pytest.approx(want, abs=1e-14)
        assert sparse_js_divergence(a, a) == pytest.approx(0.0, abs=1e-14)
        with pytest.raises(ValueError):
            sparse_js_divergence(SparseTermVector((1,), (-1.0,), 2.0), a)

    def test_term_vector_invariants(self):
        with pytest.raises(ValueError):
            SparseTermVector((3, 1), (1.0, 1.0), 2.0)  # unsorted
        with pytest.raises(ValueError):
            SparseTermVector((1, 1), (1.0, 1.0), 2.0)  # duplicate
        with pytest.raises(ValueError):
            SparseTermVector((1,), (1.0,), 0.0)  # non-positive length
        with pytest.raises(ValueError):
            weight_terms(SparseTermVector((1,), (0.0,), 2.0), self.stats, "tf")
