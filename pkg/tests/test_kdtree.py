import numpy as np
import pytest

from fcreg.errors import DegenerateInputError
from fcreg.kdtree import KdTree3


def brute_force_knn(points, query, k):
    """Exhaustive-scan oracle: ascending squared distance, ties by lower index."""
    diff = points - query
    d2 = (diff * diff).sum(axis=1)
    order = np.lexsort((np.arange(len(points)), d2))[:k]
    return order, d2[order]


class TestBuild:
    def test_single_point(self):
        tree = KdTree3([[1.0, 2.0, 3.0]])
        idx, d2 = tree.knn([1.0, 2.0, 3.0], 1)
        assert idx.tolist() == [0]
        assert d2.tolist() == [0.0]

    def test_empty_cloud_rejected(self):
        with pytest.raises(DegenerateInputError):
            KdTree3(np.empty((0, 3)))

    def test_duplicates_both_returned(self):
        pts = np.array([[0.0, 0, 0], [1, 1, 1], [0, 0, 0]])
        idx, d2 = KdTree3(pts).knn([0.0, 0, 0], 2)
        assert idx.tolist() == [0, 2]
        assert d2.tolist() == [0.0, 0.0]


class TestKnn:
    def test_k_equals_n_sorted(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-1, 1, (50, 3))
        tree = KdTree3(pts)
        q = rng.uniform(-1, 1, 3)
        idx, d2 = tree.knn(q, 50)
        assert (np.diff(d2) >= 0).all()
        assert sorted(idx.tolist()) == list(range(50))

    def test_query_on_indexed_point(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(-1, 1, (100, 3))
        tree = KdTree3(pts)
        idx, d2 = tree.knn(pts[42], 3)
        assert idx[0] == 42
        assert d2[0] == 0.0

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-1, 1, (1000, 3))
        tree = KdTree3(pts)
        for _ in range(100):
            q = rng.uniform(-1.2, 1.2, 3)
            k = int(rng.integers(1, 1000))
            idx, d2 = tree.knn(q, k)
            ref_idx, ref_d2 = brute_force_knn(pts, q, k)
            assert np.array_equal(idx, ref_idx)
            assert np.array_equal(d2, ref_d2)

    def test_tie_order_on_lattice(self):
        # Queries at lattice cell centers produce 8-way exact ties.
        g = np.arange(4, dtype=float)
        pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
        tree = KdTree3(pts)
        rng = np.random.default_rng(3)
        for _ in range(30):
            cell = rng.integers(0, 3, 3)
            q = cell + 0.5
            for k in (1, 4, 8, 11):
                idx, d2 = tree.knn(q, k)
                ref_idx, ref_d2 = brute_force_knn(pts, q, k)
                assert np.array_equal(idx, ref_idx)
                assert np.array_equal(d2, ref_d2)

    def test_batch_queries_match_single(self):
        rng = np.random.default_rng(4)
        pts = rng.uniform(0, 1, (200, 3))
        tree = KdTree3(pts)
        queries = rng.uniform(0, 1, (20, 3))
        bidx, bd2 = tree.knn(queries, 5)
        for row, q in enumerate(queries):
            idx, d2 = tree.knn(q, 5)
            assert np.array_equal(bidx[row], idx)
            assert np.array_equal(bd2[row], d2)

    def test_k_out_of_range(self):
        tree = KdTree3(np.zeros((5, 3)) + np.arange(5)[:, None])
        with pytest.raises(ValueError):
            tree.knn([0.0, 0, 0], 6)
        with pytest.raises(ValueError):
            tree.knn([0.0, 0, 0], 0)

    def test_build_deterministic(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-1, 1, (300, 3))
        a, b = KdTree3(pts), KdTree3(pts)
        q = rng.uniform(-1, 1, (10, 3))
        ia, da = a.knn(q, 7)
        ib, db = b.knn(q, 7)
        assert np.array_equal(ia, ib)
        assert np.array_equal(da, db)
