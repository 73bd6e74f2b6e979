"""DBSCAN consensus: collinearity metric, expansion semantics, oriented
averages, and contamination robustness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scatter_superres import cluster as cl
from scatter_superres.sparsedict import Dictionary, UnderRecoveryError


def _unit(v):
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def _random_pool(rng, dim, count, tags=None):
    V = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    V /= np.linalg.norm(V, axis=0)
    if tags is None:
        tags = np.zeros(count, dtype=int)
    return cl.ColumnPool(V, tags)


def _noisy_copies(rng, base, count, noise, flips=True):
    """Unit columns near `base` up to per-copy noise and random phase."""
    cols = []
    for _ in range(count):
        v = base + noise * (rng.standard_normal(len(base))
                            + 1j * rng.standard_normal(len(base)))
        if flips:
            v = v * np.exp(1j * rng.uniform(0, 2 * np.pi))
        cols.append(_unit(v))
    return np.column_stack(cols)


class TestCollinearityDistance:
    def test_zero_iff_collinear_up_to_phase(self):
        z = _unit([1.0, 1j, -2.0])
        assert cl.collinearity_distance(z, z) == 0.0
        assert cl.collinearity_distance(z, z * np.exp(0.7j)) == pytest.approx(0.0, abs=1e-15)

    def test_orthogonal_vectors_at_distance_one(self):
        assert cl.collinearity_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            cl.collinearity_distance([2.0, 0.0], [1.0, 0.0])

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_symmetry_and_range(self, seed):
        rng = np.random.default_rng(seed)
        z = _unit(rng.standard_normal(6) + 1j * rng.standard_normal(6))
        w = _unit(rng.standard_normal(6) + 1j * rng.standard_normal(6))
        d = cl.collinearity_distance(z, w)
        assert 0.0 <= d <= 1.0
        assert d == pytest.approx(cl.collinearity_distance(w, z), abs=1e-15)


class TestPool:
    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            cl.ColumnPool(np.ones((3, 2), dtype=complex), [0, 0])

    def test_from_dictionaries_tags_and_normalizes(self):
        rng = np.random.default_rng(0)
        d1 = Dictionary(rng.standard_normal((4, 3)) + 0j)
        d2 = Dictionary(rng.standard_normal((4, 2)) + 0j)
        pool = cl.ColumnPool.from_dictionaries([d1, d2])
        assert pool.n_columns == 5
        np.testing.assert_array_equal(pool.source_tag, [0, 0, 0, 1, 1])
        np.testing.assert_allclose(np.linalg.norm(pool.vectors, axis=0), 1.0)


class TestDbscan:
    def test_identical_vectors_one_cluster_no_noise(self):
        v = _unit(np.arange(1, 5) + 1j)
        pool = cl.ColumnPool(np.tile(v[:, None], (1, 8)), np.zeros(8, int))
        res = cl.dbscan(pool, eps=0.01, c_min=5)
        assert res.cluster_count == 1
        assert res.n_noise == 0
        assert np.all(res.labels == 0)
        assert np.all(res.core_flags)

    def test_c_min_larger_than_pool_gives_all_noise(self):
        rng = np.random.default_rng(1)
        pool = _random_pool(rng, 6, 4)
        res = cl.dbscan(pool, eps=0.5, c_min=10)
        assert res.cluster_count == 0
        assert res.n_noise == 4

    def test_two_separated_clusters(self):
        rng = np.random.default_rng(2)
        a = _unit(rng.standard_normal(20) + 1j * rng.standard_normal(20))
        b = _unit(rng.standard_normal(20) + 1j * rng.standard_normal(20))
        V = np.concatenate([_noisy_copies(rng, a, 6, 1e-3),
                            _noisy_copies(rng, b, 6, 1e-3)], axis=1)
        pool = cl.ColumnPool(V, np.zeros(12, int))
        res = cl.dbscan(pool, eps=0.01, c_min=5)
        assert res.cluster_count == 2
        assert res.n_noise == 0
        assert len(set(res.labels[:6])) == 1
        assert len(set(res.labels[6:])) == 1
        assert res.labels[0] != res.labels[6]

    def test_phase_flips_do_not_split_clusters(self):
        rng = np.random.default_rng(3)
        a = _unit(rng.standard_normal(16) + 1j * rng.standard_normal(16))
        V = _noisy_copies(rng, a, 10, 1e-3, flips=True)
        pool = cl.ColumnPool(V, np.zeros(10, int))
        res = cl.dbscan(pool, eps=0.01, c_min=5)
        assert res.cluster_count == 1 and res.n_noise == 0

    def test_deterministic_labels(self):
        rng = np.random.default_rng(4)
        pool = _random_pool(rng, 8, 30)
        r1 = cl.dbscan(pool, eps=0.4, c_min=3)
        r2 = cl.dbscan(pool, eps=0.4, c_min=3)
        np.testing.assert_array_equal(r1.labels, r2.labels)

    def test_noise_monotone_in_eps(self):
        rng = np.random.default_rng(5)
        pool = _random_pool(rng, 8, 40)
        noise = [cl.dbscan(pool, eps, c_min=3).n_noise
                 for eps in (0.05, 0.1, 0.2, 0.4, 0.8)]
        assert all(b <= a for a, b in zip(noise, noise[1:]))

    def test_invalid_parameters(self):
        rng = np.random.default_rng(6)
        pool = _random_pool(rng, 4, 4)
        with pytest.raises(ValueError):
            cl.dbscan(pool, eps=0.0, c_min=3)
        with pytest.raises(ValueError):
            cl.dbscan(pool, eps=0.1, c_min=0)


class TestOrientedAverage:
    def test_recovers_direction_from_flipped_noisy_copies(self):
        rng = np.random.default_rng(7)
        g = _unit(rng.standard_normal(30) + 1j * rng.standard_normal(30))
        V = _noisy_copies(rng, g, 20, 1e-3, flips=True)
        pool = cl.ColumnPool(V, np.zeros(20, int))
        avg = cl.oriented_average(pool, np.arange(20))
        assert abs(np.vdot(avg, g)) >= 0.9999

    def test_exact_copies_average_to_member(self):
        v = _unit([1.0, 2.0, 3.0 + 1j])
        V = np.column_stack([v, v * np.exp(1.1j), v * np.exp(-2.0j)])
        pool = cl.ColumnPool(V, np.zeros(3, int))
        avg = cl.oriented_average(pool, [0, 1, 2])
        assert abs(np.vdot(avg, v)) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_member_dropped_with_warning(self):
        V = np.column_stack([_unit([1.0, 0.0]), _unit([0.0, 1.0]),
                             _unit([1.0, 1e-6])])
        pool = cl.ColumnPool(V.astype(complex), np.zeros(3, int))
        with pytest.warns(RuntimeWarning):
            avg = cl.oriented_average(pool, [0, 1, 2])
        assert abs(np.vdot(avg, _unit([1.0, 0.0]))) > 0.999

    def test_empty_cluster_rejected(self):
        rng = np.random.default_rng(8)
        pool = _random_pool(rng, 4, 4)
        with pytest.raises(ValueError):
            cl.oriented_average(pool, [])


class TestConsensus:
    def _pool_of_copies(self, rng, truth, copies, noise, junk=0):
        cols, tags = [], []
        for rep in range(copies):
            for k in range(truth.shape[1]):
                v = truth[:, k] + noise * (
                    rng.standard_normal(truth.shape[0])
                    + 1j * rng.standard_normal(truth.shape[0]))
                cols.append(_unit(v * np.exp(1j * rng.uniform(0, 2 * np.pi))))
                tags.append(rep)
        for _ in range(junk):
            cols.append(_unit(rng.standard_normal(truth.shape[0])
                              + 1j * rng.standard_normal(truth.shape[0])))
            tags.append(copies)
        return cl.ColumnPool(np.column_stack(cols), tags)

    def test_consensus_recovers_truth(self):
        rng = np.random.default_rng(9)
        truth = rng.standard_normal((40, 12)) + 1j * rng.standard_normal((40, 12))
        truth /= np.linalg.norm(truth, axis=0)
        pool = self._pool_of_copies(rng, truth, copies=8, noise=1e-3)
        cons, sizes = cl.consensus_dictionary(pool, eps=0.0075, c_min=5,
                                              K_target=12)
        assert cons.n_atoms == 12
        assert np.all(sizes == 8)
        best = np.abs(cons.columns.conj().T @ truth).max(axis=0)
        assert best.min() > 0.999

    def test_junk_lands_in_noise_and_clusters_survive(self):
        rng = np.random.default_rng(10)
        truth = rng.standard_normal((40, 12)) + 1j * rng.standard_normal((40, 12))
        truth /= np.linalg.norm(truth, axis=0)
        clean = self._pool_of_copies(rng, truth, copies=8, noise=1e-3)
        dirty = self._pool_of_copies(np.random.default_rng(10), truth,
                                     copies=8, noise=1e-3, junk=5)
        res = cl.dbscan(dirty, eps=0.0075, c_min=5)
        assert res.cluster_count == 12
        assert res.n_noise >= 5         # the junk columns
        c_clean, _ = cl.consensus_dictionary(clean, K_target=12)
        c_dirty, _ = cl.consensus_dictionary(dirty, K_target=12)
        match = np.abs(c_dirty.columns.conj().T @ c_clean.columns).max(axis=0)
        assert match.min() > 0.9999

    def test_under_recovery_raises(self):
        rng = np.random.default_rng(11)
        pool = _random_pool(rng, 8, 10)
        with pytest.raises(UnderRecoveryError):
            cl.consensus_dictionary(pool, eps=0.0075, c_min=5, K_target=4)

    def test_sweep_plateau_on_clean_pool(self):
        rng = np.random.default_rng(12)
        truth = rng.standard_normal((40, 9)) + 1j * rng.standard_normal((40, 9))
        truth /= np.linalg.norm(truth, axis=0)
        pool = self._pool_of_copies(rng, truth, copies=6, noise=1e-3)
        counts = cl.cluster_count_sweep(pool, np.linspace(0.005, 0.01, 6),
                                        c_min=5)
        assert np.all(counts == 9)
