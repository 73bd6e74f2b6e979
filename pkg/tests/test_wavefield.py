"""Forward-model oracles: homogeneous kernel, Foldy-Lax closed forms for
J in {0, 1, 2}, sensing-matrix stacking, and data generation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scatter_superres import wavefield as wf


def _g0(r, z, k):
    d = np.linalg.norm(np.asarray(r, float) - np.asarray(z, float))
    return np.exp(1j * k * d) / (4.0 * np.pi * d)


class TestGreen0:
    def test_closed_form(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            r, z = rng.normal(size=3), rng.normal(size=3) + 5.0
            k = rng.uniform(1.0, 200.0)
            assert wf.green0(r, z, k) == pytest.approx(_g0(r, z, k), rel=1e-14)

    def test_singular_at_coincident_points(self):
        with pytest.raises(ValueError):
            wf.green0([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 10.0)

    def test_negative_wavenumber_rejected(self):
        with pytest.raises(ValueError):
            wf.green0([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], -1.0)

    def test_broadcasts(self):
        r = np.zeros((4, 1, 3))
        z = np.array([[1.0, 0, 0], [2.0, 0, 0]])[None, :, :] + np.zeros((4, 1, 3))
        out = wf.green0(r, z, 3.0)
        assert out.shape == (4, 2)

    @given(st.floats(0.1, 50.0), st.floats(0.5, 100.0))
    @settings(max_examples=50, deadline=None)
    def test_modulus_is_inverse_distance(self, k, d):
        val = wf.green0([0.0, 0.0, 0.0], [d, 0.0, 0.0], k)
        assert abs(val) == pytest.approx(1.0 / (4.0 * np.pi * d), rel=1e-12)

    def test_symmetric_in_arguments(self):
        r, z, k = [0.3, -1.0, 2.0], [4.0, 0.5, -2.0], 17.0
        assert wf.green0(r, z, k) == wf.green0(z, r, k)


class TestFoldyLaxClosedForms:
    def test_no_scatterers_reduces_to_homogeneous(self):
        medium = wf.Medium(np.zeros((0, 3)), np.zeros(0), 3e8)
        r, z, k = [1.0, 2.0, 0.0], [0.0, 0.0, 10.0], 50.0
        assert wf.total_field(medium, r, z, k) == _g0(r, z, k)

    def test_single_scatterer_exciting_field(self):
        # J = 1: no self-interaction, so the exciting field is the
        # incident field at the scatterer.
        pos = np.array([[0.5, -0.2, 7.0]])
        medium = wf.Medium(pos, np.array([0.8 + 0.1j]), 3e8)
        src = np.array([0.0, 0.0, 0.0])
        k = 104.7
        psi = wf.solve_exciting_fields(medium, src, k)
        expected = _g0(pos[0], src, k)
        assert psi.shape == (1,)
        assert psi[0] == pytest.approx(expected, rel=1e-12)

    def test_single_scatterer_total_field(self):
        pos = np.array([[0.5, -0.2, 7.0]])
        tau = 0.8 + 0.1j
        medium = wf.Medium(pos, np.array([tau]), 3e8)
        src, r, k = np.array([0.0, 0.0, 0.0]), np.array([1.0, 1.0, 14.0]), 104.7
        expected = _g0(r, src, k) + _g0(r, pos[0], k) * tau * _g0(pos[0], src, k)
        assert wf.total_field(medium, r, src, k) == pytest.approx(expected, rel=1e-12)

    def test_two_scatterers_exciting_fields(self):
        # J = 2: solve the 2x2 self-consistent system by hand.
        pos = np.array([[0.0, 0.0, 6.0], [1.0, 0.5, 8.0]])
        tau = np.array([0.9 + 0.0j, 0.4 - 0.2j])
        medium = wf.Medium(pos, tau, 3e8)
        src = np.array([0.2, -0.1, 0.0])
        k = 62.8
        b1, b2 = _g0(pos[0], src, k), _g0(pos[1], src, k)
        g12 = _g0(pos[0], pos[1], k)
        det = 1.0 - tau[0] * tau[1] * g12 ** 2
        expected = np.array([(b1 + tau[1] * g12 * b2) / det,
                             (b2 + tau[0] * g12 * b1) / det])
        psi = wf.solve_exciting_fields(medium, src, k)
        np.testing.assert_allclose(psi, expected, rtol=1e-12)

    def test_two_scatterers_total_field(self):
        pos = np.array([[0.0, 0.0, 6.0], [1.0, 0.5, 8.0]])
        tau = np.array([0.9 + 0.0j, 0.4 - 0.2j])
        medium = wf.Medium(pos, tau, 3e8)
        src, r, k = np.array([0.2, -0.1, 0.0]), np.array([-1.0, 0.3, 14.0]), 62.8
        psi = wf.solve_exciting_fields(medium, src, k)
        expected = _g0(r, src, k) + sum(
            _g0(r, pos[j], k) * tau[j] * psi[j] for j in range(2))
        assert wf.total_field(medium, r, src, k) == pytest.approx(expected, rel=1e-12)

    def test_multiple_sources_match_single_solves(self):
        medium = wf.random_medium(10, (-2, 2), (3, 6), seed=4)
        solver = wf.FoldyLaxSolver(medium, 80.0)
        sources = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.5], [-0.5, 0.2, 0.1]])
        batch = solver.exciting_fields(sources)
        assert batch.shape == (10, 3)
        for s in range(3):
            np.testing.assert_allclose(batch[:, s],
                                       solver.exciting_fields(sources[s]),
                                       rtol=1e-12)

    def test_degenerate_system_raises(self):
        # A resonant pair with tau * G0 = -1 makes (I - A) exactly
        # singular: distance 1, k = pi, tau = 4*pi gives coupling
        # tau * exp(i*pi) / (4*pi) = -1.
        pos = np.array([[0.0, 0.0, 5.0], [0.0, 0.0, 6.0]])
        tau = np.array([4 * np.pi + 0j, 4 * np.pi + 0j])
        medium = wf.Medium(pos, tau, 3e8)
        with pytest.raises(wf.NumericalDegeneracyError):
            wf.FoldyLaxSolver(medium, np.pi)


class TestGeometryFactories:
    def test_linear_array_span_and_center(self):
        geom = wf.linear_array(31, 0.06, frequencies=[2 * np.pi * 5e9])
        xs = geom.receiver_positions[:, 0]
        assert xs.max() - xs.min() == pytest.approx(30 * 0.06)
        assert xs.mean() == pytest.approx(0.0, abs=1e-15)
        assert np.all(geom.receiver_positions[:, 1:] == 0.0)

    def test_wavenumbers(self):
        geom = wf.linear_array(3, 0.06, frequencies=[2 * np.pi * 5e9])
        k = geom.wavenumbers(3e8)
        assert k[0] == pytest.approx(2 * np.pi * 5e9 / 3e8)

    def test_centered_grid_row_major_cross_fastest(self):
        grid = wf.centered_grid((0, 0, 14.0), 3, 2, 0.5, 1.0)
        assert grid.n_points == 6
        # k = i_range * n_cross + i_cross
        assert grid.index_of(2, 1) == 5
        p00 = grid.grid_points[grid.index_of(0, 0)]
        p10 = grid.grid_points[grid.index_of(1, 0)]
        p01 = grid.grid_points[grid.index_of(0, 1)]
        assert p10[0] - p00[0] == pytest.approx(0.5)   # cross step along x
        assert p01[2] - p00[2] == pytest.approx(1.0)   # range step along z
        assert grid.grid_points[:, 2].mean() == pytest.approx(14.0)


class TestSensingMatrix:
    def _tiny(self):
        medium = wf.random_medium(5, (-1, 1), (2, 4), seed=1)
        freqs = 2 * np.pi * np.linspace(4.5e9, 5.5e9, 3)
        geom = wf.linear_array(4, 0.06, frequencies=freqs)
        grid = wf.centered_grid((0, 0, 8.0), 2, 2, 0.03, 0.1)
        return medium, geom, grid

    def test_frequency_major_stacking(self):
        medium, geom, grid = self._tiny()
        sensing = wf.assemble_sensing_matrix(medium, geom, grid)
        N = geom.n_receivers
        for f, k in enumerate(geom.wavenumbers(medium.background_speed)):
            solver = wf.FoldyLaxSolver(medium, k)
            block = solver.total_fields(geom.receiver_positions,
                                        grid.grid_points)
            np.testing.assert_allclose(sensing.entries[f * N:(f + 1) * N],
                                       block, rtol=1e-12)

    def test_columns_are_green_vectors(self):
        medium, geom, grid = self._tiny()
        sensing = wf.assemble_sensing_matrix(medium, geom, grid)
        for j in (0, 3):
            np.testing.assert_allclose(
                sensing.entries[:, j],
                wf.green_vector(medium, geom, grid.grid_points[j]), rtol=1e-12)

    def test_normalized_unit_columns(self):
        medium, geom, grid = self._tiny()
        sensing = wf.assemble_sensing_matrix(medium, geom, grid)
        norms = np.linalg.norm(sensing.normalized(), axis=0)
        np.testing.assert_allclose(norms, 1.0, rtol=1e-12)

    def test_shape_mismatch_rejected(self):
        medium, geom, grid = self._tiny()
        with pytest.raises(ValueError):
            wf.SensingMatrix(np.zeros((3, grid.n_points), complex), geom, grid)


class TestDataGeneration:
    def _sensing(self):
        medium = wf.random_medium(5, (-1, 1), (2, 4), seed=1)
        freqs = 2 * np.pi * np.linspace(4.5e9, 5.5e9, 3)
        geom = wf.linear_array(4, 0.06, frequencies=freqs)
        grid = wf.centered_grid((0, 0, 8.0), 3, 3, 0.03, 0.1)
        return wf.assemble_sensing_matrix(medium, geom, grid)

    def test_measurements_reconstruct_from_configs(self):
        sensing = self._sensing()
        data = wf.generate_dataset(sensing, 40, 2, seed=7)
        assert data.n_samples == 40
        for m, cfg in enumerate(data.configs):
            assert len(cfg.support) == 2
            np.testing.assert_allclose(
                data.measurements[:, m],
                sensing.entries @ cfg.dense(sensing.grid.n_points),
                rtol=1e-12)

    def test_seed_reproducibility(self):
        sensing = self._sensing()
        a = wf.generate_dataset(sensing, 10, 2, seed=3)
        b = wf.generate_dataset(sensing, 10, 2, seed=3)
        c = wf.generate_dataset(sensing, 10, 2, seed=4)
        np.testing.assert_array_equal(a.measurements, b.measurements)
        assert not np.array_equal(a.measurements, c.measurements)

    def test_custom_amplitude_law(self):
        sensing = self._sensing()
        data = wf.generate_dataset(sensing, 5, 1,
                                   amplitude_law=lambda rng, n: np.ones(n),
                                   seed=0)
        for cfg in data.configs:
            np.testing.assert_array_equal(cfg.amplitudes, [1.0 + 0.0j])

    def test_zero_sparsity_gives_zero_data(self):
        sensing = self._sensing()
        data = wf.generate_dataset(sensing, 3, 0, seed=0)
        assert np.all(data.measurements == 0)


class TestRandomMedium:
    def test_region_and_tau_law(self):
        medium = wf.random_medium(200, (-5, 5), (2, 12), seed=11)
        pos, tau = medium.scatterer_positions, medium.scatterer_amplitudes
        assert medium.n_scatterers == 200
        assert np.all((pos[:, 0] >= -5) & (pos[:, 0] <= 5))
        assert np.all((pos[:, 2] >= 2) & (pos[:, 2] <= 12))
        assert np.all(pos[:, 1] == 0.0)
        assert np.all(tau.imag == 0.0)
        assert np.all((tau.real >= 2.0) & (tau.real <= 4.0))

    def test_reproducible(self):
        a = wf.random_medium(50, (-5, 5), (2, 12), seed=9)
        b = wf.random_medium(50, (-5, 5), (2, 12), seed=9)
        np.testing.assert_array_equal(a.scatterer_positions,
                                      b.scatterer_positions)
