"""Configuration loading, validation, derived factories, and hashing."""

import json

import numpy as np
import pytest

from scatter_superres import config as cfg_mod
from scatter_superres.config import ConfigError, ExperimentConfig


class TestDefaults:
    def test_reference_values(self):
        c = ExperimentConfig()
        assert c.f0 == 5e9 and c.bandwidth == 1e9 and c.n_frequencies == 26
        assert c.n_receivers == 31 and c.aperture == 30.0
        assert c.n_cross == c.n_range == 19
        assert c.array_range == 14.0
        assert c.n_scatterers == 400 and c.tau_interval == (2.0, 4.0)
        assert c.n_samples == 5000 and c.sparsity == 3
        assert c.wavelength == pytest.approx(0.06)
        assert c.n_grid_points == 361

    def test_frequencies_are_angular_and_cover_band(self):
        c = ExperimentConfig()
        w = c.frequencies()
        assert len(w) == 26
        assert w[0] == pytest.approx(2 * np.pi * 4.5e9)
        assert w[-1] == pytest.approx(2 * np.pi * 5.5e9)

    def test_factories_consistent(self):
        c = ExperimentConfig(n_scatterers=20)
        geom = c.make_array()
        assert geom.n_receivers == 31
        xs = geom.receiver_positions[:, 0]
        assert xs.max() - xs.min() == pytest.approx(30 * c.wavelength)
        grid = c.make_grid()
        assert grid.n_points == 361
        assert grid.spacing_cross == pytest.approx(0.5 * c.wavelength)
        medium = c.make_medium()
        assert medium.n_scatterers == 20
        # data dimension of the reference configuration
        assert geom.data_dim == 806

    def test_k_effective(self):
        assert ExperimentConfig().k_effective == 361
        assert ExperimentConfig(k_target=81).k_effective == 81


class TestValidation:
    @pytest.mark.parametrize("kwargs", [
        dict(f0=-1.0),
        dict(bandwidth=0.0),
        dict(bandwidth=2e10),
        dict(n_frequencies=0),
        dict(n_cross=0),
        dict(spacing_cross=0.0),
        dict(n_samples=0),
        dict(sparsity=-1),
        dict(tau_interval=(3.0, 1.0)),
    ])
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs)

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"not_a_key": 1}))
        with pytest.raises(ConfigError):
            cfg_mod.load_config(p)


class TestLoading:
    def test_toml_flat(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('f0 = 3.0e9\nn_receivers = 11\ntau_interval = [1.0, 2.0]\n')
        c = cfg_mod.load_config(p)
        assert c.f0 == 3e9 and c.n_receivers == 11
        assert c.tau_interval == (1.0, 2.0)
        assert c.bandwidth == 1e9          # untouched default

    def test_toml_sections_flattened(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('[physical]\nf0 = 4.0e9\n[seeds]\nseed_medium = 7\n')
        c = cfg_mod.load_config(p)
        assert c.f0 == 4e9 and c.seed_medium == 7

    def test_duplicate_key_across_sections_rejected(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('[a]\nf0 = 4.0e9\n[b]\nf0 = 5.0e9\n')
        with pytest.raises(ConfigError):
            cfg_mod.load_config(p)

    def test_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"n_samples": 100, "seeds": {"seed_data": 3}}))
        c = cfg_mod.load_config(p)
        assert c.n_samples == 100 and c.seed_data == 3

    def test_round_trip_through_json(self, tmp_path):
        c = ExperimentConfig(n_receivers=13, tau_interval=(1.5, 2.5))
        p = tmp_path / "c.json"
        p.write_text(json.dumps(c.to_dict()))
        assert cfg_mod.load_config(p) == c


class TestHashing:
    def test_stable_and_sensitive(self):
        a = ExperimentConfig()
        b = ExperimentConfig()
        c = ExperimentConfig(seed_medium=1)
        assert cfg_mod.config_hash(a) == cfg_mod.config_hash(b)
        assert cfg_mod.config_hash(a) != cfg_mod.config_hash(c)
        assert len(cfg_mod.config_hash(a)) == 16

    def test_with_overrides(self):
        c = ExperimentConfig().with_overrides(seed_medium=5, n_samples=10)
        assert c.seed_medium == 5 and c.n_samples == 10
        assert ExperimentConfig().seed_medium == 0
