"""End-to-end CLI pipeline on a miniature problem: every subcommand, file
artifacts, manifests, and the output-directory environment variable."""

import csv
import json

import numpy as np
import pytest

from scatter_superres import cli
from scatter_superres.cmx import read_cmx

TINY = {
    # miniature but physical: 5x5 window, short array, few scatterers;
    # the tighter range spacing keeps adjacent range rows correlated so
    # the 25-point grid stays connected for the ordering stage
    "n_frequencies": 8,
    "n_receivers": 11,
    "aperture": 12.0,
    "n_cross": 5,
    "n_range": 5,
    "spacing_range": 0.8,
    "n_scatterers": 30,
    "n_samples": 300,
    "sparsity": 2,
    "gelma_max_iters": 2000,
    "outer_iters": 4,
    "overproduce_factor": 1.0,
}


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    cfgfile = out / "config.json"
    cfgfile.write_text(json.dumps(TINY))
    rc = cli.main(["simulate", "--config", str(cfgfile), "--out", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def tiny_config(sim_dir):
    return sim_dir / "config.json"


class TestSimulate:
    def test_artifacts(self, sim_dir):
        sensing = read_cmx(sim_dir / "sensing.cmx")
        measurements = read_cmx(sim_dir / "measurements.cmx")
        assert sensing.shape == (8 * 11, 25)
        assert measurements.shape == (8 * 11, 300)
        np.testing.assert_allclose(np.linalg.norm(sensing, axis=0), 1.0)
        with open(sim_dir / "medium.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 30
        assert set(rows[0]) == {"x", "y", "z", "tau_re", "tau_im"}
        with open(sim_dir / "grid.csv") as fh:
            assert len(list(csv.DictReader(fh))) == 25

    def test_manifest(self, sim_dir):
        manifest = json.loads((sim_dir / "manifest.json").read_text())
        assert manifest["stage"] == "simulate"
        assert sorted(manifest["artifacts"]) == [
            "grid.csv", "measurements.cmx", "medium.csv", "sensing.cmx"]
        assert len(manifest["config_hash"]) == 16
        assert manifest["config"]["n_samples"] == 300

    def test_seed_override_changes_medium(self, tmp_path, tiny_config):
        out = tmp_path / "alt"
        rc = cli.main(["simulate", "--config", str(tiny_config),
                       "--out", str(out), "--seed-medium", "5"])
        assert rc == 0
        base = read_cmx(tiny_config.parent / "sensing.cmx")
        alt = read_cmx(out / "sensing.cmx")
        assert not np.allclose(base, alt)

    def test_env_var_output_dir(self, tmp_path, tiny_config, monkeypatch):
        out = tmp_path / "envout"
        monkeypatch.setenv("SCATTER_SUPERRES_OUT", str(out))
        rc = cli.main(["simulate", "--config", str(tiny_config)])
        assert rc == 0
        assert (out / "sensing.cmx").exists()


@pytest.fixture(scope="module")
def learned_dir(sim_dir, tiny_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("learn")
    rc = cli.main(["learn-dict", "--config", str(tiny_config),
                   "--out", str(out), str(sim_dir / "measurements.cmx")])
    assert rc == 0
    return out


class TestLearnDict:
    def test_dictionary_shape_and_quality(self, learned_dir, sim_dir):
        est = read_cmx(learned_dir / "dictionary.cmx")
        truth = read_cmx(sim_dir / "sensing.cmx")
        assert est.shape == truth.shape
        corr = np.abs(est.conj().T @ truth).max(axis=0)
        assert np.median(corr) > 0.95

    def test_residual_log(self, learned_dir):
        with open(learned_dir / "residuals.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) >= 1
        assert float(rows[-1]["residual"]) >= 0.0


class TestClusterCommand:
    def test_consensus_from_repeated_estimates(self, learned_dir, tiny_config,
                                               tmp_path):
        out = tmp_path / "cons"
        d = str(learned_dir / "dictionary.cmx")
        # identical estimates pooled 5 times form dense clusters
        rc = cli.main(["cluster", "--config", str(tiny_config),
                       "--out", str(out)]
                      + ["--stage-input", d] * 5)
        assert rc == 0
        cons = read_cmx(out / "consensus.cmx")
        assert cons.shape[1] == 25
        with open(out / "cluster_sizes.csv") as fh:
            sizes = [int(r["size"]) for r in csv.DictReader(fh)]
        assert all(s == 5 for s in sizes)


@pytest.fixture(scope="module")
def ordered_dir(sim_dir, tiny_config, tmp_path_factory):
    # order the true sensing columns: exercises the CLI path with a
    # dictionary whose ideal placement is known exactly
    out = tmp_path_factory.mktemp("ordered")
    rc = cli.main(["order-grid", "--config", str(tiny_config),
                   "--out", str(out), str(sim_dir / "sensing.cmx"),
                   "--truth", str(sim_dir / "sensing.cmx")])
    assert rc == 0
    return out


class TestOrderGrid:
    def test_ordered_columns_follow_grid(self, ordered_dir, sim_dir):
        # a 5x5 window is mostly boundary, so the neighbor graph has
        # corner shortcuts; demand a solid majority placed exactly
        ordered = read_cmx(ordered_dir / "ordered.cmx")
        truth = read_cmx(sim_dir / "sensing.cmx")
        diag = np.abs(np.sum(ordered.conj() * truth, axis=0))
        diag /= np.linalg.norm(truth, axis=0) ** 2
        assert np.sum(diag > 0.99) >= 15

    def test_permutation_is_bijective(self, ordered_dir):
        with open(ordered_dir / "permutation.csv") as fh:
            perm = [int(r["column"]) for r in csv.DictReader(fh)]
        assert sorted(perm) == list(range(25))

    def test_requires_anchors_or_truth(self, learned_dir, tiny_config,
                                       tmp_path, capsys):
        rc = cli.main(["order-grid", "--config", str(tiny_config),
                       "--out", str(tmp_path),
                       str(learned_dir / "dictionary.cmx")])
        assert rc == 2

    def test_explicit_anchor_parsing(self):
        assert cli._parse_anchor("3,0,4") == (3, (0, 4))
        with pytest.raises(Exception):
            cli._parse_anchor("3,0")


class TestImageCommand:
    def test_image_of_known_measurement(self, ordered_dir, sim_dir,
                                        tiny_config, tmp_path):
        out = tmp_path / "img"
        rc = cli.main(["image", "--config", str(tiny_config),
                       "--out", str(out), str(ordered_dir / "ordered.cmx"),
                       str(sim_dir / "measurements.cmx"),
                       "--measurement-index", "3"])
        assert rc == 0
        with open(out / "image.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 25
        values = np.array([float(r["value"]) for r in rows])
        assert values.max() > 0

    def test_out_of_range_index(self, ordered_dir, sim_dir, tiny_config,
                                tmp_path):
        rc = cli.main(["image", "--config", str(tiny_config),
                       "--out", str(tmp_path),
                       str(ordered_dir / "ordered.cmx"),
                       str(sim_dir / "measurements.cmx"),
                       "--measurement-index", "999"])
        assert rc == 2


class TestEvaluate:
    def test_metrics_against_truth(self, learned_dir, sim_dir, tiny_config,
                                   tmp_path):
        out = tmp_path / "eval"
        rc = cli.main(["evaluate", "--config", str(tiny_config),
                       "--out", str(out),
                       str(learned_dir / "dictionary.cmx"),
                       str(sim_dir / "sensing.cmx")])
        assert rc == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["n_columns"] == 25
        assert 0.0 <= metrics["correlation_min"] <= 1.0
        assert metrics["correlation_mean"] >= metrics["correlation_min"]
        with open(out / "correlations.csv") as fh:
            assert len(list(csv.DictReader(fh))) == 25

    def test_self_evaluation_is_perfect(self, sim_dir, tiny_config, tmp_path):
        out = tmp_path / "self"
        rc = cli.main(["evaluate", "--config", str(tiny_config),
                       "--out", str(out), str(sim_dir / "sensing.cmx"),
                       str(sim_dir / "sensing.cmx")])
        assert rc == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["correlation_min"] > 1.0 - 1e-9
        assert metrics["assignment_bijective"] is True
