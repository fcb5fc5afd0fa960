import hashlib
import json

import numpy as np
import pandas as pd
import pytest

from trendpremia import cli
from trendpremia.errors import SingularInnovation

SIX = ["All", "No20", "No60", "No125", "No250", "No500"]


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def synth_cfg(tmp_path):
    return write(tmp_path / "c.json", {"data": {"synthetic": {"n_assets": 3, "n_days": 1200}}, "seed": 7})


@pytest.fixture(scope="module")
def backtest_cfg(tmp_path_factory):
    d = tmp_path_factory.mktemp("bt")
    return write(d / "b.json", {"data": {"synthetic": {"n_assets": 3, "n_days": 2800}}, "seed": 3, "variants": SIX})


class TestSynth:
    def test_deterministic(self, synth_cfg, tmp_path):
        assert run("synth", "--config", synth_cfg, "--out", tmp_path / "a") == 0
        assert run("synth", "--config", synth_cfg, "--out", tmp_path / "b") == 0
        assert digest(tmp_path / "a" / "prices.csv") == digest(tmp_path / "b" / "prices.csv")

    def test_row_count(self, synth_cfg, tmp_path):
        run("synth", "--config", synth_cfg, "--out", tmp_path / "a")
        lines = (tmp_path / "a" / "prices.csv").read_text().splitlines()
        assert lines[0] == "date,instrument_id,price"
        assert len(lines) == 3600 + 1

    def test_metadata_flag(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"data": {"synthetic": {"n_assets": 2, "n_days": 1200, "medium_redundancy": True}}})
        assert run("synth", "--config", cfg, "--seed", 1, "--out", tmp_path / "o") == 0
        meta = json.loads((tmp_path / "o" / "synthetic.json").read_text())
        assert meta["synthetic"]["medium_redundancy"] is True

    def test_seed_override(self, synth_cfg, tmp_path):
        run("synth", "--config", synth_cfg, "--out", tmp_path / "a")
        run("synth", "--config", synth_cfg, "--seed", 8, "--out", tmp_path / "b")
        assert digest(tmp_path / "a" / "prices.csv") != digest(tmp_path / "b" / "prices.csv")

    def test_manifest(self, synth_cfg, tmp_path):
        run("synth", "--config", synth_cfg, "--out", tmp_path / "a")
        man = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert man["seed"] == 7 and len(man["config_hash"]) == 64
        assert set(man["outputs"]) == {"prices.csv", "universe.json", "synthetic.json"}
        assert man["outputs"]["prices.csv"] == digest(tmp_path / "a" / "prices.csv")
        assert {"numpy", "pandas", "scipy", "python", "trendpremia"} <= set(man["versions"])


class TestBacktest:
    def test_smoke(self, synth_cfg, tmp_path):
        cfg = write(tmp_path / "p.json", {"data": {"synthetic": {"n_assets": 2, "n_days": 2700}}, "seed": 2})
        assert run("backtest", "--config", cfg, "--out", tmp_path / "o") == 0
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert len(rep["reports"]) == 1 and rep["reports"][0]["variant"] == "PureTrend"
        assert rep["reports"][0]["full"]["n_obs"] > 0
        for f in ("results.csv", "iso_utility.svg", "dendrogram.svg", "dendrogram.txt"):
            assert (tmp_path / "o" / f).stat().st_size > 0
        assert not (tmp_path / "o" / "zscores.csv").exists()

    def test_six_variants_and_determinism(self, backtest_cfg, tmp_path):
        assert run("backtest", "--config", backtest_cfg, "--out", tmp_path / "a") == 0
        assert run("backtest", "--config", backtest_cfg, "--out", tmp_path / "b") == 0
        z = pd.read_csv(tmp_path / "a" / "zscores.csv")
        assert len(z) == 6 and sorted(z["variant"]) == sorted(SIX)
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
        res = pd.read_csv(tmp_path / "a" / "results.csv")
        assert list(res.columns) == ["period", "variant", "sharpe", "ret_over_maxdd", "corr", "utility"]

    def test_alpha_and_horizon_flags(self, tmp_path):
        cfg = write(tmp_path / "p.json", {"data": {"synthetic": {"n_assets": 2, "n_days": 2700}}, "seed": 2})
        assert run("backtest", "--config", cfg, "--out", tmp_path / "o", "--alpha", 1.0, "--horizons", "20,60",
                   "--variant", "PureTrend", "--variant", "No20") == 0
        man = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert man["config"]["horizons"] == [20, 60]
        assert man["config"]["backtest"]["alpha"] == 1.0
        rows = pd.read_csv(tmp_path / "o" / "results.csv")
        full = rows[(rows.period == "full") & rows.utility.notna()]
        np.testing.assert_allclose(full.utility, full.ret_over_maxdd, rtol=1e-9)

    def test_inputs_untouched(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"data": {"synthetic": {"n_assets": 2, "n_days": 2700}}, "seed": 5})
        run("synth", "--config", cfg, "--out", tmp_path / "data")
        prices = tmp_path / "data" / "prices.csv"
        before = digest(prices)
        cfg2 = write(tmp_path / "d.json", {"data": {"csv": "data/prices.csv"}, "universe": "data/universe.json"})
        assert run("backtest", "--config", cfg2, "--out", tmp_path / "o") == 0
        assert digest(prices) == before


class TestOtherCommands:
    def test_cluster_identical(self, tmp_path):
        x = np.random.default_rng(0).normal(size=100)
        pd.DataFrame({"date": range(100), "a": x, "b": x}).to_csv(tmp_path / "s.csv", index=False)
        cfg = write(tmp_path / "c.json", {"sleeves": "s.csv"})
        assert run("cluster", "--config", cfg, "--out", tmp_path / "o") == 0
        tree = json.loads((tmp_path / "o" / "cluster.json").read_text())
        assert tree["merges"][0]["distance"] == pytest.approx(0.0, abs=1e-12)
        assert (tmp_path / "o" / "dendrogram.svg").read_text().startswith("<svg")

    def test_weights_noise(self, tmp_path):
        cfg = write(tmp_path / "w.json", {"data": {"synthetic": {"n_assets": 2, "n_days": 2900, "drift_vol": 0.0}},
                                          "seed": 1, "rolling": {"fixed_thresholds": [0.05, 0.5, 0.1]}})
        assert run("weights", "--config", cfg, "--out", tmp_path / "o") == 0
        w = pd.read_csv(tmp_path / "o" / "weights.csv")
        assert list(w.columns) == ["window_start", "asset", "horizon", "weight", "stable"]
        assert len(w) > 0 and (w.weight == 0.2).all() and not w.stable.any()

    def test_ablate_fixture(self, tmp_path, data_dir):
        cfg = write(tmp_path / "a.json", {"metric_tables": str(data_dir / "horizon_removal_metrics.csv")})
        assert run("ablate", "--config", cfg, "--out", tmp_path / "o") == 0
        z = pd.read_csv(tmp_path / "o" / "zscores.csv")
        assert list(z["variant"]) == ["No125", "No60", "All", "No250", "No20", "No500"]


class TestErrors:
    def test_missing_config(self, tmp_path, capsys):
        assert run("backtest", "--config", tmp_path / "nope.json") == 2
        rec = json.loads(capsys.readouterr().err)
        assert rec["error"] == "ConfigError" and rec["command"] == "backtest"

    def test_synthetic_needs_seed(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"data": {"synthetic": {"n_assets": 2}}})
        assert run("synth", "--config", cfg, "--out", tmp_path / "o") == 2

    def test_two_sources(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"data": {"csv": "x.csv", "synthetic": {}}, "seed": 1})
        assert run("backtest", "--config", cfg, "--out", tmp_path / "o") == 2

    def test_unknown_variant(self, backtest_cfg, tmp_path):
        assert run("backtest", "--config", backtest_cfg, "--variant", "Foo", "--out", tmp_path / "o") == 2

    def test_missing_data(self, tmp_path, capsys):
        cfg = write(tmp_path / "c.json", {"data": {"csv": "missing.csv"}})
        assert run("backtest", "--config", cfg, "--out", tmp_path / "o") == 3
        assert json.loads(capsys.readouterr().err)["error"] == "MissingFile"

    def test_numerical(self, synth_cfg, tmp_path, monkeypatch):
        def boom(cfg):
            raise SingularInnovation("innovation variance 0")

        monkeypatch.setitem(cli.COMMANDS, "synth", boom)
        assert run("synth", "--config", synth_cfg, "--out", tmp_path / "o") == 4
