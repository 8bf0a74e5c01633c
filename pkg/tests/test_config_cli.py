import json
import math
import os

import pytest

import walkcurrent as wc
from walkcurrent.cli import main
from walkcurrent.config import canonical_hash, load_config

BASE = {
    "n": 100,
    "T": 1.0,
    "S": 0.25,
    "t_grid": [0.5, 1.0],
    "r_grid": [0.0],
    "kernel": [[1, 0.7], [-1, 0.3]],
    "occupancy": {"type": "poisson", "rho": 1.0},
    "replicas": 2000,
    "master_seed": 424242,
}


def write_cfg(tmp_path, name="cfg.json", **extra):
    cfg = dict(BASE)
    cfg.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestLoadConfig:
    def test_defaults_filled(self, tmp_path):
        spec = load_config(write_cfg(tmp_path), command="simulate")
        assert spec.raw["window_tol"] == 1e-6
        assert spec.raw["quad_tol"] == 1e-10
        assert spec.experiment.n == 100
        assert spec.experiment.kernel.v == pytest.approx(0.4)

    def test_parse_error_with_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\n  broken\n}")
        with pytest.raises(wc.ConfigParseError, match="line"):
            load_config(str(path), command="simulate")

    def test_zero_mass_kernel_rejected(self, tmp_path):
        with pytest.raises(wc.ConfigValidationError):
            load_config(write_cfg(tmp_path, kernel=[[1, 0.0], [-1, 0.0]]),
                        command="simulate")

    def test_missing_keys_named(self, tmp_path):
        cfg = dict(BASE)
        del cfg["replicas"]
        path = tmp_path / "partial.json"
        path.write_text(json.dumps(cfg))
        with pytest.raises(wc.ConfigValidationError, match="replicas"):
            load_config(str(path), command="simulate")

    def test_geometric_rejected_for_rate_commands(self, tmp_path):
        path = write_cfg(tmp_path, occupancy={"type": "geometric", "rho": 1.0},
                         ldp={"t": 1.0, "x_grid": [0.5]})
        with pytest.raises(wc.ConfigValidationError, match="log-MGF"):
            load_config(path, command="rate-table")
        # the same config is fine for plain simulation
        spec = load_config(path, command="simulate")
        assert spec.occupancy.kind == "geometric"

    def test_overrides_applied(self, tmp_path):
        spec = load_config(write_cfg(tmp_path),
                           overrides={"master_seed": 7, "replicas": 10},
                           command="simulate")
        assert spec.experiment.master_seed == 7
        assert spec.experiment.replicas == 10


class TestCanonicalHash:
    def test_key_order_invariant(self, tmp_path):
        a = load_config(write_cfg(tmp_path, name="a.json"), command="simulate")
        shuffled = dict(reversed(list(BASE.items())))
        path = tmp_path / "b.json"
        path.write_text(json.dumps(shuffled))
        b = load_config(str(path), command="simulate")
        assert a.config_hash == b.config_hash

    def test_semantic_change_changes_hash(self, tmp_path):
        a = load_config(write_cfg(tmp_path, name="a.json"), command="simulate")
        b = load_config(write_cfg(tmp_path, name="b.json", replicas=2001),
                        command="simulate")
        assert a.config_hash != b.config_hash

    def test_runtime_keys_excluded(self):
        d = dict(BASE, bands=dict(), window_tol=1e-6)
        assert canonical_hash(d) == canonical_hash(dict(d, workers=8, out="/tmp/x"))


class TestCliCommands:
    def test_simulate_and_dump(self, tmp_path):
        cfg = write_cfg(tmp_path, replicas=50)
        out = str(tmp_path / "out")
        code = main(["simulate", "--config", cfg, "--out", out, "--dump"])
        assert code == 0
        assert os.path.exists(os.path.join(out, "simulate.csv"))
        with open(os.path.join(out, "replicas.csv")) as fh:
            rows = [line for line in fh if line[0] not in "#r"]  # skip schema+header
        assert len(rows) == 50 * 2  # replicas x grid points
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["status"] == "ok"
        assert manifest["outputs"]

    def test_cov_check_passes_small(self, tmp_path):
        cfg = write_cfg(tmp_path)
        out = str(tmp_path / "out")
        code = main(["cov-check", "--config", cfg, "--out", out])
        assert code == 0
        report = json.load(open(os.path.join(out, "cov_check.json")))
        assert report["passed"] is True

    def test_worker_count_invariance(self, tmp_path):
        # same seed, different worker counts: byte-identical payloads
        cfg = write_cfg(tmp_path)
        out1, out2 = str(tmp_path / "w1"), str(tmp_path / "w2")
        assert main(["cov-check", "--config", cfg, "--out", out1,
                     "--workers", "1"]) == 0
        assert main(["cov-check", "--config", cfg, "--out", out2,
                     "--workers", "3"]) == 0
        for name in ("cov_check.csv", "cov_check.json", "mean_check.csv"):
            a = open(os.path.join(out1, name), "rb").read()
            b = open(os.path.join(out2, name), "rb").read()
            assert a == b, f"{name} differs across worker counts"

    def test_rerun_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, replicas=300)
        out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        main(["simulate", "--config", cfg, "--out", out1])
        main(["simulate", "--config", cfg, "--out", out2])
        a = open(os.path.join(out1, "simulate.csv"), "rb").read()
        b = open(os.path.join(out2, "simulate.csv"), "rb").read()
        assert a == b

    def test_rate_table_spot_value(self, tmp_path):
        cfg = write_cfg(tmp_path,
                        ldp={"t": 1.0, "kappa2": 2.0 * math.pi,
                             "x_grid": [2.0 * math.sinh(1.0)]})
        out = str(tmp_path / "out")
        code = main(["rate-table", "--config", cfg, "--out", out,
                     "--format", "json"])
        assert code == 0
        report = json.load(open(os.path.join(out, "rate_table.json")))
        row = report["rows"][0]
        assert row["rate"] == pytest.approx(2.0 - 2.0 * math.exp(-1.0), abs=1e-6)
        assert row["residual"] < 1e-6
        assert row["rate_closed"] == pytest.approx(row["rate"], abs=1e-6)

    def test_rate_empirical_small(self, tmp_path):
        cfg = write_cfg(tmp_path,
                        ldp={"t": 1.0, "r": 0.0, "x": 1.0, "samples": 20000,
                             "n_values": [100]})
        out = str(tmp_path / "out")
        code = main(["rate-empirical", "--config", cfg, "--out", out])
        assert code == 0
        report = json.load(open(os.path.join(out, "rate_empirical.json")))
        assert report["rows"][0]["oracle_ok"] is True

    def test_fidi_command(self, tmp_path):
        cfg = write_cfg(tmp_path,
                        fidi={"times": [1.0], "rho": 1.0,
                              "kappa2": 2.0 * math.pi,
                              "x_vectors": [[0.5], [1.0], [-1.0]]})
        out = str(tmp_path / "out")
        code = main(["fidi", "--config", cfg, "--out", out])
        assert code == 0
        report = json.load(open(os.path.join(out, "fidi.json")))
        assert report["intensities"]["ok"] is True
        assert all(r["ok"] for r in report["rows"])

    def test_limit_tables(self, tmp_path):
        cfg = write_cfg(tmp_path, limit={"count": 4, "seed": 3})
        out = str(tmp_path / "out")
        code = main(["limit-tables", "--config", cfg, "--out", out])
        assert code == 0
        assert os.path.exists(os.path.join(out, "limit_tables.csv"))

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{]")
        assert main(["simulate", "--config", str(path), "--out",
                     str(tmp_path / "o")]) == 2

    def test_zero_replicas_exit_code(self, tmp_path):
        cfg = write_cfg(tmp_path, replicas=0)
        assert main(["simulate", "--config", cfg, "--out",
                     str(tmp_path / "o")]) == 2

    def test_seed_override_recorded(self, tmp_path):
        cfg = write_cfg(tmp_path, replicas=50)
        out = str(tmp_path / "out")
        main(["simulate", "--config", cfg, "--out", out, "--seed", "99"])
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["overrides"] == {"master_seed": 99}
        assert manifest["seed"] == 99
