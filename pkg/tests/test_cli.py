import json
from pathlib import Path

import numpy as np
import pytest

from ampc.cli import main
from ampc.config import METHOD_DEFAULTS, apply_overrides, build_problem, load_config, resolve
from ampc.errors import ConfigError
from ampc.models import FractionalSourceModel

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def toy_cfg(tmp_path, **method):
    cfg = {
        "name": "toy",
        "seed": 0,
        "output_dir": str(tmp_path / "out"),
        "model": {"kind": "linear", "params": {"A": [[1.0], [0.5], [-0.8]], "c": [0.1, 0.0, 0.2]}},
        "prior": {"kind": "gaussian"},
        "noise": {"kind": "known", "sigma": 0.05},
        "data": {"synthetic": {"true_params": [0.4], "noise": {"kind": "additive", "sigma": 0.05}, "seed": 3}},
        "method": {"kind": "direct", "n_steps": 500, "proposal_steps": [0.09], **method},
    }
    return cfg


def example1_cfg(tmp_path, mesh=9, **method):
    cfg = json.loads((CONFIGS / "example1_ampc.json").read_text())
    cfg["model"]["params"]["mesh"] = mesh
    cfg["output_dir"] = str(tmp_path / "ex1")
    cfg["method"].update(method)
    return cfg


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


class TestConfig:
    def test_shipped_configs_validate(self):
        for path in CONFIGS.glob("*.json"):
            cfg = load_config(path)
            assert cfg["schema_version"] == 1

    def test_defaults(self, tmp_path):
        cfg = resolve({k: v for k, v in toy_cfg(tmp_path).items() if k != "method"})
        for k, v in METHOD_DEFAULTS.items():
            assert cfg["method"][k] == v
        assert (cfg["method"]["m"], cfg["method"]["I_max"]) == (5000, 10)

    def test_unknown_key(self, tmp_path):
        cfg = toy_cfg(tmp_path)
        cfg["method"]["bogus"] = 1
        with pytest.raises(ConfigError) as exc:
            resolve(cfg)
        assert exc.value.path == "method"

    def test_type_error_path(self, tmp_path):
        cfg = toy_cfg(tmp_path, rho=2.0)
        with pytest.raises(ConfigError) as exc:
            resolve(cfg)
        assert exc.value.path == "method.rho"

    def test_data_source_exclusive(self, tmp_path):
        cfg = toy_cfg(tmp_path)
        cfg["data"]["file"] = "d.csv"
        with pytest.raises(ConfigError):
            resolve(cfg)

    def test_overrides(self):
        cfg = apply_overrides({"method": {"m": 5}}, ["method.m=7", "method.kind=ampc", "name=x y"])
        assert cfg == {"method": {"m": 7, "kind": "ampc"}, "name": "x y"}
        with pytest.raises(ConfigError):
            apply_overrides({}, ["novalue"])

    def test_relative_paths(self, tmp_path):
        cfg = toy_cfg(tmp_path)
        cfg["output_dir"] = "rel"
        cfg = load_config(write(tmp_path, cfg))
        assert cfg["output_dir"] == str(tmp_path / "rel")

    def test_from_data_noise(self, tmp_path):
        cfg = toy_cfg(tmp_path)
        del cfg["noise"]
        problem, gen = build_problem(resolve(cfg))
        assert problem.noise.sigma == gen.sigma == 0.05


class TestGenerateData:
    def test_example1_has_18_values(self, tmp_path, capsys):
        assert main(["generate-data", write(tmp_path, example1_cfg(tmp_path))]) == 0
        data = np.loadtxt(tmp_path / "ex1" / "data.csv")
        assert data.shape == (18,)
        prov = json.loads((tmp_path / "ex1" / "data_provenance.json").read_text())
        assert prov["synthetic"]["true_params"] == [0.25, 0.75]
        assert prov["synthetic"]["fine_model"]["mesh"] == 17

    def test_noise_free_matches_fine_model(self, tmp_path, capsys):
        cfg = example1_cfg(tmp_path)
        cfg["data"]["synthetic"]["noise"]["sigma"] = 0.0
        cfg["noise"] = {"kind": "known", "sigma": 0.2}
        assert main(["generate-data", write(tmp_path, cfg)]) == 0
        data = np.loadtxt(tmp_path / "ex1" / "data.csv")
        fine = FractionalSourceModel(**{**cfg["model"]["params"], "mesh": 17})
        np.testing.assert_array_equal(data, fine.evaluate([0.25, 0.75]))

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        path = write(tmp_path, example1_cfg(tmp_path))
        main(["generate-data", path])
        first = (tmp_path / "ex1" / "data.csv").read_bytes()
        main(["generate-data", path])
        assert (tmp_path / "ex1" / "data.csv").read_bytes() == first


class TestRun:
    def test_direct_chain_length(self, tmp_path, capsys):
        assert main(["run", write(tmp_path, toy_cfg(tmp_path, n_steps=50_000))]) == 0
        lines = (tmp_path / "out" / "chain.csv").read_text().splitlines()
        assert len(lines) == 50_001
        for f in ("events.json", "ledger.json", "summary.json", "histograms.csv", "config.json", "data.csv"):
            assert (tmp_path / "out" / f).exists()

    def test_ampc_defaults_chain_length(self, tmp_path, capsys):
        cfg = toy_cfg(tmp_path, kind="ampc")
        del cfg["method"]["n_steps"]
        assert main(["run", write(tmp_path, cfg)]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["n_states"] == 50_000
        assert result["ledger"]["offline"] == 8  # 2 * C(1 + 3, 1)

    def test_prior_pc_with_surrogate_file_is_offline_only(self, tmp_path, capsys):
        cfg = toy_cfg(tmp_path, kind="prior_pc", N=3)
        assert main(["build-surrogate", write(tmp_path, cfg)]) == 0
        cfg["method"]["surrogate_file"] = str(tmp_path / "out" / "surrogate.json")
        cfg["output_dir"] = str(tmp_path / "run")
        assert main(["run", write(tmp_path, cfg)]) == 0
        ledger = json.loads((tmp_path / "run" / "ledger.json").read_text())
        assert ledger["total"] == 0 and ledger["online"] == 0

    def test_seed_flag_and_determinism(self, tmp_path, capsys):
        path = write(tmp_path, toy_cfg(tmp_path))
        main(["run", path, "--seed", "4", "--output-dir", str(tmp_path / "a")])
        main(["run", path, "--seed", "4", "--output-dir", str(tmp_path / "b")])
        main(["run", path, "--seed", "5", "--output-dir", str(tmp_path / "c")])
        a, b, c = ((tmp_path / d / "chain.csv").read_bytes() for d in "abc")
        assert a == b and a != c

    def test_provenance_reruns_identically(self, tmp_path, capsys):
        main(["run", write(tmp_path, toy_cfg(tmp_path, kind="ampc", m=50, I_max=4))])
        emitted = json.loads((tmp_path / "out" / "config.json").read_text())
        emitted["output_dir"] = str(tmp_path / "again")
        main(["run", write(tmp_path, emitted, "again.json")])
        for f in ("chain.csv", "events.json", "ledger.json", "surrogate.json"):
            assert (tmp_path / "out" / f).read_bytes() == (tmp_path / "again" / f).read_bytes()

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = toy_cfg(tmp_path, bogus=True)
        assert main(["run", write(tmp_path, cfg)]) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ConfigError" and err["path"] == "method"

    def test_runtime_error_writes_error_json(self, tmp_path, capsys):
        cfg = toy_cfg(tmp_path)
        cfg["prior"] = {"kind": "uniform", "low": 0.0, "high": 1.0}
        cfg["method"]["start"] = [2.0]
        assert main(["run", write(tmp_path, cfg)]) == 1
        payload = json.loads((tmp_path / "out" / "error.json").read_text())
        assert payload["error"] == "InputError"
        assert "outside the prior support" in payload["message"]


class TestCompare:
    def test_identical_runs_identical_rows(self, tmp_path, capsys):
        path = write(tmp_path, toy_cfg(tmp_path))
        assert main(["compare", path, path, "--output-dir", str(tmp_path / "cmp")]) == 0
        rows = json.loads((tmp_path / "cmp" / "compare.json").read_text())["rows"]
        assert rows[0] == rows[1]
        assert (tmp_path / "cmp" / "compare.csv").read_text().count("\n") == 3

    def test_offline_counts_by_order(self, tmp_path, capsys):
        paths = []
        for N in (3, 6, 9):
            cfg = example1_cfg(tmp_path, kind="prior_pc", N=N, n_steps=200)
            paths.append(write(tmp_path, cfg, f"pc{N}.json"))
        assert main(["compare", *paths, "--output-dir", str(tmp_path / "cmp")]) == 0
        rows = json.loads((tmp_path / "cmp" / "compare.json").read_text())["rows"]
        assert [r["offline"] for r in rows] == [20, 56, 110]
        assert all(r["online_direct"] == 0 for r in rows)

    def test_ampc_row_breakdown(self, tmp_path, capsys):
        cfg = example1_cfg(tmp_path, m=100, I_max=3, epsilon=1e-6)
        cfg["noise"] = {"kind": "known", "sigma": 0.2}
        cfg["method"]["proposal_steps"] = [0.025, 0.025]
        cfg["method"]["start"] = [0.25, 0.75]
        cfg["grid"] = {"nodes": 101}
        assert main(["compare", write(tmp_path, cfg), "--output-dir", str(tmp_path / "cmp")]) == 0
        row = json.loads((tmp_path / "cmp" / "compare.json").read_text())["rows"][0]
        assert row["offline"] == 20
        assert row["online_refinement"] == 12 * row["refinement_events"]
        assert row["online_ratio"] + row["cache_hits"] >= 2 * 3
        assert row["kl"] >= 0 and 0 <= row["hellinger"] <= 1


class TestDiagnose:
    def test_metrics(self, tmp_path, capsys):
        cfg = toy_cfg(tmp_path, kind="ampc", m=200, I_max=3)
        cfg["grid"] = {"nodes": 201, "low": [0.2], "high": [0.6]}
        main(["run", write(tmp_path, cfg)])
        assert main(["diagnose", str(tmp_path / "out"), "--n-samples", "50"]) == 0
        metrics = json.loads((tmp_path / "out" / "metrics.json").read_text())
        assert metrics["feasible_set"]["n_samples"] == 50
        assert metrics["diagnostic_ledger"]["evaluations"]["feasibility"] == 50
        # Exact surrogate of a linear model: KL is zero up to roundoff.
        assert abs(metrics["grid"]["kl"]) < 1e-12
        assert len(metrics["summary"]["means"]) == 1

    def test_missing_run(self, tmp_path, capsys):
        assert main(["diagnose", str(tmp_path / "nothing")]) == 2
