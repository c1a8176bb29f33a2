"""Experiment runners, persistence format, and the command line."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from rcmlab.cli import main
from rcmlab.environment import ConductanceLaw
from rcmlab.errors import ConfigError
from rcmlab.experiments import (RunConfig, _fmt, _geometric_chisquare,
                                _pyify, run_experiment, validate_config)

TINY_PARAMS = {
    "env-audit": {"n_samples": 2000, "n_holding_sites": 1, "box_radius": 10},
    "metrics": {"n_envs": 5, "n_values": [2, 3], "n_origins": 4,
                "box_ratio": 1.5, "hop_ratio": 1.5},
    "iso": {"seeds": [0, 1], "n_values": [2, 3], "poincare_n": [1],
            "density_n": 6},
    "fpp": {"n_envs": 3, "ratios": [0.5, 1.0], "n_values": [2, 3],
            "box_radius": 10},
    "kernel": {"torus_radius": 4, "t_values": [1.0, 2.0], "mc_t": 1.0,
               "mc_walks": 3000, "probe_radius": 2},
    "corrector": {"radii": [2, 3], "sublinearity_radii": [2, 3],
                  "epsilons": [0.1]},
    "clt": {"n_walks": 300, "t_grid": [2.0, 5.0], "epsilons": [0.5],
            "csrw": True, "trend_grid": [2.0, 5.0], "trend_walks": 100},
}

EXPECTED_TABLES = {
    "env-audit": {"audit_marginals.csv", "audit_edge_hist.csv"},
    "metrics": {"metric_tails.csv", "metric_summary.json"},
    "iso": {"iso_scaling.csv", "iso_summary.csv", "poincare.csv",
            "iso_density.json"},
    "fpp": {"fpp_samples.csv", "fpp_ratios.csv", "fpp_summary.json"},
    "kernel": {"kernel_stability.csv", "kernel_mc.csv",
               "kernel_summary.json"},
    "corrector": {"corrector_sigma.csv", "sublinearity.csv"},
    "clt": {"clt_cov.csv", "clt_ks.csv", "clt_percentiles.csv",
            "clt_trend.csv", "clt_summary.json"},
}


def tiny_config(experiment, outdir, **overrides):
    cfg = RunConfig(experiment=experiment, params=dict(TINY_PARAMS[experiment]),
                    outdir=Path(outdir))
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


class TestValidateConfig:
    def test_good_config_has_no_problems(self, tmp_path):
        assert validate_config(tiny_config("env-audit", tmp_path)) == []

    def test_each_bad_field_is_named(self, tmp_path):
        cfg = tiny_config("env-audit", tmp_path)
        cfg.experiment = "nope"
        cfg.dim = 0
        cfg.p = 1.5
        cfg.preset = "weekend"
        cfg.workers = 0
        cfg.scan_limit = 0
        problems = validate_config(cfg)
        joined = "\n".join(problems)
        for needle in ("experiment:", "environment.dim:", "environment.p:",
                       "preset:", "workers:", "environment.scan_limit:"):
            assert needle in joined
        assert len(problems) == 6

    def test_roundtrips_through_json(self, tmp_path):
        cfg = tiny_config("clt", tmp_path, env_seed=9, run_seed=3,
                          law=ConductanceLaw.two_point(1.0, 8.0, 0.25))
        back = RunConfig.from_json(cfg.to_json())
        assert back.experiment == "clt"
        assert back.env_seed == 9 and back.run_seed == 3
        assert back.law == cfg.law
        assert back.params == cfg.params
        assert back.environment() == cfg.environment()


class TestPersistenceFormat:
    def test_fmt_is_unambiguous(self):
        # bool must be handled before int, since bool subclasses int
        assert _fmt(True) == 1 and _fmt(False) == 0
        assert _fmt(np.bool_(True)) == 1
        assert _fmt(0.1) == "0.1"
        assert _fmt(np.float64(1 / 3)) == repr(1 / 3)
        assert _fmt(7) == 7 and _fmt(np.int64(7)) == 7
        assert _fmt("label") == "label"

    def test_pyify_strips_numpy_types(self):
        obj = {"a": np.int32(3), "b": [np.float64(0.5), np.bool_(False)],
               "c": np.arange(3), "d": (1, np.float32(2.0))}
        out = _pyify(obj)
        assert out == {"a": 3, "b": [0.5, False], "c": [0, 1, 2], "d": [1, 2.0]}
        json.dumps(out)

    def test_geometric_chisquare_calibration(self):
        rng = np.random.default_rng(0)
        gaps = rng.geometric(0.4, size=30_000)
        stat, pval, hist = _geometric_chisquare(gaps, 0.4)
        assert pval > 1e-3
        _, bad_pval, _ = _geometric_chisquare(gaps, 0.6)
        assert bad_pval < 1e-6
        assert hist[0]["length"] == 1
        assert hist[0]["count"] == int((gaps == 1).sum())
        assert hist[0]["expected"] == pytest.approx(30_000 * 0.4, rel=0.02)


@pytest.mark.parametrize("experiment", sorted(EXPECTED_TABLES))
def test_tiny_run_writes_its_tables(experiment, tmp_path):
    res = run_experiment(tiny_config(experiment, tmp_path))
    assert EXPECTED_TABLES[experiment] <= set(res.files)
    for name in EXPECTED_TABLES[experiment]:
        assert (tmp_path / name).stat().st_size > 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["experiment"] == experiment
    assert manifest["config"]["schema"] == 1
    assert sorted(manifest["files"]) == sorted(res.files)
    assert manifest["failures"] == res.failures
    assert set(manifest["versions"]) == {"python", "numpy", "scipy"}
    assert manifest["backend"] in ("compiled", "python")
    # every table gets at least one figure except pure-JSON summaries
    assert any(f.endswith(".svg") for f in res.files)


def test_invalid_config_raises_before_running(tmp_path):
    cfg = tiny_config("metrics", tmp_path, p=0.0)
    with pytest.raises(ConfigError, match="environment.p"):
        run_experiment(cfg)


class TestRerunDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path):
        paths = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            run_experiment(tiny_config("corrector", out))
            paths.append(out)
        for name in ("corrector_sigma.csv", "sublinearity.csv",
                     "corrector_sigma.svg", "sublinearity.svg"):
            assert (paths[0] / name).read_bytes() == \
                (paths[1] / name).read_bytes()

    def test_worker_count_does_not_change_results(self, tmp_path):
        outs = []
        for workers in (1, 2):
            out = tmp_path / f"w{workers}"
            run_experiment(tiny_config("metrics", out, workers=workers))
            outs.append((out / "metric_tails.csv").read_bytes())
        assert outs[0] == outs[1]


class TestCli:
    def test_list_presets(self, capsys):
        assert main(["list-presets"]) == 0
        out = capsys.readouterr().out
        assert "desk" in out and "night" in out

    def test_validate_prints_resolved_config(self, capsys):
        code = main(["validate", "--experiment", "metrics", "--p", "0.8",
                     "--law", "pareto:3", "--param", "n_envs=5"])
        assert code == 0
        cfg = json.loads(capsys.readouterr().out)
        assert cfg["experiment"] == "metrics"
        assert cfg["environment"]["p"] == 0.8
        assert cfg["params"]["n_envs"] == 5

    def test_validate_rejects_bad_fields(self, capsys):
        code = main(["validate", "--experiment", "metrics", "--p", "7"])
        assert code == 2
        assert "environment.p" in capsys.readouterr().err

    def test_bad_law_string_is_a_config_error(self, capsys):
        code = main(["validate", "--experiment", "metrics",
                     "--law", "cauchy:1"])
        assert code == 2
        assert "law" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["validate", "--config", str(tmp_path / "none.json")])
        assert code == 2

    def test_config_file_with_flag_overrides(self, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(
            tiny_config("fpp", tmp_path / "out").to_json()))
        code = main(["validate", "--config", str(cfg_path),
                     "--env-seed", "42"])
        assert code == 0
        cfg = json.loads(capsys.readouterr().out)
        assert cfg["experiment"] == "fpp"
        assert cfg["environment"]["seed"] == 42

    def test_run_writes_files_and_exits_zero(self, tmp_path, capsys):
        args = ["run", "--experiment", "fpp", "--outdir", str(tmp_path)]
        for k, v in TINY_PARAMS["fpp"].items():
            args += ["--param", f"{k}={json.dumps(v)}"]
        assert main(args) == 0
        assert (tmp_path / "manifest.json").exists()
        assert "wrote" in capsys.readouterr().out

    def test_failed_internal_check_exits_four(self, tmp_path, capsys):
        # sup P^t * t is far from stable between t=1 and t=64 on a 9x9
        # torus (the kernel is nearly uniform by t=64), so the stability
        # check fails by exact arithmetic
        params = dict(TINY_PARAMS["kernel"], t_values=[1, 64])
        args = ["run", "--experiment", "kernel", "--outdir", str(tmp_path)]
        for k, v in params.items():
            args += ["--param", f"{k}={json.dumps(v)}"]
        assert main(args) == 4
        assert "check(s) failed" in capsys.readouterr().err

    def test_plot_rerenders_from_csv(self, tmp_path, capsys):
        run_experiment(tiny_config("metrics", tmp_path))
        (tmp_path / "metric_tails.svg").unlink()
        assert main(["plot", str(tmp_path)]) == 0
        assert (tmp_path / "metric_tails.svg").exists()

    def test_plot_needs_known_tables(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["plot", str(empty)]) == 2
        assert main(["plot", str(tmp_path / "missing")]) == 2

    def test_module_entry_point(self, tmp_path):
        import subprocess
        import sys
        proc = subprocess.run(
            [sys.executable, "-m", "rcmlab.cli", "list-presets"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "desk" in proc.stdout
