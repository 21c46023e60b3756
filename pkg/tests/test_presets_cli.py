import json
import subprocess
import sys

import numpy as np
import pytest

from mhekit.core import ValidationError
from mhekit.presets import compare, default_cost, preset_config, run_preset


class TestPresetConfigs:
    def test_all_presets_have_configs(self):
        from mhekit.presets import PRESET_NAMES

        for name in PRESET_NAMES:
            cfg = preset_config(name)
            assert "model" in cfg

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValidationError):
            preset_config("nope")
        with pytest.raises(ValidationError):
            run_preset("nope")

    def test_default_costs_cover_models(self):
        for model_id in ("scalar", "reactor", "cstr", "quadrotor", "lti:4:2:2:1"):
            c = default_cost(model_id)
            assert c.Q.shape[0] >= 1


@pytest.fixture(scope="module")
def scalar_preset_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("scalar_preset")
    return run_preset("motivating-scalar", out_dir=out), out


class TestMotivatingScalarPreset:
    @pytest.fixture()
    def manifest(self, scalar_preset_manifest):
        return scalar_preset_manifest

    def test_emits_profiles_per_horizon(self, manifest):
        man, out = manifest
        rows = (out / "seed-0" / "deviations.csv").read_text().splitlines()
        assert rows[0] == "N,offset,deviation"
        Ns = {int(r.split(",")[0]) for r in rows[1:]}
        assert Ns == {10, 20, 30}

    def test_interior_deviation_is_tiny(self, manifest):
        man, _ = manifest
        mids = {row["scheme"]: row.get("midpoint_dev") for row in man["metrics"]
                if "midpoint_dev" in row}
        assert mids["window-N30"] < 1e-3
        boundary = [row["boundary_dev"] for row in man["metrics"] if "boundary_dev" in row]
        assert min(boundary) > 0.1

    def test_manifest_written(self, manifest):
        man, out = manifest
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk["config_digest"] == man["config_digest"]
        assert not (out / "manifest.partial").exists()


@pytest.fixture(scope="module")
def reactor_preset_runs(tmp_path_factory):
    overrides = {"T": 60, "Ns": [10, 20]}
    out1 = tmp_path_factory.mktemp("reactor1")
    out2 = tmp_path_factory.mktemp("reactor2")
    m1 = run_preset("batch-reactor", overrides=overrides, seeds=[0, 1], out_dir=out1)
    m2 = run_preset("batch-reactor", overrides=overrides, seeds=[0, 1], out_dir=out2)
    return m1, m2, out1, out2


class TestReactorPresetSmall:
    @pytest.fixture()
    def runs(self, reactor_preset_runs):
        return reactor_preset_runs

    def test_metric_values_reproduce_bit_identically(self, runs):
        m1, m2, *_ = runs
        v1 = [(r["scheme"], r.get("N"), r.get("sse"), r.get("J")) for r in m1["metrics"]]
        v2 = [(r["scheme"], r.get("N"), r.get("sse"), r.get("J")) for r in m2["metrics"]]
        assert v1 == v2

    def test_digests_track_inputs(self, runs, tmp_path_factory):
        m1, m2, *_ = runs
        assert m1["config_digest"] == m2["config_digest"]
        assert m1["truth_digest"] == m2["truth_digest"]
        out3 = tmp_path_factory.mktemp("reactor3")
        m3 = run_preset("batch-reactor", overrides={"T": 61, "Ns": [10, 20]},
                        seeds=[0, 1], out_dir=out3)
        assert m3["config_digest"] != m1["config_digest"]

    def test_compare_identical_runs_zero_delta(self, runs):
        m1, m2, *_ = runs
        table = compare([m1, m2])
        for row in table["rows"]:
            if row["deterministic"]:
                assert row["max_delta"] == 0.0

    def test_compare_single_manifest_echoes_summary(self, runs):
        m1, *_ = runs
        table = compare([m1])
        assert all(row["max_delta"] == 0.0 for row in table["rows"])

    def test_compare_rejects_mismatched_truth(self, runs, tmp_path_factory):
        m1, *_ = runs
        out = tmp_path_factory.mktemp("reactor_other")
        other = run_preset("batch-reactor", overrides={"T": 60, "Ns": [10, 20]},
                           seeds=[2], out_dir=out)
        with pytest.raises(ValidationError):
            compare([m1, other])

    def test_partial_marker_on_failure(self, tmp_path):
        with pytest.raises(Exception):
            run_preset("batch-reactor", overrides={"T": 60, "Ns": [10, 20],
                                                   "x0": [99.0, 99.0, 99.0]},
                       seeds=[0], out_dir=tmp_path)
        assert (tmp_path / "manifest.partial").exists()


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "mhekit.cli", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def cli_workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "scalar.json"
    cfg.write_text(json.dumps({
        "noise": {"w_bounds": [0], "v_bounds": [0], "w_constant": [1], "v_constant": [1]},
        "x0": [1.0],
    }))
    res = run_cli("simulate", "--model", "scalar", "--profile", "zero", "--T", "20",
                  "--seed", "0", "--out", str(d / "batch"), "--config", str(cfg))
    assert res.returncode == 0, res.stderr
    return d


class TestCli:
    @pytest.fixture()
    def workdir(self, cli_workdir):
        return cli_workdir

    def test_estimate_and_analyze_pipeline(self, workdir):
        d = workdir
        for scheme, extra in [("mhe", ["--N", "10"]),
                              ("dmhe", ["--N", "10", "--delta", "3"]),
                              ("ihe", []),
                              ("ae", ["--N", "10", "--delta", "0"]),
                              ("kf", []), ("fis", []), ("fie", [])]:
            res = run_cli("estimate", "--in", str(d / "batch"), "--scheme", scheme,
                          "--out", str(d / f"est_{scheme}"), *extra)
            assert res.returncode == 0, f"{scheme}: {res.stderr}"
        res = run_cli("analyze", "--estimates", str(d / "est_mhe"), str(d / "est_dmhe"),
                      "--truth", str(d / "batch"), "--benchmark", str(d / "est_ihe"),
                      "--metrics", "sse,perf,regret,turnpike", "--out", str(d / "metrics"))
        assert res.returncode == 0, res.stderr
        assert (d / "metrics" / "sse.csv").exists()
        assert (d / "metrics" / "regret.csv").exists()

    def test_estimate_mhe_prior(self, workdir):
        d = workdir
        res = run_cli("estimate", "--in", str(d / "batch"), "--scheme", "mhe-prior",
                      "--N", "6", "--prior", "turnpike", "--weight-update", "ekf",
                      "--out", str(d / "est_prior"))
        assert res.returncode == 0, res.stderr

    def test_validation_errors_exit_2(self, workdir):
        res = run_cli("estimate", "--in", str(workdir / "batch"), "--scheme", "mhe",
                      "--out", str(workdir / "x"))
        assert res.returncode == 2  # missing --N

    def test_solver_failures_exit_3(self, tmp_path):
        # an unobservable one-point batch of a 2-state/1-output system makes
        # the exact benchmark solve fail
        cfg = tmp_path / "noise.json"
        cfg.write_text(json.dumps({"noise": {"w_bounds": [0, 0], "v_bounds": [0]},
                                   "x0": [0.0, 0.0]}))
        res = run_cli("simulate", "--model", "lti:2:1:1:0", "--profile", "zero",
                      "--T", "0", "--seed", "0", "--out", str(tmp_path / "b"),
                      "--config", str(cfg))
        assert res.returncode == 0, res.stderr
        res = run_cli("estimate", "--in", str(tmp_path / "b"), "--scheme", "ihe",
                      "--out", str(tmp_path / "e"))
        assert res.returncode == 3, (res.returncode, res.stderr)

    def test_preset_list(self):
        res = run_cli("preset", "list")
        assert res.returncode == 0
        assert "motivating-scalar" in res.stdout

    def test_preset_run_and_compare(self, tmp_path):
        res = run_cli("preset", "run", "motivating-scalar", "--out", str(tmp_path / "p1"))
        assert res.returncode == 0, res.stderr
        res = run_cli("preset", "run", "motivating-scalar", "--out", str(tmp_path / "p2"))
        assert res.returncode == 0, res.stderr
        res = run_cli("compare", str(tmp_path / "p1" / "manifest.json"),
                      str(tmp_path / "p2" / "manifest.json"))
        assert res.returncode == 0, res.stderr
        assert "max_delta 0" in res.stdout
