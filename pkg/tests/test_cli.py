"""End-to-end command-line runs: exit codes, artifacts, determinism."""

import json
import pathlib
import textwrap

import numpy as np
import pytest

from qmslab import cli

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"
QUBIT = str(CONFIGS / "qubit_ad.yaml")


def read_manifest(out):
    with open(pathlib.Path(out) / "manifest.json") as fh:
        return json.load(fh)


def test_check_model_run(tmp_path):
    out = tmp_path / "check"
    rc = cli.main(["check-model", QUBIT, "--samples", "5",
                   "--out", str(out)])
    assert rc == 0
    man = read_manifest(out)
    assert man["command"] == "check-model"
    assert man["summary"]["n_fail"] == 0
    assert "out" not in man["config"]
    names = {c["name"] for c in man["checks"]}
    assert {"detailed_balance", "stationarity",
            "ep-route-agreement"} <= names
    assert (out / "reports.json").exists()
    assert (out / "timing.txt").exists()


def test_decay_run_and_determinism(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        rc = cli.main(["decay", QUBIT, "--samples", "5", "--seed", "3",
                       "--t-max", "2.0", "--n-times", "12",
                       "--out", str(out)])
        assert rc == 0
        outs.append(out)
    m1 = (outs[0] / "manifest.json").read_bytes()
    m2 = (outs[1] / "manifest.json").read_bytes()
    assert m1 == m2
    r1 = (outs[0] / "reports.json").read_bytes()
    assert r1 == (outs[1] / "reports.json").read_bytes()
    assert (outs[0] / "figures").is_dir()
    data = np.loadtxt(outs[0] / "decay.csv", delimiter=",", comments="#",
                      skiprows=2)
    assert data.shape[0] == 12
    # entropy column is nonincreasing
    assert np.all(np.diff(data[:, 1]) <= 1e-11)


def test_decay_at_fixed_point_is_flat(tmp_path):
    model = tmp_path / "uniform.yaml"
    model.write_text(textwrap.dedent("""\
        model:
          dim: 2
          sigma: uniform
          jumps: {preset: complete}
        """))
    out = tmp_path / "flat"
    rc = cli.main(["decay", str(model), "--rho", "uniform",
                   "--samples", "5", "--out", str(out), "--no-figures"])
    assert rc == 0
    data = np.loadtxt(out / "decay.csv", delimiter=",", comments="#",
                      skiprows=2)
    np.testing.assert_allclose(data[:, 1], 0.0, atol=1e-12)
    np.testing.assert_allclose(data[:, 2], 0.0, atol=1e-12)
    assert not (out / "figures").exists()


def test_estimate_mlsi(tmp_path):
    out = tmp_path / "est"
    rc = cli.main(["estimate", QUBIT, "--kind", "mlsi", "--samples", "20",
                   "--out", str(out)])
    assert rc == 0
    with open(out / "estimate.json") as fh:
        est = json.load(fh)
    assert est["kind"] == "mlsi" and est["value"] > 0


def test_estimate_sdpi_from_channel_file(tmp_path):
    out = tmp_path / "sdpi"
    rc = cli.main(["estimate", str(CONFIGS / "depolarizing.yaml"),
                   "--kind", "sdpi", "--samples", "20", "--out", str(out)])
    assert rc == 0
    man = read_manifest(out)
    names = {c["name"] for c in man["checks"]}
    assert "sdpi-below-one" in names


def test_hs_verify_same_model_twice(tmp_path):
    out = tmp_path / "hs"
    rc = cli.main(["hs-verify", QUBIT, QUBIT, "--samples", "5",
                   "--out", str(out), "--no-figures"])
    assert rc == 0
    man = read_manifest(out)
    np.testing.assert_allclose(man["extra"]["factor_total"], 1.0,
                               atol=1e-10)
    assert man["summary"]["n_fail"] == 0


def test_hs_verify_pair(tmp_path):
    out = tmp_path / "pair"
    rc = cli.main(["hs-verify", str(CONFIGS / "qutrit_base.yaml"),
                   str(CONFIGS / "qutrit_perturbed.yaml"),
                   "--samples", "5", "--out", str(out), "--no-figures"])
    assert rc == 0
    man = read_manifest(out)
    assert man["extra"]["factor_total"] > 1.0
    assert man["n_diagnostics"] >= 1


def test_stateprep_graph(tmp_path):
    out = tmp_path / "graph"
    rc = cli.main(["stateprep", str(CONFIGS / "graph_complete3.yaml"),
                   "--samples", "10", "--out", str(out), "--no-figures"])
    assert rc == 0
    man = read_manifest(out)
    names = {c["name"] for c in man["checks"]}
    assert "graph-factor-consistency" in names
    assert "complete-graph-ratio" in names


def test_stateprep_history(tmp_path):
    out = tmp_path / "hist"
    rc = cli.main(["stateprep", str(CONFIGS / "history_qubit.yaml"),
                   "--samples", "10", "--out", str(out), "--no-figures"])
    assert rc == 0
    man = read_manifest(out)
    assert man["summary"]["n_fail"] == 0
    assert man["extra"]["history"]["kappa"] > 0
    assert (out / "preparation.csv").exists()


def test_thermal_pipeline(tmp_path):
    out = tmp_path / "thermal"
    rc = cli.main(["thermal", str(CONFIGS / "gibbs_ladder4.yaml"),
                   "--samples", "5", "--out", str(out), "--no-figures"])
    assert rc == 0
    man = read_manifest(out)
    names = {c["name"] for c in man["checks"]}
    assert "thermal-factor-consistency" in names
    assert "flag-marginalization" in names
    assert (out / "flagged.csv").exists()
    assert (out / "flag_doubling.csv").exists()


def test_exit_code_two_paths(tmp_path):
    assert cli.main(["check-model", str(tmp_path / "nope.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("model: [unbalanced\n")
    assert cli.main(["check-model", str(bad)]) == 2
    unknown = tmp_path / "unknown.yaml"
    unknown.write_text("command: decay\nmystery: 1\n")
    assert cli.main(["decay", QUBIT, "--config", str(unknown),
                     "--out", str(tmp_path / "u")]) == 2
    wrong = tmp_path / "wrong.yaml"
    wrong.write_text("command: decay\n")
    assert cli.main(["check-model", QUBIT, "--config", str(wrong),
                     "--out", str(tmp_path / "w")]) == 2
    # missing positional input
    assert cli.main(["decay", "--out", str(tmp_path / "m")]) == 2


def test_exit_code_one_on_forced_failure(tmp_path):
    out = tmp_path / "fail"
    rc = cli.main(["decay", QUBIT, "--samples", "5", "--tol-abs", "-1.0",
                   "--out", str(out), "--no-figures"])
    assert rc == 1
    man = read_manifest(out)
    assert man["summary"]["n_fail"] > 0


def test_config_file_drives_run(tmp_path):
    cfgp = tmp_path / "run.yaml"
    cfgp.write_text(textwrap.dedent(f"""\
        command: decay
        model: {QUBIT}
        samples: 5
        seed: 11
        times: [0.0, 0.3, 0.9]
        figures: false
        """))
    out = tmp_path / "cfg-out"
    rc = cli.main(["decay", "--config", str(cfgp), "--out", str(out)])
    assert rc == 0
    data = np.loadtxt(out / "decay.csv", delimiter=",", comments="#",
                      skiprows=2)
    assert data.shape[0] == 3
    man = read_manifest(out)
    assert man["config"]["seed"] == 11
