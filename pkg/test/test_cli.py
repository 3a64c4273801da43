# Command-line surface: listing, runs, dataset generation, gradcheck, exit codes

import json
import logging
from pathlib import Path

import numpy as np
import pytest

from phybench import cli, exp_autoencoder, nn
from phybench.checkpoint import load_checkpoint
from phybench.dataset import load_dataset
from phybench.errors import ExitCode, TrainingDivergedError
from phybench.experiments import ExperimentName

TINY_AE = [
    "snr_grid_db=[0, 30]", "trials_per_point=2", "train_repeats=2", "validation_repeats=1",
    "blocks_per_trial=20", "hidden_sizes=[8, 8]", "num_iterations=5", "batch_size=8",
    "validation_interval=2",
]


@pytest.fixture(autouse=True)
def quiet_env(monkeypatch):
    monkeypatch.setenv("PHYBENCH_PROGRESS", "0")
    monkeypatch.delenv("PHYBENCH_WORKERS", raising=False)
    monkeypatch.delenv("PHYBENCH_OUT", raising=False)


@pytest.fixture
def ae_config(tmp_path):
    path = tmp_path / "ae.cfg"
    path.write_text("[experiment]\nname = autoencoder_74\nmaster_seed = 4\n", encoding="utf-8")
    return path


def _sets(items):
    return [arg for item in items for arg in ("--set", item)]


def test_experiment_list(capsys):
    assert cli.main(["experiment", "list", "--json"]) == ExitCode.OK
    rows = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in rows] == [n.value for n in ExperimentName]
    assert all(r["description"] for r in rows)

    assert cli.main(["experiment", "list"]) == ExitCode.OK
    assert len(capsys.readouterr().out.splitlines()) == len(ExperimentName)


def test_experiment_run_writes_outputs(tmp_path, ae_config, capsys):
    out_root = tmp_path / "out"
    argv = ["experiment", "run", str(ae_config), *_sets(TINY_AE), "--out", str(out_root)]
    assert cli.main(argv) == ExitCode.OK
    out = out_root / Path(capsys.readouterr().out.strip()).name
    results = [
        ("output dir named by experiment", out.is_dir() and out.name.startswith("autoencoder_74-")),
        ("manifest", (out / "manifest.json").is_file()),
        ("results", (out / "results.csv").is_file()),
        ("timing", (out / "timing.json").is_file()),
        ("checkpoint", (out / "autoencoder.phyn").is_file()),
    ]
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 4
    assert out.name.endswith(manifest["config_hash"])
    assert "wall_time_s" in json.loads((out / "timing.json").read_text())
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0].startswith("experiment,")
    assert len(lines) == 1 + 2 * 4

    # same config, more workers: same directory, same rows, same weights
    first_csv = (out / "results.csv").read_text()
    first_net = load_checkpoint(out / "autoencoder.phyn")
    assert cli.main(argv + ["--workers", "2"]) == ExitCode.OK
    assert capsys.readouterr().out.strip().endswith(out.name)
    assert (out / "results.csv").read_text() == first_csv
    again = load_checkpoint(out / "autoencoder.phyn")
    assert all(np.array_equal(a, b) for a, b in zip(first_net.weights, again.weights))


def test_dataset_gen(tmp_path, ae_config, capsys, monkeypatch):
    monkeypatch.setenv("PHYBENCH_OUT", str(tmp_path / "env_out"))
    assert cli.main(["dataset", "gen", str(ae_config), *_sets(TINY_AE)]) == ExitCode.OK
    out = tmp_path / "env_out" / Path(capsys.readouterr().out.strip()).name
    ds = load_dataset(out / "autoencoder.phyd")
    assert ds.features.shape[1] == 16 and ds.labels.shape[1] == 16
    assert (out / "manifest.json").is_file()


def test_config_errors_exit_2(tmp_path, ae_config, monkeypatch):
    nameless = tmp_path / "nameless.cfg"
    nameless.write_text("[experiment]\ntrials_per_point = 2\n", encoding="utf-8")
    out = ["--out", str(tmp_path / "out")]
    assert cli.main(["experiment", "run", str(nameless), *out]) == ExitCode.CONFIG
    assert cli.main(["experiment", "run", str(ae_config), "--set", "seed=3", *out]) == ExitCode.CONFIG
    assert cli.main(["experiment", "run", str(ae_config), "--set", "bogus=1", *out]) == ExitCode.CONFIG
    assert cli.main(["experiment", "run", str(tmp_path / "missing.cfg"), *out]) == ExitCode.CONFIG
    assert cli.main(["dataset", "gen", str(nameless), *out]) == ExitCode.CONFIG

    monkeypatch.setenv("PHYBENCH_WORKERS", "many")
    assert cli.main(["experiment", "run", str(ae_config), *_sets(TINY_AE), *out]) == ExitCode.CONFIG


def test_divergence_exits_3(tmp_path, ae_config, monkeypatch):
    def diverge(*args, **kwargs):
        raise TrainingDivergedError(3, float("nan"))

    monkeypatch.setattr(exp_autoencoder, "train", diverge)
    argv = ["experiment", "run", str(ae_config), *_sets(TINY_AE), "--out", str(tmp_path)]
    assert cli.main(argv) == ExitCode.DIVERGED


def test_gradcheck(capsys, monkeypatch):
    assert cli.main(["gradcheck"]) == ExitCode.OK
    report = capsys.readouterr().out
    assert "FAIL" not in report and "ok" in report

    real_backward = nn.backward

    def skewed(mlp, cache, d_logits):
        grads = real_backward(mlp, cache, d_logits)
        grads.weights[0] = grads.weights[0] * 1.01
        return grads

    monkeypatch.setattr(nn, "backward", skewed)
    assert cli.main(["gradcheck"]) == ExitCode.FAILURE
    assert "FAIL" in capsys.readouterr().out


def test_help_describes_the_tool(capsys):
    assert cli.build_parser().description
    with pytest.raises(SystemExit) as info:
        cli.main(["--help"])
    assert info.value.code == 0
    assert cli.DESCRIPTION in capsys.readouterr().out


def test_config_error_names_the_key(tmp_path, caplog):
    path = tmp_path / "noma.cfg"
    path.write_text("[experiment]\nname = noma_detection\n", encoding="utf-8")
    argv = ["experiment", "run", str(path), "--set", "alpha=1.5", "--out", str(tmp_path / "out")]
    with caplog.at_level(logging.ERROR, logger="phybench.cli"):
        assert cli.main(argv) == ExitCode.CONFIG
    assert "scenario.alpha" in caplog.text
