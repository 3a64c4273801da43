# Metrics, per-trial random streams, the worker pool and sweep results

import math

import numpy as np
import pytest

from phybench.errors import InvalidInputError
from phybench.experiments import (CSV_COLUMNS, ExperimentConfig, ExperimentName, RunOptions, SweepResult,
                                  new_result, registry, run_sweep)
from phybench.exp_noma import NomaScenario
from phybench.metrics import MetricKind, MetricValue, compute_metric, mean_with_stderr
from phybench.montecarlo import STREAM_EVAL, TrialRunner, derived_seed, trial_rng


def _cfg(**changes):
    base = dict(name=ExperimentName.NOMA_DETECTION, snr_grid_db=(0.0, 10.0), trials_per_point=8,
                master_seed=3, scenario=NomaScenario())
    base.update(changes)
    return ExperimentConfig(**base)


def test_metrics():
    results = []
    ber = compute_metric(MetricKind.BER, np.array([0, 1, 1, 0]), np.array([0, 1, 0, 0]))
    results.append(("BER value", ber.value == 0.25 and ber.count == 4))
    results.append(("BER stderr", math.isclose(ber.stderr, math.sqrt(0.25 * 0.75 / 4))))
    bler = compute_metric(MetricKind.BLER, np.zeros((3, 4)), np.array([[0, 0, 0, 0], [0, 1, 0, 0], [1, 1, 0, 0]]))
    results.append(("BLER", math.isclose(bler.value, 2 / 3) and bler.count == 3))
    mse = compute_metric(MetricKind.MSE_DEG2, np.array([10.0, 20.0]), np.array([11.0, 17.0]))
    results.append(("MSE", mse.value == 5.0))
    nmse = compute_metric(MetricKind.NMSE, np.array([[1 + 1j, 0.0]]), np.array([[1.0, 0.0]]))
    results.append(("NMSE", math.isclose(nmse.value, 0.5)))
    rate = compute_metric(MetricKind.RATE, None, np.array([1.0, 3.0]))
    results.append(("rate mean", rate.value == 2.0 and math.isclose(rate.stderr, 1.0)))
    results.append(("single sample stderr", mean_with_stderr([4.0]) == MetricValue(4.0, 0.0, 1)))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"

    with pytest.raises(InvalidInputError):
        compute_metric(MetricKind.BER, np.zeros(3), np.zeros(4))
    with pytest.raises(InvalidInputError):
        compute_metric(MetricKind.BER, np.zeros(0), np.zeros(0))


def test_random_streams_are_independent_and_stable():
    a = trial_rng(1, STREAM_EVAL, 0, 5).random(3)
    b = trial_rng(1, STREAM_EVAL, 0, 5).random(3)
    c = trial_rng(1, STREAM_EVAL, 0, 6).random(3)
    d = trial_rng(1, STREAM_EVAL, 1, 5).random(3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)
    assert derived_seed(1, 1, 0) == derived_seed(1, 1, 0) != derived_seed(1, 1, 1)


def test_trial_runner_order_and_errors():
    def work(i):
        return trial_rng(0, STREAM_EVAL, 0, i).random()

    serial = TrialRunner(1).map(work, 50)
    threaded = TrialRunner(4).map(work, 50)
    assert serial == threaded

    def flaky(i):
        if i in (7, 3):
            raise ValueError(f"trial {i}")
        return i

    with pytest.raises(ValueError, match="trial 3"):
        TrialRunner(3).map(flaky, 10)
    with pytest.raises(InvalidInputError):
        TrialRunner(0)


def test_run_sweep_independent_of_workers():
    cfg = _cfg()

    def trial(si, snr, rng):
        bits = rng.integers(0, 2, 100)
        flips = rng.random(100) < 0.5 * 10.0 ** (-snr / 10.0)
        return {("noisy", MetricKind.BER): (bits, bits ^ flips),
                ("perfect", MetricKind.BER): (bits, bits)}

    results = []
    for workers in (1, 3):
        r = new_result(cfg)
        run_sweep(cfg, RunOptions(workers=workers), r, trial)
        results.append(r.to_csv())
    assert results[0] == results[1]

    r = new_result(cfg)
    run_sweep(cfg, RunOptions(), r, trial)
    assert r.methods == ["noisy", "perfect"]
    snr, value, _ = r.curve("perfect")
    assert snr.tolist() == [0.0, 10.0] and value.tolist() == [0.0, 0.0]
    assert r.value("noisy", 0.0).value > r.value("noisy", 10.0).value
    assert r.value("noisy", 0.0).trials == 8


def test_csv_layout():
    cfg = _cfg()
    r = SweepResult(experiment=cfg.name, seed=cfg.master_seed, config_hash=cfg.config_hash())
    r.add("b_method", 10.0, MetricKind.BER, MetricValue(0.125, 0.01, 80), 8)
    r.add("a_method", 0.0, MetricKind.RATE, MetricValue(1.5, 0.0, 1), 0)
    r.add("b_method", -5.0, MetricKind.BER, MetricValue(-0.0, 0.0, 80), 8)
    lines = r.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1] == f"noma_detection,b_method,-5,BER,0,0,8,3,{cfg.config_hash()}"
    assert lines[2].startswith("noma_detection,b_method,10,BER,0.125,0.01,8,3,")
    assert lines[3].startswith("noma_detection,a_method,0,rate_bps_hz,1.5,0,0,3,")
    with pytest.raises(InvalidInputError):
        r.add("a_method", 0.0, MetricKind.RATE, MetricValue(1.0, 0.0, 1), 0)


def test_experiment_config_validation_and_hash():
    cfg = _cfg()
    assert len(cfg.config_hash()) == 16
    assert cfg.config_hash() == _cfg().config_hash()
    assert cfg.config_hash() != _cfg(master_seed=4).config_hash()
    assert cfg.train_config(0).seed != cfg.train_config(1).seed
    assert cfg.train_config(0).seed != cfg.init_seed(0)
    assert cfg.train_config(0, learning_rate=0.5).learning_rate == 0.5
    for bad in (dict(snr_grid_db=()), dict(snr_grid_db=(5.0, 0.0)), dict(snr_grid_db=(0.0, 0.0)),
                dict(trials_per_point=0), dict(master_seed=-1)):
        with pytest.raises(InvalidInputError):
            _cfg(**bad)


def test_registry_lists_every_experiment():
    reg = registry()
    assert list(reg) == list(ExperimentName)
    for name, entry in reg.items():
        cfg = entry.default_config()
        assert cfg.name is name
        assert entry.generate_datasets is not None, name
