# INI experiment configs: typing, overrides, defaults and schema errors

from pathlib import Path

import pytest

from phybench.config import coerce_value, dump_config, load_config, parse_overrides
from phybench.constellation import ConstellationKind
from phybench.errors import ConfigError
from phybench.experiments import ExperimentName
from phybench.nn import Activation, LossKind

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_shipped_configs_load():
    paths = sorted(CONFIG_DIR.glob("*.cfg"))
    assert {p.stem for p in paths} == {n.value for n in ExperimentName}
    for path in paths:
        cfg = load_config(path)
        assert cfg.name.value == path.stem
        assert cfg.master_seed == 1


def test_values_typed_by_field(tmp_path):
    path = _write(tmp_path, """
[experiment]
name = NOMA_Detection
snr_grid_db = [0, 7.5, Infinity]
trials_per_point = 3

[scenario]
constellation = 16QAM
pilot_boost_db = [5]

[network]
hidden_sizes = [16, 8.0]
hidden_activation = TANH

[train]
loss = 1
learning_rate = 1e-3
""")
    cfg = load_config(path)
    results = [
        ("name by value, any case", cfg.name is ExperimentName.NOMA_DETECTION),
        ("float list with inf", cfg.snr_grid_db == (0.0, 7.5, float("inf"))),
        ("int", cfg.trials_per_point == 3),
        ("default kept", cfg.master_seed == 0 and cfg.scenario.alpha == 0.8),
        ("enum by value", cfg.scenario.constellation is ConstellationKind.QAM16),
        ("float tuple", cfg.scenario.pilot_boost_db == (5.0,)),
        ("int tuple", cfg.network.hidden_sizes == (16, 8)),
        ("activation by name", cfg.network.hidden_activation is Activation.TANH),
        ("int enum by value", cfg.train.loss is LossKind.SOFTMAX_CROSS_ENTROPY),
        ("float", cfg.train.learning_rate == 1e-3),
    ]
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_booleans(tmp_path):
    for raw, expected in (("off", False), ("YES", True), ("0", False), ("true", True)):
        path = _write(tmp_path, f"[experiment]\nname = autoencoder_74\n[scenario]\nper_example_noise = {raw}\n")
        assert load_config(path).scenario.per_example_noise is expected, raw
    with pytest.raises(ConfigError):
        coerce_value("maybe", True, "scenario.per_example_noise")


def test_overrides(tmp_path):
    path = _write(tmp_path, "[experiment]\nname = noma_detection\n[scenario]\nalpha = 0.7\n")
    overrides = parse_overrides(["alpha=0.9", "experiment.snr_grid_db = [0, 10]", "train.batch_size=16",
                                 "master_seed=12"])
    cfg = load_config(path, overrides)
    assert cfg.scenario.alpha == 0.9
    assert cfg.snr_grid_db == (0.0, 10.0)
    assert cfg.train.batch_size == 16
    assert cfg.master_seed == 12
    # the experiment itself can come from an override
    empty = _write(tmp_path, "[experiment]\n", "empty.cfg")
    assert load_config(empty, [("name", "doa_estimation")]).name is ExperimentName.DOA_ESTIMATION
    with pytest.raises(ConfigError):
        parse_overrides(["alpha"])


def test_dump_then_load_keeps_the_config(tmp_path):
    for path in sorted(CONFIG_DIR.glob("*.cfg")):
        cfg = load_config(path, [("snr_grid_db", "[-5, 0, Infinity]")])
        again = load_config(_write(tmp_path, dump_config(cfg), f"dump_{path.stem}.cfg"))
        assert again == cfg, path.stem
        assert again.config_hash() == cfg.config_hash()


@pytest.mark.parametrize("text, key_path", [
    ("[experiment]\nsnr_grid_db = [0]\n", "experiment.name"),
    ("[experiment]\nname = noma_detection\n[extra]\nx = 1\n", "extra"),
    ("[experiment]\nname = noma_detection\n[scenario]\nbogus = 1\n", "scenario.bogus"),
    ("[experiment]\nname = noma_detection\ntrials_per_point = ten\n", "experiment.trials_per_point"),
    ("[experiment]\nname = noma_detection\ntrials_per_point = 2.5\n", "experiment.trials_per_point"),
    ("[experiment]\nname = noma_detection\n[scenario]\nalpha = nan\n", "scenario.alpha"),
    ("[experiment]\nname = noma_detection\n[scenario]\nconstellation = 8psk\n", "scenario.constellation"),
    ("[experiment]\nname = noma_detection\n[scenario]\nmean_gain_db = 3\n", "scenario.mean_gain_db"),
    ("[experiment]\nname = noma_detection\n[train]\nseed = 3\n", "train.seed"),
    ("[experiment]\nname = noma_detection\n[scenario]\nalpha = 1.5\n", "scenario.alpha"),
    ("[experiment]\nname = noma_detection\ntrials_per_point = 0\n", "experiment.trials_per_point"),
    ("[experiment]\nname = noma_detection\n[train]\nmomentum = 1.0\n", "train.momentum"),
    ("[experiment]\nname = nothing\n", "experiment.name"),
])
def test_schema_errors_name_the_key(tmp_path, text, key_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, text))
    assert info.value.key_path == key_path


def test_override_errors(tmp_path):
    path = _write(tmp_path, "[experiment]\nname = noma_detection\n")
    for key, expected in (("seed", "train.seed"), ("nope", "nope"), ("scenario.nope", "scenario.nope"),
                          ("bogus.alpha", "bogus.alpha")):
        with pytest.raises(ConfigError) as info:
            load_config(path, [(key, "1")])
        assert info.value.key_path == expected
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
