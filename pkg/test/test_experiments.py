# End-to-end pipelines at toy sizes: row layout, determinism, noiseless limits

import dataclasses
import math

import numpy as np
import pytest

from phybench.channel import UlaConfig, complex_gaussian, sample_sv_channel, steering_vector
from phybench.constellation import constellation
from phybench.errors import InvalidInputError
from phybench.exp_autoencoder import (AutoencoderScenario, ebn0_to_dimension_snr_db, hamming_hard_blocks,
                                      message_bits, network_spec)
from phybench.exp_doa import (DoaScenario, GainScenario, doa_features, ls_gain_estimate, mrc_detect,
                              nearest_cell, observe)
from phybench.exp_mmwave import (MmwaveScenario, detect_all, hybrid_gmd_target, phase_targets,
                                 phases_from_output, relative_phases)
from phybench.exp_noma import NomaScenario, analytic_sum_rate
from phybench.exp_ofdm import OfdmScenario
from phybench.experiments import ExperimentName, NetworkConfig, RunOptions, registry, run_experiment
from phybench.hamming import hamming_bler_hard
from phybench.metrics import MetricKind
from phybench.precoding import baseband_from_phases, gmd_precoder, hybrid_decompose

TINY_SCENARIOS = {
    ExperimentName.OFDM_RECEIVER: OfdmScenario(num_subcarriers=8, cp_length=2, num_taps=2, pilot_spacing=1,
                                               reduced_pilot_spacing=4, train_frames=6, validation_frames=2),
    ExperimentName.NOMA_DETECTION: NomaScenario(symbols_per_frame=8, train_frames=6, validation_frames=2),
    ExperimentName.AUTOENCODER_74: AutoencoderScenario(train_repeats=2, validation_repeats=1, blocks_per_trial=50),
    ExperimentName.DOA_ESTIMATION: DoaScenario(num_antennas=8, music_grid_step_deg=0.5, train_samples=20,
                                               validation_samples=5, test_samples=5, samples_per_trial=2),
    ExperimentName.GAIN_ESTIMATION: GainScenario(num_antennas=8, music_grid_step_deg=0.5, train_samples=20,
                                                 validation_samples=5, test_samples=5, samples_per_trial=2,
                                                 data_symbols=8, doa_hidden_sizes=(8,)),
    ExperimentName.MMWAVE_PRECODING: MmwaveScenario(num_tx=8, num_rx=4, hybrid_iterations=3, vectors_per_trial=4,
                                                    train_channels=10, validation_channels=2, test_channels=2),
}


def tiny_config(name: ExperimentName, snr_grid_db=(0.0, 20.0), trials=2, seed=5):
    entry = registry()[name]
    hidden = (8, 8) if name is ExperimentName.AUTOENCODER_74 else (8,)
    return dataclasses.replace(entry.default_config(seed), snr_grid_db=snr_grid_db, trials_per_point=trials,
                               scenario=TINY_SCENARIOS[name], network=NetworkConfig(hidden_sizes=hidden),
                               train=dataclasses.replace(entry.train, num_iterations=5, batch_size=8,
                                                         validation_interval=2))


EXPECTED_METHODS = {
    ExperimentName.OFDM_RECEIVER: 6,
    ExperimentName.NOMA_DETECTION: 15,
    ExperimentName.AUTOENCODER_74: 4,
    ExperimentName.DOA_ESTIMATION: 4,
    ExperimentName.GAIN_ESTIMATION: 7,
    ExperimentName.MMWAVE_PRECODING: 5,
}


def test_every_pipeline_runs_and_is_reproducible():
    results = []
    for name in ExperimentName:
        cfg = tiny_config(name)
        a = run_experiment(cfg, RunOptions())
        b = run_experiment(cfg, RunOptions(workers=2))
        rows = a.result.rows
        results.append((f"{name.value} methods", len(a.result.methods) == EXPECTED_METHODS[name]))
        results.append((f"{name.value} rows", len(rows) == 2 * EXPECTED_METHODS[name]))
        results.append((f"{name.value} finite", all(math.isfinite(r.value) for r in rows)))
        results.append((f"{name.value} same CSV across workers", a.result.to_csv() == b.result.to_csv()))
        results.append((f"{name.value} models", set(a.models) == set(b.models) and len(a.models) >= 1))
        results.append((f"{name.value} same weights", all(
            np.array_equal(a.models[k].weights[0], b.models[k].weights[0]) for k in a.models)))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_dataset_generation_is_deterministic():
    results = []
    for name in ExperimentName:
        entry = registry()[name]
        cfg = tiny_config(name)
        first, second = entry.generate_datasets(cfg), entry.generate_datasets(cfg)
        results.append((f"{name.value} names", list(first) == list(second)))
        for key, ds in first.items():
            results.append((f"{name.value}/{key} rows", np.array_equal(ds.features, second[key].features)))
            results.append((f"{name.value}/{key} labels", np.array_equal(ds.labels, second[key].labels)))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_noma_limits():
    cfg = tiny_config(ExperimentName.NOMA_DETECTION, snr_grid_db=(0.0, 80.0))
    result = run_experiment(cfg).result
    for user in range(2):
        assert result.value(f"sic_perfect_u{user}", 80.0).value == 0.0
    analytic = result.value("analytic_sum", 0.0)
    assert analytic.trials == 0 and analytic.stderr == 0.0
    assert math.isclose(analytic.value, analytic_sum_rate(cfg.scenario, 0.0))
    with pytest.raises(InvalidInputError):
        NomaScenario(alpha=1.0)


def test_autoencoder_pieces():
    assert math.isclose(ebn0_to_dimension_snr_db(0.0), 10 * math.log10(8 / 7))
    assert message_bits([0, 5, 15]).tolist() == [[0, 0, 0, 0], [0, 1, 0, 1], [1, 1, 1, 1]]
    messages = np.arange(16)
    assert np.array_equal(hamming_hard_blocks(messages, 40.0, np.random.default_rng(0)), message_bits(messages))

    cfg = tiny_config(ExperimentName.AUTOENCODER_74)
    spec = network_spec(cfg)
    assert spec.layer_sizes == (16, 8, 7, 8, 16)
    assert spec.noise_layer.position == 2 and spec.noise_layer.normalize_energy
    with pytest.raises(InvalidInputError):
        network_spec(dataclasses.replace(cfg, network=NetworkConfig(hidden_sizes=(8,))))

    result = run_experiment(dataclasses.replace(cfg, snr_grid_db=(0.0, 30.0))).result
    assert result.value("hamming_hard", 30.0).value == 0.0
    assert result.value("uncoded_bpsk", 30.0).value == 0.0
    assert math.isclose(result.value("hamming_hard_analytic", 0.0).value, float(hamming_bler_hard(0.0)))


def test_doa_and_gain_pieces():
    ula = UlaConfig(num_antennas=8)
    a = steering_vector(math.radians(-17.0), ula)
    g = 0.3 - 1.1j
    results = [
        ("features ignore gain", np.allclose(doa_features(g * a), doa_features(a))),
        ("LS gain exact without noise", np.allclose(ls_gain_estimate(g * a, -17.0, ula), [g])),
        ("nearest cell", nearest_cell([-60.0, 0.4, 59.6], np.arange(-60.0, 61.0)).tolist() == [0, 60, 120]),
    ]
    c = constellation("QPSK")
    labels = np.array([0, 1, 2, 3])
    results.append(("MRC noiseless", np.array_equal(mrc_detect(g * a, np.outer(g * a, c.points[labels]), c), labels)))

    scn = DoaScenario(num_antennas=8, num_snapshots=4)
    obs = observe(scn, math.inf, np.random.default_rng(1), theta_deg=25.0)
    results.append(("pinned angle", obs.theta_deg == 25.0))
    results.append(("noiseless snapshots", np.allclose(obs.snapshots, obs.h[:, None])))
    results.append(("h = g a", np.allclose(obs.h, obs.gain * steering_vector(math.radians(25.0), scn.ula()))))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"

    cfg = tiny_config(ExperimentName.DOA_ESTIMATION, snr_grid_db=(0.0, 40.0))
    result = run_experiment(cfg).result
    assert result.value("music", 40.0).value < 0.3
    assert result.value("dnn", 0.0).trials == 2
    # TEST split: 5 samples over 2 grid points
    assert result.value("dnn_heldout", 40.0).trials == 2
    assert result.value("music_heldout", 40.0).value < 0.3

    cfg = tiny_config(ExperimentName.GAIN_ESTIMATION, snr_grid_db=(0.0, 60.0))
    result = run_experiment(cfg).result
    assert result.value("mrc_perfect", 60.0).value == 0.0
    assert result.value("chest_ls", 60.0).metric is MetricKind.NMSE
    assert result.value("chest_ls_heldout", 60.0).trials == 2
    assert result.value("chest_ls_heldout", 60.0).metric is MetricKind.NMSE


def test_mmwave_pieces():
    scn = TINY_SCENARIOS[ExperimentName.MMWAVE_PRECODING]
    rng = np.random.default_rng(2)
    h = sample_sv_channel(scn.channel_params(), rng).h
    target = gmd_precoder(h, scn.num_streams).precoder
    split = hybrid_decompose(target, scn.num_rf, scn.hybrid_iterations)

    phases = phases_from_output(phase_targets(split.f_rf), scn.num_tx, scn.num_rf)
    assert phases.shape == (scn.num_tx, scn.num_rf)
    assert np.allclose(np.exp(1j * phases[1:]), np.exp(1j * relative_phases(split.f_rf)))
    assert np.allclose(hybrid_gmd_target(h, scn), phase_targets(split.f_rf))
    # per-column phase offsets are absorbed by the least-squares baseband
    f_rf, f_bb = baseband_from_phases(target, phases)
    assert np.allclose(f_rf @ f_bb, split.precoder, atol=1e-8)

    c = constellation(scn.constellation)
    labels = rng.integers(c.size, size=(scn.num_streams, 6))
    detected = detect_all(h, labels, np.zeros((scn.num_rx, 6)), 10.0, scn, c, None)
    assert sorted(detected) == ["digital_gmd", "digital_svd", "hybrid_gmd", "hybrid_svd"]
    for method, got in detected.items():
        assert np.array_equal(got, labels), method

    with pytest.raises(InvalidInputError):
        MmwaveScenario(num_streams=3, num_rf=2)
    noise = complex_gaussian(rng, (scn.num_rx, 6))
    assert detect_all(h, labels, noise, 10.0, scn, c, None)["digital_svd"].shape == labels.shape


def test_gmd_beats_svd_and_hybrid_never_beats_digital():
    scn = MmwaveScenario()
    c = constellation(scn.constellation)
    rng = np.random.default_rng(31)
    errors = {snr: {} for snr in (0.0, 5.0, 10.0)}
    bits = 0
    for _ in range(600):
        h = sample_sv_channel(scn.channel_params(), rng).h
        labels = rng.integers(c.size, size=(scn.num_streams, scn.vectors_per_trial))
        noise = complex_gaussian(rng, (scn.num_rx, scn.vectors_per_trial))
        truth = c.labels_to_bits(labels)
        bits += truth.size
        for snr, counts in errors.items():
            for method, got in detect_all(h, labels, noise, snr, scn, c, None).items():
                counts[method] = counts.get(method, 0) + int(np.count_nonzero(c.labels_to_bits(got) != truth))

    def ber(snr, method):
        p = errors[snr][method] / bits
        return p, p * (1 - p) / bits

    results = []
    gmd, gmd_var = ber(10.0, "digital_gmd")
    svd, svd_var = ber(10.0, "digital_svd")
    results.append((f"GMD {gmd:.2e} <= SVD {svd:.2e} at 10 dB", gmd + 3 * math.sqrt(gmd_var + svd_var) <= svd))
    for snr in errors:
        for kind in ("svd", "gmd"):
            hyb, hyb_var = ber(snr, f"hybrid_{kind}")
            dig, dig_var = ber(snr, f"digital_{kind}")
            results.append((f"hybrid {kind} {hyb:.2e} vs digital {dig:.2e} at {snr:g} dB",
                            hyb >= dig - 3 * math.sqrt(hyb_var + dig_var)))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_trained_autoencoder_tracks_hamming():
    entry = registry()[ExperimentName.AUTOENCODER_74]
    cfg = dataclasses.replace(entry.default_config(1), snr_grid_db=(6.0,), trials_per_point=50)
    outcome = run_experiment(cfg)
    model = outcome.models["autoencoder"]
    # noise disabled: every message comes back
    assert np.array_equal(model.classify(np.eye(16)), np.arange(16))
    ae = outcome.result.value("autoencoder", 6.0).value
    hamming = outcome.result.value("hamming_hard_analytic", 6.0).value
    assert ae <= 2.0 * hamming, (ae, hamming)


def test_trained_doa_classifier_improves_with_snr():
    entry = registry()[ExperimentName.DOA_ESTIMATION]
    scn = DoaScenario(music_grid_step_deg=0.5, train_samples=4000, validation_samples=400, test_samples=500)
    cfg = dataclasses.replace(entry.default_config(3), trials_per_point=20, scenario=scn,
                              network=NetworkConfig(hidden_sizes=(64,)),
                              train=dataclasses.replace(entry.train, num_iterations=1500))
    result = run_experiment(cfg).result
    snr, mse, stderr = result.curve("dnn")
    assert snr.tolist() == [0.0, 5.0, 10.0, 15.0, 20.0]
    smoothed = np.convolve(mse, np.ones(3) / 3, mode="valid")
    slack = 3 * float(stderr.max())
    assert np.all(np.diff(smoothed) <= slack), (mse, stderr)
