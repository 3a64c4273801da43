# Channel generators, OFDM modem and AWGN

import logging
import math

import numpy as np
import pytest

from phybench import channel
from phybench.channel import (OfdmConfig, SvChannelParams, UlaConfig, apply_awgn, apply_multipath,
                              channel_frequency_response, complex_gaussian, noise_variance,
                              ofdm_demodulate, ofdm_modulate, sample_multipath_taps,
                              sample_sv_channel, sample_uplink_channel, steering_vector)
from phybench.errors import InvalidInputError


def test_ofdm_with_cyclic_prefix_is_one_tap_per_subcarrier():
    rng = np.random.default_rng(0)
    results = []
    for cp, taps in ((16, 16), (15, 16), (4, 1)):
        cfg = OfdmConfig(num_subcarriers=64, cp_length=cp, num_taps=taps, pilot_spacing=8)
        h = sample_multipath_taps(taps, rng)
        x = complex_gaussian(rng, 64)
        y = ofdm_demodulate(apply_multipath(ofdm_modulate(x, cfg), h), cfg)
        expected = channel_frequency_response(h, 64) * x
        results.append((f"cp={cp} L={taps}", np.allclose(y, expected, atol=1e-10)))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_ofdm_config_validation():
    cfg = OfdmConfig(num_subcarriers=64, cp_length=16, num_taps=16, pilot_spacing=8)
    assert cfg.pilot_positions.tolist() == list(range(0, 64, 8))
    assert cfg.symbol_length == 80
    assert not OfdmConfig(num_subcarriers=64, cp_length=4, num_taps=16, pilot_spacing=8).isi_free
    with pytest.raises(InvalidInputError):
        OfdmConfig(num_subcarriers=64, cp_length=16, num_taps=16, pilot_spacing=5)
    with pytest.raises(InvalidInputError):
        ofdm_modulate(np.zeros(32), cfg)


def test_short_prefix_warns_once(caplog):
    channel._warn_isi.cache_clear()
    with caplog.at_level(logging.WARNING, logger="phybench.channel"):
        for _ in range(3):
            OfdmConfig(num_subcarriers=64, cp_length=2, num_taps=9, pilot_spacing=8)
        OfdmConfig(num_subcarriers=64, cp_length=8, num_taps=9, pilot_spacing=8)
    warnings = [r for r in caplog.records if "ISI" in r.getMessage()]
    assert len(warnings) == 1
    assert "cp_length=2" in warnings[0].getMessage()


def test_multipath_taps_unit_power_profile():
    rng = np.random.default_rng(1)
    taps = np.array([sample_multipath_taps(8, rng) for _ in range(20000)])
    power = np.mean(np.abs(taps) ** 2, axis=0)
    assert abs(power.sum() - 1.0) < 0.03
    assert np.all(np.diff(power) < 0)


def test_awgn_variance_and_infinite_snr():
    rng = np.random.default_rng(2)
    s = np.ones(200000, dtype=np.complex128)
    y = apply_awgn(s, 10.0, 1.0, rng)
    assert abs(np.var(y - s) - 0.1) < 0.002
    clean = apply_awgn(s, math.inf, 1.0, rng)
    assert np.array_equal(clean, s) and clean is not s
    assert noise_variance(math.inf, 2.0) == 0.0
    with pytest.raises(InvalidInputError):
        noise_variance(0.0, 0.0)


def test_steering_vector_and_uplink_channel():
    ula = UlaConfig(num_antennas=8)
    assert np.allclose(steering_vector(0.0, ula), 1.0)
    a = steering_vector(math.radians(30.0), ula)
    assert np.allclose(np.abs(a), 1.0)
    # half-wavelength spacing: phase step of pi sin(theta) between elements
    assert np.allclose(a[1:] / a[:-1], np.exp(-1j * math.pi * 0.5))
    with pytest.raises(InvalidInputError):
        steering_vector(2.0, ula)
    with pytest.raises(InvalidInputError):
        UlaConfig(num_antennas=1)

    rng = np.random.default_rng(3)
    ch = sample_uplink_channel(ula, 1, rng, angles_rad=[math.radians(30.0)], gains=[2.0])
    assert ch.h.shape == (8, 1)
    assert np.allclose(ch.h[:, 0], 2.0 * a)


def test_uplink_channel_power():
    ula = UlaConfig(num_antennas=8)
    rng = np.random.default_rng(12)
    results = []
    for paths in (1, 3):
        power = [float(np.sum(np.abs(sample_uplink_channel(ula, paths, rng).h) ** 2)) for _ in range(20000)]
        results.append((f"{paths} path(s): {np.mean(power):.3f}", abs(np.mean(power) / 8 - 1.0) < 0.05))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_uplink_pinning_keeps_generator_in_step():
    ula = UlaConfig(num_antennas=4)
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    sample_uplink_channel(ula, 2, r1)
    sample_uplink_channel(ula, 2, r2, angles_rad=[0.1, 0.2])
    assert r1.random() == r2.random()


def test_sv_channel_power_normalization():
    params = SvChannelParams(num_tx=16, num_rx=4, num_clusters=3, rays_per_cluster=4, angle_spread_deg=7.5)
    rng = np.random.default_rng(4)
    energies = [np.linalg.norm(sample_sv_channel(params, rng).h) ** 2 for _ in range(2000)]
    assert abs(np.mean(energies) / (16 * 4) - 1.0) < 0.05


def test_sv_channel_single_path_is_rank_one():
    params = SvChannelParams(num_tx=8, num_rx=4, num_clusters=1, rays_per_cluster=1, angle_spread_deg=0.0)
    ch = sample_sv_channel(params, np.random.default_rng(5), aoa_rad=[0.3], aod_rad=[-0.4], gains=[1.0])
    s = np.linalg.svd(ch.h, compute_uv=False)
    assert s[1] < 1e-10 * s[0]
    # unit-norm responses and gamma = sqrt(Nt Nr)
    assert abs(s[0] - math.sqrt(32)) < 1e-10
    assert ch.paths[0].aoa_rad == 0.3 and ch.paths[0].aod_rad == -0.4
