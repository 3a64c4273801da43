# MUSIC direction finding on a half-wavelength ULA

import numpy as np
import pytest

from phybench.channel import UlaConfig, complex_gaussian
from phybench.doa import angle_grid_deg, music_doa, music_spectrum, snapshot_matrix, spectrum_peaks
from phybench.errors import InvalidInputError


def test_angle_grid():
    g = angle_grid_deg(0.1)
    assert g.size == 1801
    assert g[0] == -90.0 and abs(g[-1] - 90.0) < 1e-9
    assert angle_grid_deg(1.0, 60.0).size == 121
    with pytest.raises(InvalidInputError):
        angle_grid_deg(0.0)


def test_music_resolves_sources_at_20db():
    ula = UlaConfig(num_antennas=16)
    rng = np.random.default_rng(11)
    results = []
    for truth in ((-20.0,), (-20.0, 30.0), (-45.0, 0.0, 12.5)):
        k = len(truth)
        s = complex_gaussian(rng, (k, 64))
        x = snapshot_matrix(truth, ula, s) + complex_gaussian(rng, (16, 64), 0.01)
        est = music_doa(x, k, ula)
        results.append((f"{truth} count", len(est.angles_deg) == k and not est.degenerate))
        results.append((f"{truth} accuracy", np.max(np.abs(np.array(est.angles_deg) - truth)) <= 0.5))
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_music_spectrum_peaks_at_source():
    ula = UlaConfig(num_antennas=8)
    x = snapshot_matrix([10.0], ula, np.ones((1, 4)))
    x = x + 1e-3 * complex_gaussian(np.random.default_rng(0), x.shape)
    grid = angle_grid_deg(1.0)
    p = music_spectrum(x, 1, ula, grid)
    assert grid[np.argmax(p)] == 10.0


def test_spectrum_peaks_include_the_ends():
    results = [
        ("ends and plateau middle", spectrum_peaks(np.array([3.0, 1.0, 2.0, 2.0, 2.0, 0.0, 5.0])).tolist() == [0, 3, 6]),
        ("rising", spectrum_peaks(np.array([1.0, 2.0, 3.0])).tolist() == [2]),
        ("single point", spectrum_peaks(np.array([4.0])).tolist() == [0]),
    ]
    failures = [desc for desc, passed in results if not passed]
    assert not failures, f"Failed: {failures}"


def test_music_ignores_a_common_complex_scale():
    ula = UlaConfig(num_antennas=16)
    rng = np.random.default_rng(13)
    s = complex_gaussian(rng, (2, 64))
    x = snapshot_matrix((-30.0, 30.0), ula, s) + complex_gaussian(rng, (16, 64), 0.01)
    base = music_doa(x, 2, ula)
    scaled = music_doa((2.5 - 4.0j) * x, 2, ula)
    assert np.allclose(scaled.angles_deg, base.angles_deg, atol=0.1 + 1e-9)
    assert all(abs(a - t) <= 0.5 for a, t in zip(base.angles_deg, (-30.0, 30.0)))


def test_music_median_error_at_20db():
    ula = UlaConfig(num_antennas=16)
    rng = np.random.default_rng(14)
    errors = []
    for _ in range(100):
        theta = rng.uniform(-60.0, 60.0)
        s = complex_gaussian(rng, (1, 64))
        x = snapshot_matrix([theta], ula, s) + complex_gaussian(rng, (16, 64), 0.01)
        errors.append(abs(music_doa(x, 1, ula).angles_deg[0] - theta))
    assert float(np.median(errors)) <= 0.2


def test_music_input_checks():
    ula = UlaConfig(num_antennas=4)
    x = complex_gaussian(np.random.default_rng(1), (4, 8))
    with pytest.raises(InvalidInputError):
        music_doa(x, 4, ula)
    with pytest.raises(InvalidInputError):
        music_doa(x[:3], 1, ula)
    with pytest.raises(InvalidInputError):
        music_doa(x[:, :1], 2, ula)
