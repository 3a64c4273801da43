# Channel models and signal-level propagation.
#
# ULA steering vectors, multipath uplink channels, Saleh-Valenzuela mmWave
# channels, OFDM (de)modulation with cyclic prefix, tapped-delay multipath
# and AWGN. All samplers take an explicit numpy Generator; nothing here
# touches global random state. Angles are radians.

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .constellation import ConstellationKind
from .errors import InvalidInputError
from .numerics import ComplexMatrix, ComplexVector

logger = logging.getLogger(__name__)


@functools.lru_cache(maxsize=None)
def _warn_isi(cp_length: int, num_taps: int) -> None:
    # once per (cp, taps) pair
    logger.warning("OFDM cp_length=%d < num_taps-1=%d: symbols are not ISI-free", cp_length, num_taps - 1)


ANGLE_TOL = 1e-12


@dataclass(frozen=True)
class UlaConfig:
    num_antennas: int
    element_spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.num_antennas < 2:
            raise InvalidInputError(f"ULA needs at least 2 antennas, got {self.num_antennas}")
        if not self.element_spacing_wavelengths > 0:
            raise InvalidInputError(f"element spacing must be > 0, got {self.element_spacing_wavelengths}")


@dataclass(frozen=True)
class SvChannelParams:
    num_tx: int
    num_rx: int
    num_clusters: int
    rays_per_cluster: int
    angle_spread_deg: float
    carrier_ghz: float = 28.0

    def __post_init__(self):
        for name in ("num_tx", "num_rx", "num_clusters", "rays_per_cluster"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.angle_spread_deg < 0:
            raise InvalidInputError(f"angle spread must be >= 0, got {self.angle_spread_deg}")

    @property
    def num_paths(self) -> int:
        return self.num_clusters * self.rays_per_cluster


@dataclass(frozen=True)
class PathGain:
    aoa_rad: float
    aod_rad: float
    complex_gain: complex


@dataclass(frozen=True)
class ChannelRealization:
    h: ComplexMatrix
    paths: tuple[PathGain, ...]


@dataclass(frozen=True)
class OfdmConfig:
    num_subcarriers: int
    cp_length: int
    num_taps: int
    pilot_spacing: int
    constellation: ConstellationKind = ConstellationKind.QPSK

    def __post_init__(self):
        if self.num_subcarriers < 1 or self.num_taps < 1 or self.cp_length < 0:
            raise InvalidInputError(
                f"invalid OFDM dimensions S={self.num_subcarriers} L={self.num_taps} cp={self.cp_length}")
        if self.pilot_spacing < 1 or self.num_subcarriers % self.pilot_spacing:
            raise InvalidInputError(
                f"pilot_spacing {self.pilot_spacing} does not divide {self.num_subcarriers} subcarriers")
        if not self.isi_free:
            _warn_isi(self.cp_length, self.num_taps)

    @property
    def isi_free(self) -> bool:
        return self.cp_length >= self.num_taps - 1

    @property
    def pilot_positions(self) -> np.ndarray:
        return np.arange(0, self.num_subcarriers, self.pilot_spacing)

    @property
    def symbol_length(self) -> int:
        return self.num_subcarriers + self.cp_length


def complex_gaussian(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian samples CN(0, variance)."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def steering_vector(theta_rad: float, ula: UlaConfig) -> ComplexVector:
    if not abs(theta_rad) <= math.pi / 2 + ANGLE_TOL:
        raise InvalidInputError(f"angle {theta_rad} rad outside [-pi/2, pi/2]")
    n = np.arange(ula.num_antennas)
    return np.exp(-2j * np.pi * ula.element_spacing_wavelengths * n * math.sin(theta_rad))


def steering_matrix(thetas_rad, ula: UlaConfig) -> ComplexMatrix:
    """Columns are steering vectors of the given angles."""
    th = np.asarray(thetas_rad, dtype=float)
    if np.any(np.abs(th) > math.pi / 2 + ANGLE_TOL):
        raise InvalidInputError("steering angles must lie in [-pi/2, pi/2]")
    n = np.arange(ula.num_antennas)[:, None]
    return np.exp(-2j * np.pi * ula.element_spacing_wavelengths * n * np.sin(th)[None, :])


def sample_uplink_channel(ula: UlaConfig, num_paths: int, rng: np.random.Generator,
                          angles_rad=None, gains=None) -> ChannelRealization:
    """h = sum_l g_l a(theta_l), g_l ~ CN(0, 1/num_paths).

    angles_rad / gains pin the corresponding draws (used for calibrated
    cases); the generator is consumed identically either way.
    """
    if num_paths < 1:
        raise InvalidInputError(f"num_paths must be >= 1, got {num_paths}")
    th = rng.uniform(-math.pi / 2, math.pi / 2, num_paths)
    g = complex_gaussian(rng, num_paths, 1.0 / num_paths)
    if angles_rad is not None:
        th = np.asarray(angles_rad, dtype=float).reshape(num_paths)
    if gains is not None:
        g = np.asarray(gains, dtype=np.complex128).reshape(num_paths)
    h = steering_matrix(th, ula) @ g
    paths = tuple(PathGain(float(t), 0.0, complex(gl)) for t, gl in zip(th, g))
    return ChannelRealization(h=h.reshape(-1, 1), paths=paths)


def _ula_response(thetas: np.ndarray, n: int) -> np.ndarray:
    """Unit-norm half-wavelength ULA responses, one column per angle."""
    idx = np.arange(n)[:, None]
    return np.exp(-1j * np.pi * idx * np.sin(thetas)[None, :]) / math.sqrt(n)


def sample_sv_channel(params: SvChannelParams, rng: np.random.Generator,
                      aoa_rad=None, aod_rad=None, gains=None) -> ChannelRealization:
    """Clustered Saleh-Valenzuela channel H (num_rx x num_tx).

    H = gamma * sum_l alpha_l a_rx(theta_l) a_tx(phi_l)^H with unit-norm
    array responses and gamma = sqrt(Nt Nr / L), so E||H||_F^2 = Nt Nr.
    Ray angles are Laplacian offsets around uniform cluster centres,
    clipped to [-pi/2, pi/2].
    """
    nc, nr = params.num_clusters, params.rays_per_cluster
    total = params.num_paths
    half = math.pi / 2
    b = math.radians(params.angle_spread_deg) / math.sqrt(2.0)

    def _angles():
        centres = rng.uniform(-half, half, nc)
        offsets = rng.laplace(0.0, b, (nc, nr)) if b > 0 else np.zeros((nc, nr))
        return np.clip(centres[:, None] + offsets, -half, half).reshape(total)

    theta = _angles()
    phi = _angles()
    alpha = complex_gaussian(rng, total)
    if aoa_rad is not None:
        theta = np.asarray(aoa_rad, dtype=float).reshape(total)
    if aod_rad is not None:
        phi = np.asarray(aod_rad, dtype=float).reshape(total)
    if gains is not None:
        alpha = np.asarray(gains, dtype=np.complex128).reshape(total)

    gamma = math.sqrt(params.num_tx * params.num_rx / total)
    a_rx = _ula_response(theta, params.num_rx)
    a_tx = _ula_response(phi, params.num_tx)
    h = gamma * (a_rx * alpha) @ a_tx.conj().T
    paths = tuple(PathGain(float(t), float(p), complex(a)) for t, p, a in zip(theta, phi, alpha))
    return ChannelRealization(h=h, paths=paths)


def sample_rayleigh_matrix(rows: int, cols: int, rng: np.random.Generator) -> ComplexMatrix:
    return complex_gaussian(rng, (rows, cols))


def sample_multipath_taps(num_taps: int, rng: np.random.Generator, decay: float = 3.0) -> ComplexVector:
    """Rayleigh taps with an exponential power-delay profile, unit total power."""
    if num_taps < 1:
        raise InvalidInputError(f"num_taps must be >= 1, got {num_taps}")
    pdp = np.exp(-np.arange(num_taps) / decay)
    pdp /= pdp.sum()
    return complex_gaussian(rng, num_taps) * np.sqrt(pdp)


def channel_frequency_response(taps, num_subcarriers: int) -> ComplexVector:
    """H_k: DFT of the zero-padded taps."""
    return np.fft.fft(np.asarray(taps, dtype=np.complex128), n=num_subcarriers)


def ofdm_modulate(x_freq, cfg: OfdmConfig) -> ComplexVector:
    x = np.asarray(x_freq, dtype=np.complex128)
    if x.shape[-1] != cfg.num_subcarriers:
        raise InvalidInputError(f"expected {cfg.num_subcarriers} subcarriers, got {x.shape[-1]}")
    t = np.fft.ifft(x, norm="ortho")
    if cfg.cp_length == 0:
        return t
    return np.concatenate([t[..., -cfg.cp_length:], t], axis=-1)


def ofdm_demodulate(y_time, cfg: OfdmConfig) -> ComplexVector:
    y = np.asarray(y_time, dtype=np.complex128)
    if y.shape[-1] != cfg.symbol_length:
        raise InvalidInputError(f"expected {cfg.symbol_length} samples, got {y.shape[-1]}")
    return np.fft.fft(y[..., cfg.cp_length:], norm="ortho")


def apply_multipath(x_time, taps) -> ComplexVector:
    """Linear convolution with the taps, truncated to the input length."""
    x = np.asarray(x_time, dtype=np.complex128)
    h = np.asarray(taps, dtype=np.complex128)
    if h.ndim != 1 or h.size < 1:
        raise InvalidInputError("taps must be a non-empty vector")
    return np.convolve(x, h)[: x.size]


def noise_variance(snr_db: float, signal_power: float) -> float:
    if not signal_power > 0:
        raise InvalidInputError(f"signal_power must be > 0, got {signal_power}")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power / 10.0 ** (snr_db / 10.0)


def apply_awgn(signal, snr_db: float, signal_power: float, rng: np.random.Generator) -> ComplexVector:
    """Add CN(0, signal_power / 10^(snr_db/10)) noise per sample.

    snr_db = +inf is the no-noise flag and returns a copy untouched.
    """
    s = np.asarray(signal, dtype=np.complex128)
    var = noise_variance(snr_db, signal_power)
    if var == 0.0:
        return s.copy()
    return s + complex_gaussian(rng, s.shape, var)
