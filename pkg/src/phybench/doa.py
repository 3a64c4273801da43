# MUSIC direction-of-arrival estimation on a uniform linear array.

import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .channel import UlaConfig, steering_matrix
from .errors import InvalidInputError
from .numerics import as_matrix, eig_hermitian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DoaEstimate:
    angles_deg: tuple[float, ...]   # ascending
    degenerate: bool                # fewer peaks found than requested


def angle_grid_deg(step_deg: float, max_angle_deg: float = 90.0) -> np.ndarray:
    """Symmetric grid -max..max (inclusive) with the given step."""
    if not step_deg > 0:
        raise InvalidInputError(f"grid step must be > 0, got {step_deg}")
    n = int(round(2 * max_angle_deg / step_deg))
    return -max_angle_deg + step_deg * np.arange(n + 1)


def music_spectrum(snapshots, num_sources: int, ula: UlaConfig, grid_deg: np.ndarray) -> np.ndarray:
    x = as_matrix(snapshots)
    n, t = x.shape
    if n != ula.num_antennas:
        raise InvalidInputError(f"snapshots have {n} rows, array has {ula.num_antennas} antennas")
    if not 1 <= num_sources < n:
        raise InvalidInputError(f"num_sources={num_sources} must be in [1, {n - 1}]")
    if t < num_sources:
        raise InvalidInputError(f"{t} snapshots < {num_sources} sources")
    r = x @ x.conj().T / t
    r = 0.5 * (r + r.conj().T)
    _, vecs = eig_hermitian(r)
    en = vecs[:, num_sources:]
    a = steering_matrix(np.radians(grid_deg), ula)
    den = np.sum(np.abs(en.conj().T @ a) ** 2, axis=0)
    return 1.0 / np.maximum(den, np.finfo(float).tiny)


def spectrum_peaks(p: np.ndarray) -> np.ndarray:
    """Indices of the local maxima of p, the grid ends included."""
    padded = np.concatenate([[-np.inf], p, [-np.inf]])
    peaks, _ = find_peaks(padded)
    return peaks - 1


def music_doa(snapshots, num_sources: int, ula: UlaConfig, grid_step_deg: float = 0.1) -> DoaEstimate:
    """Estimate num_sources DOAs (degrees, ascending) from N x T snapshots."""
    grid = angle_grid_deg(grid_step_deg)
    p = music_spectrum(snapshots, num_sources, ula, grid)
    peaks = spectrum_peaks(p)
    # largest peaks first, smaller angle wins ties
    order = sorted(peaks, key=lambda i: (-p[i], grid[i]))
    chosen = sorted(order[:num_sources])
    degenerate = len(chosen) < num_sources
    if degenerate:
        logger.warning("MUSIC found %d of %d requested peaks", len(chosen), num_sources)
    return DoaEstimate(angles_deg=tuple(float(grid[i]) for i in chosen), degenerate=degenerate)


def snapshot_matrix(thetas_deg, ula: UlaConfig, signals) -> np.ndarray:
    """Noiseless snapshots A(theta) S for source signals S (K x T)."""
    a = steering_matrix(np.radians(np.atleast_1d(thetas_deg)), ula)
    return a @ np.atleast_2d(np.asarray(signals, dtype=np.complex128))

