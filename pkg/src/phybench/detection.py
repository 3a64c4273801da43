# Classical receivers: LS pilot channel estimation for OFDM, zero-forcing
# detection and QR-based successive cancellation.

from dataclasses import dataclass

import numpy as np

from .channel import OfdmConfig
from .constellation import Constellation
from .errors import InvalidInputError
from .numerics import as_matrix

DEFAULT_PILOT = (1.0 + 1.0j) / np.sqrt(2.0)


@dataclass(frozen=True)
class PilotPattern:
    positions: np.ndarray   # ascending subcarrier indices
    values: np.ndarray      # transmitted pilot symbols

    @classmethod
    def comb(cls, cfg: OfdmConfig, value: complex = DEFAULT_PILOT) -> "PilotPattern":
        pos = cfg.pilot_positions
        return cls(positions=pos, values=np.full(pos.size, value, dtype=np.complex128))


@dataclass(frozen=True)
class Detection:
    symbols: np.ndarray
    labels: np.ndarray
    bits: np.ndarray


def _bits(c: Constellation, labels: np.ndarray) -> np.ndarray:
    # one row of bits per received vector when detecting a batch of columns
    return c.labels_to_bits(labels.T if labels.ndim == 2 else labels)


def ls_channel_estimate(y_freq, pilots: PilotPattern, cfg: OfdmConfig) -> np.ndarray:
    """Per-subcarrier LS estimate: Y/X at pilots, linear interpolation between.

    Real and imaginary parts are interpolated separately; subcarriers
    outside the pilot span take the nearest pilot estimate.
    """
    y = np.asarray(y_freq, dtype=np.complex128)
    if y.shape[-1] != cfg.num_subcarriers:
        raise InvalidInputError(f"expected {cfg.num_subcarriers} subcarriers, got {y.shape[-1]}")
    pos = np.asarray(pilots.positions)
    vals = np.asarray(pilots.values, dtype=np.complex128)
    if pos.size == 0 or pos.size != vals.size:
        raise InvalidInputError("pilot positions and values must be non-empty and the same length")
    if np.any(vals == 0):
        raise InvalidInputError("pilot value 0 cannot be divided out")
    if np.any(np.diff(pos) <= 0):
        raise InvalidInputError("pilot positions must be strictly ascending")
    h_p = y[..., pos] / vals
    k = np.arange(cfg.num_subcarriers)
    if y.ndim == 1:
        return np.interp(k, pos, h_p.real) + 1j * np.interp(k, pos, h_p.imag)
    out = np.empty(y.shape, dtype=np.complex128)
    for idx in np.ndindex(y.shape[:-1]):
        out[idx] = np.interp(k, pos, h_p[idx].real) + 1j * np.interp(k, pos, h_p[idx].imag)
    return out


def zf_detect(h, y, c: Constellation) -> Detection:
    """x = pinv(H) y, then nearest-point slicing (ties toward the lower label).

    y may be a single vector or a matrix of column vectors.
    """
    hm = as_matrix(h)
    yv = np.asarray(y, dtype=np.complex128)
    if yv.shape[0] != hm.shape[0]:
        raise InvalidInputError(f"y has {yv.shape[0]} rows, H has {hm.shape[0]}")
    x = np.linalg.pinv(hm) @ yv
    labels, _ = c.slice(x)
    return Detection(symbols=x, labels=labels, bits=_bits(c, labels))


def qr_sic_detect(g, z, c: Constellation) -> Detection:
    """Successive cancellation on a square equivalent channel z = G s + w.

    G = Q R; streams are detected from the last to the first and each
    decision is cancelled from the remaining rows. z may hold several
    column vectors.
    """
    gm = as_matrix(g)
    k = gm.shape[1]
    q, r = np.linalg.qr(gm)
    zt = q.conj().T @ np.asarray(z, dtype=np.complex128)
    single = zt.ndim == 1
    zt = zt.reshape(k, -1)
    labels = np.zeros(zt.shape, dtype=np.int64)
    decided = np.zeros(zt.shape, dtype=np.complex128)
    for i in range(k - 1, -1, -1):
        resid = zt[i] - r[i, i + 1:] @ decided[i + 1:]
        labels[i], _ = c.slice(resid / r[i, i])
        decided[i] = c.points[labels[i]]
    if single:
        labels, decided = labels[:, 0], decided[:, 0]
    return Detection(symbols=decided, labels=labels, bits=_bits(c, labels))
