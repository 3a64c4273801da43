# Gray-labelled unit-energy constellations with hard-decision slicing.

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError

AMBIGUITY_TOL = 1e-12


class ConstellationKind(enum.Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"
    QAM16 = "16QAM"


# Gray PAM-4 levels indexed by the 2-bit label (b0 b1): 00 01 10 11
_PAM4 = np.array([-3.0, -1.0, 3.0, 1.0])


def _label_bits(labels: np.ndarray, k: int) -> np.ndarray:
    shifts = np.arange(k - 1, -1, -1)
    return ((labels[..., None] >> shifts) & 1).astype(np.uint8)


@dataclass(frozen=True)
class Constellation:
    kind: ConstellationKind
    points: np.ndarray = field(repr=False)   # points[label]
    bits_per_symbol: int

    @property
    def size(self) -> int:
        return self.points.size

    def bit_table(self) -> np.ndarray:
        """size x bits_per_symbol matrix; row i is the bit label of point i."""
        return _label_bits(np.arange(self.size), self.bits_per_symbol)

    def bits_to_labels(self, bits) -> np.ndarray:
        b = np.asarray(bits, dtype=np.int64)
        k = self.bits_per_symbol
        if b.shape[-1] % k:
            raise InvalidInputError(f"bit count {b.shape[-1]} not a multiple of {k}")
        b = b.reshape(*b.shape[:-1], -1, k)
        weights = 1 << np.arange(k - 1, -1, -1)
        return (b * weights).sum(axis=-1)

    def labels_to_bits(self, labels) -> np.ndarray:
        lab = np.asarray(labels, dtype=np.int64)
        bits = _label_bits(lab, self.bits_per_symbol)
        return bits.reshape(*lab.shape[:-1], -1) if lab.ndim else bits.reshape(-1)

    def modulate(self, bits) -> np.ndarray:
        return self.points[self.bits_to_labels(bits)]

    def slice(self, symbols) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-point labels and a mask of decisions on a boundary.

        Ties resolve toward the lower label.
        """
        y = np.asarray(symbols, dtype=np.complex128)
        d = np.abs(y[..., None] - self.points) ** 2
        labels = np.argmin(d, axis=-1)
        if self.size > 1:
            part = np.partition(d, 1, axis=-1)
            ambiguous = part[..., 1] - part[..., 0] <= AMBIGUITY_TOL * (1.0 + part[..., 0])
        else:
            ambiguous = np.zeros(y.shape, dtype=bool)
        return labels, ambiguous

    def demodulate(self, symbols) -> np.ndarray:
        labels, _ = self.slice(symbols)
        return self.labels_to_bits(labels)


@lru_cache(maxsize=None)
def constellation(kind: ConstellationKind | str) -> Constellation:
    kind = ConstellationKind(kind)
    if kind is ConstellationKind.BPSK:
        pts = np.array([1.0, -1.0], dtype=np.complex128)
        k = 1
    elif kind is ConstellationKind.QPSK:
        lab = np.arange(4)
        pts = ((1 - 2 * (lab >> 1)) + 1j * (1 - 2 * (lab & 1))) / np.sqrt(2.0)
        k = 2
    else:
        lab = np.arange(16)
        pts = (_PAM4[lab >> 2] + 1j * _PAM4[lab & 3]) / np.sqrt(10.0)
        k = 4
    pts = pts.astype(np.complex128)
    pts.setflags(write=False)
    return Constellation(kind=kind, points=pts, bits_per_symbol=k)
