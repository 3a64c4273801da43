# Systematic Hamming(7,4) code with syndrome decoding, plus the BPSK
# hard-decision error-rate oracles used by the autoencoder experiment.

import itertools
import math

import numpy as np
from scipy.special import erfc

from .errors import InvalidInputError

K = 4
N = 7
RATE = K / N

# G = [I4 | P], H = [P^T | I3]
_P = np.array([[1, 1, 0],
               [1, 0, 1],
               [0, 1, 1],
               [1, 1, 1]], dtype=np.uint8)
GENERATOR = np.concatenate([np.eye(K, dtype=np.uint8), _P], axis=1)
PARITY_CHECK = np.concatenate([_P.T, np.eye(N - K, dtype=np.uint8)], axis=1)

# syndrome (as int, MSB first) -> bit position to flip; -1 for "no error"
_SYNDROME_POS = np.full(1 << (N - K), -1, dtype=np.int64)
for _pos in range(N):
    _col = PARITY_CHECK[:, _pos]
    _SYNDROME_POS[int(_col[0]) << 2 | int(_col[1]) << 1 | int(_col[2])] = _pos


def _as_blocks(bits, width: int) -> np.ndarray:
    b = np.asarray(bits)
    if b.shape[-1] % width:
        raise InvalidInputError(f"bit count {b.shape[-1]} not a multiple of {width}")
    if b.size and (b.min() < 0 or b.max() > 1):
        raise InvalidInputError("bits must be 0 or 1")
    return b.astype(np.uint8).reshape(*b.shape[:-1], -1, width)


def hamming74_encode(bits) -> np.ndarray:
    """Encode groups of 4 bits along the last axis into groups of 7."""
    blocks = _as_blocks(bits, K)
    code = (blocks.astype(np.int64) @ GENERATOR) % 2
    return code.astype(np.uint8).reshape(*blocks.shape[:-2], -1)


def _block_syndrome(blocks: np.ndarray) -> np.ndarray:
    s = (blocks.astype(np.int64) @ PARITY_CHECK.T) % 2
    return s[..., 0] << 2 | s[..., 1] << 1 | s[..., 2]


def syndrome(codewords) -> np.ndarray:
    return _block_syndrome(_as_blocks(codewords, N))


def hamming74_decode(bits) -> np.ndarray:
    """Correct up to one error per 7-bit block and return the 4 data bits.

    Two or more errors decode to some valid codeword, usually the wrong one.
    """
    blocks = _as_blocks(bits, N).copy()
    pos = _SYNDROME_POS[_block_syndrome(blocks)]
    hit = np.nonzero(pos >= 0)
    blocks[hit + (pos[hit],)] ^= 1
    return blocks[..., :K].reshape(*blocks.shape[:-2], -1)


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def bpsk_bit_error_probability(ebn0_db, rate: float = 1.0):
    """Hard-decision BPSK crossover probability Q(sqrt(2 R Eb/N0))."""
    ebn0 = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    return q_function(np.sqrt(2.0 * rate * ebn0))


_ERROR_PATTERNS = np.array(list(itertools.product((0, 1), repeat=N)), dtype=np.uint8)
_PATTERN_WEIGHT = _ERROR_PATTERNS.sum(axis=1)
# The code is linear, so decoding the all-zero word plus e covers every codeword.
_PATTERN_FAILS = np.any(hamming74_decode(_ERROR_PATTERNS) != 0, axis=-1)


def block_error_probability(p) -> np.ndarray:
    """Hard-decision block error rate for crossover probability p.

    Sums P(e) = p^w (1-p)^(7-w) over all 128 error patterns the decoder
    gets wrong; every weight-1 pattern is corrected.
    """
    pv = np.atleast_1d(np.asarray(p, dtype=float))
    w = _PATTERN_WEIGHT[_PATTERN_FAILS]
    probs = pv[:, None] ** w * (1.0 - pv[:, None]) ** (N - w)
    out = probs.sum(axis=1)
    return out if np.ndim(p) else out[0]


def hamming_bler_hard(ebn0_db):
    """Semi-analytic BLER of Hamming(7,4) + BPSK + hard decisions at Eb/N0 (dB)."""
    return block_error_probability(bpsk_bit_error_probability(ebn0_db, RATE))


def uncoded_bler(ebn0_db):
    """BLER of 4 uncoded BPSK bits, the reference both coded schemes must beat."""
    return 1.0 - (1.0 - bpsk_bit_error_probability(ebn0_db)) ** K
