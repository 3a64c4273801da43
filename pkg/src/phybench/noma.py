# Power-domain NOMA: superposition, successive interference cancellation
# and achievable rates.

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import exp1

from .constellation import Constellation
from .errors import InvalidInputError

logger = logging.getLogger(__name__)

POWER_TOL = 1e-12


@dataclass(frozen=True)
class NomaConfig:
    powers: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.powers, dtype=float)
        if p.size < 1 or np.any(p <= 0):
            raise InvalidInputError(f"NOMA powers must be positive, got {self.powers}")
        if abs(p.sum() - 1.0) > POWER_TOL:
            raise InvalidInputError(f"NOMA powers must sum to 1, got {p.sum()!r}")

    @classmethod
    def two_user(cls, alpha: float) -> "NomaConfig":
        """alpha to user 0, 1 - alpha to user 1; alpha = 1 leaves user 0 alone."""
        if alpha == 1.0:
            return cls((1.0,))
        if not 0.0 < alpha < 1.0:
            raise InvalidInputError(f"alpha must be in (0, 1], got {alpha}")
        return cls((alpha, 1.0 - alpha))

    @property
    def num_users(self) -> int:
        return len(self.powers)

    def decoding_order(self, gains=None) -> list[int]:
        """Users by received power |g|^2 p descending, ties by user index."""
        p = np.asarray(self.powers)
        g2 = np.ones_like(p) if gains is None else np.abs(np.asarray(gains)) ** 2
        rx = g2 * p
        return sorted(range(p.size), key=lambda i: (-rx[i], i))


@dataclass(frozen=True)
class SicResult:
    bits: tuple[np.ndarray | None, ...]   # None for undecodable users
    undecodable: tuple[bool, ...]
    ambiguous: tuple[bool, ...]           # some decision landed on a boundary


def noma_superpose(symbols: Sequence[np.ndarray], cfg: NomaConfig) -> np.ndarray:
    if len(symbols) != cfg.num_users:
        raise InvalidInputError(f"{len(symbols)} symbol streams for {cfg.num_users} users")
    xs = [np.asarray(x, dtype=np.complex128) for x in symbols]
    if len({x.shape for x in xs}) != 1:
        raise InvalidInputError("all users need the same number of symbols")
    return sum(math.sqrt(p) * x for p, x in zip(cfg.powers, xs))


def sic_decode(y, gains, cfg: NomaConfig, c: Constellation) -> SicResult:
    """Decode all users from y = sum_i sqrt(p_i) g_i x_i + n.

    Users are decoded in descending received power; each decision is
    re-modulated and subtracted before the next user.
    """
    resid = np.array(y, dtype=np.complex128)
    g = np.asarray(gains, dtype=np.complex128).reshape(-1)
    if g.size != cfg.num_users:
        raise InvalidInputError(f"{g.size} gains for {cfg.num_users} users")
    bits: list = [None] * cfg.num_users
    undecodable = [False] * cfg.num_users
    ambiguous = [False] * cfg.num_users
    for i in cfg.decoding_order(g):
        scale = math.sqrt(cfg.powers[i]) * g[i]
        if abs(scale) == 0.0:
            undecodable[i] = True
            logger.warning("SIC: user %d has zero channel gain, marked undecodable", i)
            continue
        labels, amb = c.slice(resid / scale)
        ambiguous[i] = bool(np.any(amb))
        bits[i] = c.labels_to_bits(labels)
        resid = resid - scale * c.points[labels]
    return SicResult(bits=tuple(bits), undecodable=tuple(undecodable), ambiguous=tuple(ambiguous))


def _interference_power(powers: np.ndarray) -> np.ndarray:
    """Power of users decoded after each user (weaker allocations, ties by index)."""
    order = sorted(range(powers.size), key=lambda i: (-powers[i], i))
    after = np.zeros(powers.size)
    for rank, i in enumerate(order):
        after[i] = powers[order[rank + 1:]].sum()
    return after


def achievable_rate(gains, powers, noise_var: float) -> np.ndarray:
    """Per-user log2(1 + SINR) under perfect SIC, bits/s/Hz.

    Each user cancels the users with larger power allocation and treats
    the ones with smaller allocation as interference:
    SINR_i = |g_i|^2 p_i / (|g_i|^2 sum_{j after i} p_j + noise_var).
    """
    g2 = np.abs(np.asarray(gains, dtype=np.complex128)) ** 2
    p = np.asarray(powers, dtype=float)
    if g2.shape != p.shape:
        raise InvalidInputError(f"{g2.size} gains for {p.size} powers")
    if math.isinf(noise_var):
        return np.zeros_like(p)
    inter = _interference_power(p)
    with np.errstate(divide="ignore"):
        sinr = g2 * p / (g2 * inter + noise_var)
    return np.log2(1.0 + sinr)


def orthogonal_rate(gains, powers, noise_var: float, shares=None) -> np.ndarray:
    """Rates when user i owns a bandwidth fraction w_i with power p_i."""
    g2 = np.abs(np.asarray(gains, dtype=np.complex128)) ** 2
    p = np.asarray(powers, dtype=float)
    w = np.full(p.size, 1.0 / p.size) if shares is None else np.asarray(shares, dtype=float)
    return w * np.log2(1.0 + g2 * p / (w * noise_var))


def _mean_log2_1p_exp(a: np.ndarray) -> np.ndarray:
    # E[log2(1 + a X)] for X ~ Exp(1): exp(1/a) E1(1/a) / ln 2
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    inv = 1.0 / a[pos]
    # exp(x) overflows past ~700; the asymptotic series errs below 1e-10 there
    big = inv > 500.0
    val = np.empty_like(inv)
    val[~big] = np.exp(inv[~big]) * exp1(inv[~big])
    x = inv[big]
    val[big] = 1.0 / x - 1.0 / x**2 + 2.0 / x**3
    out[pos] = val / math.log(2.0)
    return out


def ergodic_rate_rayleigh(mean_gains, powers, noise_var: float) -> np.ndarray:
    """Expected achievable_rate() when |g_i|^2 ~ Exp(mean_gains[i]).

    log2(1 + X p/(X I + N)) = log2(1 + X (p + I)/N) - log2(1 + X I/N),
    and each term has a closed form through the exponential integral.
    """
    m = np.asarray(mean_gains, dtype=float)
    p = np.asarray(powers, dtype=float)
    inter = _interference_power(p)
    return _mean_log2_1p_exp(m * (p + inter) / noise_var) - _mean_log2_1p_exp(m * inter / noise_var)
