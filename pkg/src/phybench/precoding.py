# Fully-digital SVD/GMD precoders and the analog/digital (hybrid) split.

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, RankError
from .numerics import ComplexMatrix, as_matrix, gmd, svd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrecoderPair:
    precoder: ComplexMatrix          # Nt x Ns
    combiner: ComplexMatrix          # Ns x Nr
    effective_diag: np.ndarray       # per-stream gains
    effective_channel: ComplexMatrix  # combiner @ H @ precoder

    @property
    def num_streams(self) -> int:
        return self.precoder.shape[1]


def svd_precoder(h, n_s: int) -> PrecoderPair:
    hm = as_matrix(h)
    f = svd(hm)
    if n_s < 1 or n_s > f.numerical_rank():
        raise RankError(f"n_s={n_s} exceeds rank {f.numerical_rank()} of {hm.shape[0]}x{hm.shape[1]} channel")
    precoder = f.v[:, :n_s]
    combiner = f.u[:, :n_s].conj().T
    return PrecoderPair(precoder=precoder, combiner=combiner,
                        effective_diag=f.sigma[:n_s].copy(),
                        effective_channel=combiner @ hm @ precoder)


def gmd_precoder(h, n_s: int) -> PrecoderPair:
    """Precoder P and combiner Q^H of the rank-n_s GMD: every stream sees sigma_bar."""
    hm = as_matrix(h)
    g = gmd(hm, n_s)
    combiner = g.q.conj().T
    return PrecoderPair(precoder=g.p, combiner=combiner,
                        effective_diag=np.real(np.diag(g.r)).copy(),
                        effective_channel=combiner @ hm @ g.p)


@dataclass(frozen=True)
class HybridSplit:
    f_rf: ComplexMatrix               # Nt x n_rf, entries of modulus 1/sqrt(Nt)
    f_bb: ComplexMatrix               # n_rf x Ns
    residual_history: tuple[float, ...]

    @property
    def precoder(self) -> ComplexMatrix:
        return self.f_rf @ self.f_bb

    @property
    def residual(self) -> float:
        return self.residual_history[-1]


def _phase_only(x: np.ndarray, nt: int) -> np.ndarray:
    return np.exp(1j * np.angle(x)) / math.sqrt(nt)


def _two_phase_start(f_opt: np.ndarray, n_rf: int) -> tuple[np.ndarray, np.ndarray]:
    # Each entry x = |x| e^{j t} is the sum of two constant-modulus terms
    # beta/sqrt(Nt) (e^{j(t+psi)} + e^{j(t-psi)}), with 2 beta cos(psi) = |x| sqrt(Nt).
    nt, ns = f_opt.shape
    mag = np.abs(f_opt)
    theta = np.angle(f_opt)
    beta = max(float(mag.max()) * math.sqrt(nt) / 2.0, np.finfo(float).tiny)
    psi = np.arccos(np.clip(mag * math.sqrt(nt) / (2.0 * beta), -1.0, 1.0))
    f_rf = np.ones((nt, n_rf), dtype=np.complex128) / math.sqrt(nt)
    f_rf[:, :ns] = np.exp(1j * (theta + psi)) / math.sqrt(nt)
    f_rf[:, ns:2 * ns] = np.exp(1j * (theta - psi)) / math.sqrt(nt)
    f_bb = np.zeros((n_rf, ns), dtype=np.complex128)
    f_bb[:ns] = beta * np.eye(ns)
    f_bb[ns:2 * ns] = beta * np.eye(ns)
    return f_rf, f_bb


def hybrid_decompose(f_opt, n_rf: int, iters: int) -> HybridSplit:
    """Alternating minimization of ||F_opt - F_RF F_BB||_F.

    F_RF step: phases of F_opt F_BB^H scaled to 1/sqrt(Nt).
    F_BB step: least squares pinv(F_RF) F_opt.
    A candidate pair is kept only when it does not increase the residual.
    F_BB is rescaled at the end so that ||F_RF F_BB||_F^2 = Ns.
    """
    f = as_matrix(f_opt)
    nt, ns = f.shape
    if n_rf < ns:
        raise InvalidInputError(f"n_rf={n_rf} < n_s={ns}: too few RF chains")
    if n_rf > nt:
        raise InvalidInputError(f"n_rf={n_rf} exceeds {nt} antennas")
    if iters < 0:
        raise InvalidInputError(f"iters must be >= 0, got {iters}")

    def _residual(rf, bb):
        return float(np.linalg.norm(f - rf @ bb))

    # start: exact two-phase split when n_rf >= 2*Ns, else F_BB = I; starting
    # from the top rows of F_opt stalls well above the target residual
    if n_rf >= 2 * ns:
        f_rf, f_bb = _two_phase_start(f, n_rf)
    else:
        f_bb = np.eye(n_rf, ns, dtype=np.complex128)
        f_rf = _phase_only(f @ f_bb.conj().T, nt)
        f_bb = np.linalg.pinv(f_rf) @ f
    history = [_residual(f_rf, f_bb)]

    for _ in range(iters):
        cand_rf = _phase_only(f @ f_bb.conj().T, nt)
        cand_bb = np.linalg.pinv(cand_rf) @ f
        res = _residual(cand_rf, cand_bb)
        if res <= history[-1]:
            f_rf, f_bb = cand_rf, cand_bb
        history.append(min(res, history[-1]))

    norm = np.linalg.norm(f_rf @ f_bb)
    if norm > 0:
        f_bb = f_bb * (math.sqrt(ns) / norm)
    logger.debug("hybrid split %dx%d n_rf=%d: residual %.3e -> %.3e",
                 nt, ns, n_rf, history[0], history[-1])
    return HybridSplit(f_rf=f_rf, f_bb=f_bb, residual_history=tuple(history))


def hybrid_precoder(h, target: PrecoderPair, n_rf: int, iters: int) -> tuple[PrecoderPair, HybridSplit]:
    """Hybrid approximation of a fully-digital precoder, combiner unchanged."""
    hm = as_matrix(h)
    split = hybrid_decompose(target.precoder, n_rf, iters)
    prec = split.precoder
    eff = target.combiner @ hm @ prec
    pair = PrecoderPair(precoder=prec, combiner=target.combiner,
                        effective_diag=np.abs(np.diag(eff)), effective_channel=eff)
    return pair, split


def baseband_from_phases(f_opt, rf_phases: np.ndarray) -> tuple[ComplexMatrix, ComplexMatrix]:
    """F_RF from predicted phases, F_BB by least squares against F_opt, power-normalized."""
    f = as_matrix(f_opt)
    nt, ns = f.shape
    f_rf = np.exp(1j * np.asarray(rf_phases, dtype=float)) / math.sqrt(nt)
    f_bb = np.linalg.pinv(f_rf) @ f
    norm = np.linalg.norm(f_rf @ f_bb)
    if norm > 0:
        f_bb = f_bb * (math.sqrt(ns) / norm)
    return f_rf, f_bb
