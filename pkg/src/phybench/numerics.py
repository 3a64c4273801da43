# Dense complex linear algebra: SVD, Hermitian eigendecomposition and the
# geometric mean decomposition (GMD).
#
# Matrices are plain numpy complex128 arrays; as_matrix() is the single
# entry point that validates shape and finiteness. Every function here is
# pure: inputs are copied before anything is modified.

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError, NotHermitianError, RankError

ComplexMatrix = np.ndarray
ComplexVector = np.ndarray

HERMITIAN_TOL = 1e-12
RANK_TOL = 1e-12


def as_matrix(a) -> ComplexMatrix:
    """Validate and convert to a 2-D complex128 array (copy)."""
    m = np.array(a, dtype=np.complex128)
    if m.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got {m.ndim}-D")
    if m.size == 0:
        raise InvalidInputError(f"empty matrix {m.shape[0]}x{m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError(f"non-finite entries in {m.shape[0]}x{m.shape[1]} matrix")
    return m


def max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


@dataclass(frozen=True)
class SvdFactors:
    u: ComplexMatrix      # m x m, unitary
    sigma: np.ndarray     # min(m, n) non-increasing, >= 0
    v: ComplexMatrix      # n x n, unitary

    def reconstruct(self) -> ComplexMatrix:
        k = self.sigma.size
        return (self.u[:, :k] * self.sigma) @ self.v[:, :k].conj().T

    def numerical_rank(self, tol: float = RANK_TOL) -> int:
        if self.sigma.size == 0 or self.sigma[0] == 0.0:
            return 0
        return int(np.count_nonzero(self.sigma > tol * self.sigma[0]))


@dataclass(frozen=True)
class GmdFactors:
    q: ComplexMatrix      # m x K, orthonormal columns
    r: ComplexMatrix      # K x K, upper triangular, constant real diagonal
    p: ComplexMatrix      # n x K, orthonormal columns
    sigma_bar: float

    def reconstruct(self) -> ComplexMatrix:
        return self.q @ self.r @ self.p.conj().T


def _column_phases(u: np.ndarray) -> np.ndarray:
    """Unit phase of the largest-magnitude entry of each column."""
    idx = np.argmax(np.abs(u), axis=0)
    lead = u[idx, np.arange(u.shape[1])]
    mag = np.abs(lead)
    return np.where(mag > 0, lead / np.where(mag > 0, mag, 1.0), 1.0)


def svd(a) -> SvdFactors:
    """Full SVD with a fixed phase convention.

    Each column of U is rotated so its largest-magnitude entry is real
    positive; the matching column of V gets the same rotation so that
    U diag(sigma) V^H is unchanged.
    """
    m = as_matrix(a)
    rows, cols = m.shape
    try:
        u, sigma, vh = np.linalg.svd(m, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD did not converge for {rows}x{cols} matrix") from exc

    v = vh.conj().T
    k = sigma.size
    ph = _column_phases(u)
    u = u * ph.conj()
    v[:, :k] = v[:, :k] * ph[:k].conj()
    if cols > k:
        v[:, k:] = v[:, k:] * _column_phases(v[:, k:]).conj()
    return SvdFactors(u=u, sigma=sigma, v=v)


def eig_hermitian(a) -> tuple[np.ndarray, ComplexMatrix]:
    """Eigenvalues (non-increasing) and orthonormal eigenvectors (columns)."""
    m = as_matrix(a)
    rows, cols = m.shape
    if rows != cols:
        raise InvalidInputError(f"eig_hermitian needs a square matrix, got {rows}x{cols}")
    skew = max_abs(m - m.conj().T)
    if skew > HERMITIAN_TOL * max(1.0, max_abs(m)):
        raise NotHermitianError(f"{rows}x{cols} matrix is not Hermitian (max |A - A^H| = {skew:.3e})")
    m = 0.5 * (m + m.conj().T)
    try:
        w, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition did not converge for {rows}x{cols} matrix") from exc
    order = np.arange(rows)[::-1]
    return w[order], vecs[:, order]


def _givens_pair(d1: float, d2: float, target: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotations G1, G2 with G2^T diag(d1, d2) G1 = [[target, x], [0, d1 d2 / target]].

    target must lie between d1 and d2.
    """
    denom = d1 * d1 - d2 * d2
    if abs(denom) <= 1e-300 or abs(denom) <= 1e-15 * max(d1 * d1, d2 * d2):
        c, s = 1.0, 0.0
    else:
        c2 = min(1.0, max(0.0, (target * target - d2 * d2) / denom))
        c = np.sqrt(c2)
        s = np.sqrt(1.0 - c2)
    g1 = np.array([[c, -s], [s, c]])
    g2 = np.array([[c * d1, -s * d2], [s * d2, c * d1]]) / target
    return g1, g2


def gmd(a, k: int) -> GmdFactors:
    """Geometric mean decomposition of the rank-k truncation of a.

    Starts from the truncated SVD and equalizes the diagonal with one
    pair of Givens rotations per step, permuting a partner entry that
    straddles the geometric mean next to the active position.
    """
    m = as_matrix(a)
    rows, cols = m.shape
    if k < 1 or k > min(rows, cols):
        raise RankError(f"k={k} out of range for {rows}x{cols} matrix")
    f = svd(m)
    sig = f.sigma[:k]
    if sig[0] == 0.0 or sig[k - 1] <= RANK_TOL * sig[0]:
        raise RankError(f"k={k} exceeds numerical rank of {rows}x{cols} matrix (sigma_k={sig[k - 1]:.3e})")

    sigma_bar = float(np.exp(np.mean(np.log(sig))))
    q = f.u[:, :k].copy()
    p = f.v[:, :k].copy()
    r = np.diag(sig).astype(np.complex128)

    for i in range(k - 1):
        d1 = r[i, i].real
        tail = np.array([r[j, j].real for j in range(i + 1, k)])
        j = i + 1 + int(np.argmin(tail) if d1 >= sigma_bar else np.argmax(tail))
        if j != i + 1:
            # trailing block is still diagonal, so a symmetric swap keeps R triangular
            r[:, [i + 1, j]] = r[:, [j, i + 1]]
            r[[i + 1, j], :] = r[[j, i + 1], :]
            q[:, [i + 1, j]] = q[:, [j, i + 1]]
            p[:, [i + 1, j]] = p[:, [j, i + 1]]
        d2 = r[i + 1, i + 1].real
        g1, g2 = _givens_pair(d1, d2, sigma_bar)
        blk = [i, i + 1]
        r[blk, :] = g2.T @ r[blk, :]
        r[:, blk] = r[:, blk] @ g1
        r[i + 1, i] = 0.0
        r[i, i] = sigma_bar
        q[:, blk] = q[:, blk] @ g2
        p[:, blk] = p[:, blk] @ g1

    r[k - 1, k - 1] = r[k - 1, k - 1].real
    return GmdFactors(q=q, r=np.triu(r), p=p, sigma_bar=sigma_bar)
