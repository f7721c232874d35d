"""Dense linear algebra kernels and the verification oracles built on them.

Matrices are plain 2-D numpy arrays. ``as_matrix`` is the single validating
constructor; everything else assumes its output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import NoConvergence, ReducedRank, ThetaTooLarge

EPS = np.finfo(float).eps
TOL_RECON = 1e-10


def tol_ortho(n: int) -> float:
    return 1e-12 * np.sqrt(max(n, 1))


def as_matrix(A, *, copy: bool = False) -> np.ndarray:
    """Return ``A`` as a finite 2-D float or complex array."""
    M = np.array(A, copy=copy) if copy else np.asarray(A)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    if M.dtype.kind not in "fc":
        M = M.astype(float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def default_rank_tol(A: np.ndarray, sigma1: float | None = None) -> float:
    if sigma1 is None:
        sigma1 = spectral_norm(A)
    return max(A.shape) * EPS * sigma1


def orthogonalize(A, *, strict: bool = False, return_rank: bool = False):
    """Orthonormal basis for the columns of ``A`` by Householder QR.

    A diagonal entry of R at or below ``max(m, l) * eps * max|R_ii|`` marks a
    dependent column. With ``strict`` that raises ``ReducedRank`` (carrying Q);
    otherwise the count of independent columns is returned when asked for.
    """
    A = as_matrix(A)
    m, l = A.shape
    if m < l:
        raise ValueError(f"orthogonalize needs m >= l, got {m}x{l}")
    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diagonal(R))
    top = diag.max() if diag.size else 0.0
    rank = int(np.count_nonzero(diag > max(m, l) * EPS * top)) if top > 0 else 0
    if strict and rank < l:
        raise ReducedRank(f"sketch has rank {rank} < {l}", q=Q, rank=rank)
    return (Q, rank) if return_rank else Q


@dataclass(frozen=True)
class SvdFactors:
    S: np.ndarray
    sigma: np.ndarray
    T: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size

    def reconstruct(self) -> np.ndarray:
        return (self.S * self.sigma) @ self.T.conj().T


def _truncate(U, s, Vh, rank_tol):
    if s.size == 0 or s[0] == 0.0:
        return SvdFactors(U[:, :0], s[:0], Vh[:0].conj().T)
    if rank_tol is None:
        rank_tol = max(U.shape[0], Vh.shape[1]) * EPS * s[0]
    k = int(np.count_nonzero(s > rank_tol))
    return SvdFactors(U[:, :k], s[:k], Vh[:k].conj().T)


def svd(A, rank_tol: float | None = None) -> SvdFactors:
    """Compact SVD keeping singular values above ``rank_tol``.

    Backed by LAPACK (divide and conquer, falling back to the QR-iteration
    driver). ``jacobi_svd`` is the independent reference used in tests.
    """
    A = as_matrix(A)
    try:
        U, s, Vh = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            U, s, Vh = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(str(exc)) from exc
    return _truncate(U, s, Vh, rank_tol)


def jacobi_svd(A, *, tol: float = 1e-15, max_sweeps: int = 80, rank_tol=None) -> SvdFactors:
    """One-sided (Hestenes) Jacobi SVD of a real matrix.

    Slow and simple; its accuracy on small matrices makes it a good oracle.
    """
    A = as_matrix(A)
    if np.iscomplexobj(A):
        raise TypeError("jacobi_svd works on real matrices")
    transposed = A.shape[0] < A.shape[1]
    U = (A.T if transposed else A).astype(float, copy=True)
    n = U.shape[1]
    V = np.eye(n)
    # columns below this squared norm are numerically zero and left alone
    negligible = (EPS * np.linalg.norm(U)) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = U[:, p] @ U[:, p]
                beta = U[:, q] @ U[:, q]
                gamma = U[:, p] @ U[:, q]
                if (abs(gamma) <= tol * np.sqrt(alpha * beta) or gamma == 0.0
                        or min(alpha, beta) <= negligible):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                up, uq = U[:, p].copy(), U[:, q]
                U[:, p] = c * up - s * uq
                U[:, q] = s * up + c * uq
                vp, vq = V[:, p].copy(), V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise NoConvergence(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    sigma = np.linalg.norm(U, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, U, V = sigma[order], U[:, order], V[:, order]
    safe = np.where(sigma > 0, sigma, 1.0)
    U = U / safe
    if transposed:
        U, V = V, U
    return _truncate(U, sigma, V.T, rank_tol)


def singular_values(A) -> np.ndarray:
    return scipy.linalg.svdvals(as_matrix(A))


def numerical_rank(A, xi: float) -> int:
    if xi <= 0:
        raise ValueError("xi must be positive")
    return int(np.count_nonzero(singular_values(A) > xi))


def pseudo_inverse(A, rank_tol: float | None = None) -> np.ndarray:
    A = as_matrix(A)
    f = svd(A, rank_tol)
    return (f.T / f.sigma) @ f.S.conj().T


def spectral_norm(A, *, method: str = "auto") -> float:
    """Largest singular value.

    ``method`` is ``"svd"`` (LAPACK), ``"lanczos"`` (ARPACK, deterministic start
    vector, with an SVD fallback), or ``"auto"``: Lanczos once the smaller
    dimension exceeds 256.
    """
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    if method == "auto":
        method = "lanczos" if min(A.shape) > 256 else "svd"
    if method == "svd":
        return float(scipy.linalg.svdvals(A)[0])
    v0 = np.ones(min(A.shape), dtype=A.dtype) + 0.5 * np.cos(np.arange(min(A.shape)))
    try:
        s = scipy.sparse.linalg.svds(
            A, k=1, tol=1e-12, v0=v0, return_singular_vectors=False, maxiter=4000
        )
        return float(s[0])
    except (scipy.sparse.linalg.ArpackError, scipy.sparse.linalg.ArpackNoConvergence):
        return float(scipy.linalg.svdvals(A)[0])


def frobenius_norm(A) -> float:
    return float(np.linalg.norm(np.asarray(A)))


def condition_number(A, rank_tol: float | None = None) -> float:
    s = singular_values(A)
    if s.size == 0 or s[0] == 0:
        return np.inf
    if rank_tol is None:
        rank_tol = max(np.shape(A)) * EPS * s[0]
    kept = s[s > rank_tol]
    return float(kept[0] / kept[-1])


@dataclass(frozen=True)
class PerturbationReport:
    theta: float
    lhs: float
    bound: float
    holds: bool


def inverse_perturbation_check(C, E) -> PerturbationReport:
    """Compare ``||(C+E)^-1 - C^-1||`` with ``theta/(1-theta) * ||C^-1||``."""
    C, E = as_matrix(C), as_matrix(E)
    Cinv = np.linalg.inv(C)
    theta = spectral_norm(Cinv @ E, method="svd")
    if theta >= 1:
        raise ThetaTooLarge(f"||C^-1 E|| = {theta:.3g} >= 1")
    lhs = spectral_norm(np.linalg.inv(C + E) - Cinv, method="svd")
    bound = theta / (1 - theta) * spectral_norm(Cinv, method="svd")
    return PerturbationReport(theta, lhs, bound, lhs <= bound * (1 + 1e-12) + 1e-15)


# DMAT text format -------------------------------------------------------


def write_dmat(path, A) -> None:
    A = as_matrix(A)
    kind = "complex" if np.iscomplexobj(A) else "real"
    lines = [f"DMAT {A.shape[0]} {A.shape[1]} {kind}"]
    for row in A:
        if kind == "complex":
            lines.append(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
        else:
            lines.append(" ".join(f"{x:.17g}" for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dmat(path) -> np.ndarray:
    text = Path(path).read_text().split()
    if len(text) < 4 or text[0] != "DMAT":
        raise ValueError(f"{path}: missing DMAT header")
    rows, cols, kind = int(text[1]), int(text[2]), text[3]
    if kind not in ("real", "complex"):
        raise ValueError(f"{path}: unknown scalar kind {kind!r}")
    width = 2 if kind == "complex" else 1
    values = np.array(text[4:], dtype=float)
    if values.size != rows * cols * width:
        raise ValueError(f"{path}: expected {rows * cols * width} values, found {values.size}")
    if kind == "complex":
        values = values[0::2] + 1j * values[1::2]
    return as_matrix(values.reshape(rows, cols))
