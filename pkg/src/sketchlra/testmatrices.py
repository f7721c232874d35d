"""Input matrices for the experiments: SVD-generated, Laplacian, finite-difference,
factor-Gaussian and adversarially permuted."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spl

from .rand import as_stream, gaussian_matrix, orthogonal_matrix

SVD_TAIL = 1e-10
LAPLACIAN_NORM = 5e-6

# (m, n) -> grid height; the height equals the numerical rank at 1e-6
FD_CASES = {(88, 160): 5, (208, 400): 43, (408, 800): 64}


def svd_spectrum(n: int, r: int, tail: float = SVD_TAIL) -> np.ndarray:
    sigma = np.full(n, tail)
    sigma[:r] = 1.0 / np.arange(1, r + 1)
    return sigma


def svd_factors(n: int, rng=None) -> tuple[np.ndarray, np.ndarray]:
    stream = as_stream(rng)
    return orthogonal_matrix(stream.child(0), n), orthogonal_matrix(stream.child(1), n)


def gen_svd_spectrum(n: int, r: int, rng=None, *, factors=None, tail: float = SVD_TAIL) -> np.ndarray:
    """``S diag(sigma) T^T`` with ``sigma_j = 1/j`` for ``j <= r`` and ``tail`` beyond.

    ``factors`` lets several ranks share one draw of ``(S, T)``.
    """
    if not 1 <= r < n:
        raise ValueError("need 1 <= r < n")
    S, T = factors if factors is not None else svd_factors(n, rng)
    return (S * svd_spectrum(n, r, tail)) @ T.T


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _gl(fn, a, b):
    h = (b - a) / 2
    return h * np.dot(_GL_W, fn((a + b) / 2 + h * _GL_X))


def adaptive_gauss_legendre(fn, a: float, b: float, tol: float = 1e-12, depth: int = 30) -> float:
    """16-point Gauss-Legendre on halves until the two-half estimate settles."""
    whole = _gl(fn, a, b)

    def rec(a, b, whole, depth):
        mid = (a + b) / 2
        left, right = _gl(fn, a, mid), _gl(fn, mid, b)
        if depth == 0 or abs(left + right - whole) <= tol * max(1.0, abs(left + right)):
            return left + right
        return rec(a, mid, left, depth - 1) + rec(mid, b, right, depth - 1)

    return float(rec(a, b, whole, depth))


@lru_cache(maxsize=16)
def _laplacian_column(n: int) -> np.ndarray:
    h = 2 * np.pi / n
    out = np.empty(n)
    for k in range(n):
        z = 2 * np.exp(1j * h * k)
        out[k] = adaptive_gauss_legendre(lambda t: np.log(np.abs(z - np.exp(1j * t))), 0.0, h)
    return out


def gen_laplacian(n: int, norm: float = LAPLACIAN_NORM) -> np.ndarray:
    """Single-layer log kernel from the unit circle to the circle of radius 2.

    Entry (i, j) integrates ``log|2 w^i - y|`` over the j-th arc of the unit
    circle (``w = exp(2 pi i / n)``). The kernel only depends on ``i - j``
    mod n, so the matrix is circulant. The constant scales ``||M||`` to ``norm``.
    """
    if n < 8:
        raise ValueError("need n >= 8")
    col = _laplacian_column(n)
    M = scipy.linalg.circulant(col)
    # a circulant's singular values are the moduli of the DFT of its column
    return M * (norm / np.abs(np.fft.fft(col)).max())


def _lap2d(H: int, W: int) -> sp.csc_matrix:
    def T(k):
        return sp.diags([-np.ones(k - 1), 2 * np.ones(k), -np.ones(k - 1)], [-1, 0, 1])

    return (sp.kron(sp.eye(W), T(H)) + sp.kron(T(W), sp.eye(H))).tocsc()


def gen_fd_inverse(case, height: int | None = None, gap: int = 0) -> np.ndarray:
    """Block of the inverse 5-point Laplacian on an H x W grid, scaled to unit norm.

    Columns of M are the first n grid points (column-major), rows the last m;
    the two sets sit at opposite ends of a strip of height H, so the coupling
    has about H significant singular values.
    """
    m, n = map(int, case)
    if height is None:
        if (m, n) not in FD_CASES:
            raise ValueError(f"unsupported case {case}; choose from {sorted(FD_CASES)}")
        height = FD_CASES[(m, n)]
    H = int(height)
    W = -(-n // H) + gap + -(-m // H)
    L = _lap2d(H, W)
    E = np.zeros((H * W, n))
    E[np.arange(n), np.arange(n)] = 1.0
    rows = H * W - m + np.arange(m)
    M = spl.splu(L).solve(E)[rows]
    return M / np.linalg.norm(M, 2)


def gen_factor_gaussian(m: int, n: int, r: int, noise: float = 0.0, rng=None) -> np.ndarray:
    """``G_{m,r} G_{r,n} + E`` with a Gaussian ``E`` scaled to ``||E|| = noise``."""
    if not 1 <= r <= min(m, n):
        raise ValueError("need 1 <= r <= min(m, n)")
    stream = as_stream(rng)
    M = gaussian_matrix(stream.child(0), m, r) @ gaussian_matrix(stream.child(1), r, n)
    if noise > 0:
        E = gaussian_matrix(stream.child(2), m, n)
        M = M + E * (noise / np.linalg.norm(E, 2))
    return M


def gen_adversarial(m: int, n: int, r: int, perm=None) -> np.ndarray:
    """``diag(I_r, 0) P``: a multiplier works iff rows ``perm[:r]`` of B are independent."""
    if not 1 <= r <= min(m, n):
        raise ValueError("need 1 <= r <= min(m, n)")
    perm = np.arange(n) if perm is None else np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(n)):
        raise ValueError("perm must be a permutation of range(n)")
    M = np.zeros((m, n))
    M[np.arange(r), perm[:r]] = 1.0
    return M


@dataclass(frozen=True)
class InputClass:
    """A named generator with its parameters; ``generate(seed)`` is deterministic."""

    kind: str
    m: int | None = None
    n: int | None = None
    r: int | None = None
    noise: float = 0.0
    perm: tuple | None = None
    params: dict = field(default_factory=dict)

    KINDS = ("svd", "laplacian", "fd", "factor_gaussian", "adversarial")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown input class {self.kind!r}")

    @property
    def shape(self) -> tuple[int, int]:
        if self.kind in ("svd", "laplacian"):
            return self.n, self.n
        return self.m, self.n

    @property
    def xi(self) -> float:
        return 1e-6 if self.kind in ("laplacian", "fd") else 1e-5

    def generate(self, seed=0) -> np.ndarray:
        if self.kind == "svd":
            return gen_svd_spectrum(self.n, self.r, seed, **self.params)
        if self.kind == "laplacian":
            return gen_laplacian(self.n, **self.params)
        if self.kind == "fd":
            return gen_fd_inverse((self.m, self.n), **self.params)
        if self.kind == "factor_gaussian":
            return gen_factor_gaussian(self.m, self.n, self.r, self.noise, seed)
        return gen_adversarial(self.m, self.n, self.r, self.perm)
