"""Conjugate gradients, concentrated spd test matrices and HSS-accelerated CG."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dense
from .errors import NotConverged
from .hss import HssMatrix, hss_compress
from .multipliers import FlopCounter
from .rand import as_stream, orthogonal_matrix

# per-iteration vector work of CG: two dots, three axpys and a norm
CG_VECTOR_FLOPS = 10


def gen_concentrated(n: int, r: int, xi: float, rng=None, strong: bool = True, *,
                     center: float = 1.0, outliers=(2.0, 10.0)) -> np.ndarray:
    """Symmetric positive definite ``U diag(lam) U^T`` with clustered eigenvalues.

    ``strong``: n - r eigenvalues in ``[center, center + xi]`` and r outliers
    drawn from ``outliers``. Otherwise the values fall into r + 1 clusters of
    width xi with random centers in the outlier range.
    """
    if not 0 <= r < n:
        raise ValueError("need 0 <= r < n")
    if center <= 0 or min(outliers) <= 0:
        raise ValueError("eigenvalues must be positive")
    stream = as_stream(rng)
    g = stream.child(0).generator()
    if strong:
        lam = np.concatenate([center + xi * g.random(n - r), g.uniform(*outliers, size=r)])
    else:
        centers = g.uniform(*outliers, size=r + 1)
        lam = centers[np.arange(n) % (r + 1)] + xi * g.random(n)
    lam = g.permutation(lam)
    U = orthogonal_matrix(stream.child(1), n)
    M = (U * lam) @ U.T
    return (M + M.T) / 2


@dataclass(frozen=True)
class ConcentrationProfile:
    cluster_centers: list
    cluster_sizes: list
    xi: float
    strong: bool


def concentration_profile(values, xi: float, r: int) -> ConcentrationProfile:
    """Greedy left-to-right clustering of sorted values into intervals of width xi."""
    v = np.sort(np.asarray(values, dtype=float))
    centers, sizes = [], []
    start = 0
    for i in range(1, v.size + 1):
        if i == v.size or v[i] - v[start] > xi:
            centers.append(float((v[start] + v[i - 1]) / 2))
            sizes.append(i - start)
            start = i
    strong = len(centers) <= r + 1 and max(sizes) >= v.size - r
    return ConcentrationProfile(centers, sizes, xi, bool(strong))


@dataclass
class CgResult:
    x: np.ndarray
    iters: int
    residual_history: list = field(default_factory=list)
    converged: bool = False
    flops: int = 0


def cg_solve(apply, b, tol: float = 1e-10, max_iters: int | None = None, x0=None,
             counter: FlopCounter | None = None) -> CgResult:
    """Plain CG for an spd operator; stops at ``||b - A x|| <= tol ||b||``.

    ``residual_history`` holds the relative recursive residuals, starting with
    the initial one. Raises NotConverged (carrying the result) at ``max_iters``.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    max_iters = 10 * n if max_iters is None else max_iters
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    nb = np.linalg.norm(b)
    res = CgResult(x, 0)
    if nb == 0:
        res.x = np.zeros(n)
        res.residual_history = [0.0]
        res.converged = True
        return res
    r = b - apply(x) if x0 is not None else b.copy()
    p = r.copy()
    rr = r @ r
    res.residual_history.append(float(np.sqrt(rr) / nb))
    flops = 0
    while res.residual_history[-1] > tol:
        if res.iters >= max_iters:
            res.x, res.flops = x, flops
            raise NotConverged(f"CG stopped at {res.iters} iterations, "
                               f"residual {res.residual_history[-1]:.3g}", res)
        Ap = apply(p)
        pAp = p @ Ap
        if pAp <= 0:
            res.x, res.flops = x, flops
            raise NotConverged("operator is not positive definite along the search direction", res)
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
        res.iters += 1
        flops += CG_VECTOR_FLOPS * n
        res.residual_history.append(float(np.sqrt(rr) / nb))
    if counter is not None:
        counter.add(flops)
    res.x, res.converged, res.flops = x, True, flops
    return res


def cg_normal_equations(A, b, tol: float = 1e-10, variant: str = "residual",
                        max_iters: int | None = None) -> CgResult:
    """CG on ``A^T A x = A^T b`` (``"residual"``) or ``A A^T y = b, x = A^T y``
    (``"error"``); the product matrix is never formed."""
    A = dense.as_matrix(A)
    b = np.asarray(b, dtype=float)
    if variant == "residual":
        res = cg_solve(lambda v: A.T @ (A @ v), A.T @ b, tol, max_iters)
        return res
    if variant == "error":
        res = cg_solve(lambda v: A @ (A.T @ v), b, tol, max_iters)
        res.x = A.T @ res.x
        return res
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class AcceleratedResult:
    x: np.ndarray
    iters: int
    residual_history: list
    gamma_flops: int
    per_iter_flops: int
    dense_matvec_flops: int
    hss: HssMatrix

    @property
    def per_iter_fraction(self) -> float:
        return self.per_iter_flops / self.dense_matvec_flops


def accelerated_cg(M, b, r: int, xi: float, tol: float = 1e-8, rng=None, *,
                   mult_family="gaussian", max_iters: int | None = None) -> AcceleratedResult:
    """Compress ``M`` to HSS form, then run CG with the fast matvec.

    ``gamma_flops`` counts the compression; ``per_iter_flops`` is one HSS
    matvec plus CG's vector work, to be compared with ``dense_matvec_flops``.
    """
    M = dense.as_matrix(M)
    n = M.shape[0]
    H = hss_compress(M, r, xi, mult_family, rng)
    res = cg_solve(H.matvec, b, tol, max_iters)
    per = H.matvec_flops() + CG_VECTOR_FLOPS * n
    return AcceleratedResult(res.x, res.iters, res.residual_history, H.compression_flops,
                             per, n * (2 * n - 1), H)
