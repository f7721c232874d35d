"""Sketch-and-solve least squares."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dense
from .multipliers import MultiplierSpec, build, families as fam
from .rand import as_stream, gaussian_matrix


@dataclass(frozen=True, eq=False)
class LsrProblem:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = dense.as_matrix(self.A)
        b = np.asarray(self.b, dtype=float).ravel()
        m, d = A.shape
        if not m > d >= 1:
            raise ValueError(f"need m > d >= 1, got A of shape {A.shape}")
        if b.size != m:
            raise ValueError("b must have one entry per row of A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def augmented(self) -> np.ndarray:
        return np.column_stack([self.A, self.b])

    def residual(self, x) -> float:
        return float(np.linalg.norm(self.A @ x - self.b))


@dataclass(frozen=True, eq=False)
class Sketch:
    """A k x m sketch ``F``; ``scale * ||F x||`` estimates ``||x||``."""

    kind: str
    m: int
    k: int
    apply: object
    scale: float = 1.0
    descriptor: object = None

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X)
        return self.apply(X[:, None] if X.ndim == 1 else X)

    def dense(self) -> np.ndarray:
        return self(np.eye(self.m))


def _hadamard_rows(m, k, stream):
    """Rows of a signed, permuted block-diagonal orthonormal Hadamard matrix."""

    def block(s):
        return fam.AbridgedHadamard(s, int(math.log2(s)), normalized=True)

    H = build(MultiplierSpec(fam.BlockDiagonal.split(m, block), m), stream.child(0))
    g = stream.child(1).generator()
    perm = g.permutation(m)
    signs = g.choice([-1.0, 1.0], size=m)
    rows = g.choice(m, size=k, replace=False)

    def apply(X):
        # F X = S_rows H P D X; H is symmetric so rows of H X are columns of X^T H
        Z = (signs[:, None] * X)[perm]
        return H.apply_right(Z.T).T[rows]

    return apply, {"perm": perm, "signs": signs, "rows": rows}


def make_sketch(kind, m: int, k: int, rng=None) -> Sketch:
    """``kind`` is ``"gaussian"``, ``"hadamard"``, ``"countsketch"``, ``"identity"``
    or a MultiplierSpec of size m with k columns (used as ``F = B^T``)."""
    if not 1 <= k <= m:
        raise ValueError("need 1 <= k <= m")
    stream = as_stream(rng)
    if isinstance(kind, MultiplierSpec):
        if kind.n != m or kind.l != k:
            raise ValueError("multiplier must be m x k")
        mult = build(kind, stream)
        return Sketch("multiplier", m, k, lambda X: mult.apply_right(X.T).T, 1.0, mult.spec)
    if kind == "gaussian":
        G = gaussian_matrix(stream, k, m) / math.sqrt(k)
        return Sketch(kind, m, k, lambda X: G @ X, 1.0, G)
    if kind == "hadamard":
        apply, desc = _hadamard_rows(m, k, stream)
        return Sketch(kind, m, k, apply, math.sqrt(m / k), desc)
    if kind == "countsketch":
        g = stream.generator()
        h = g.integers(0, k, size=m)
        s = g.choice([-1.0, 1.0], size=m)

        def apply(X):
            out = np.zeros((k, X.shape[1]), dtype=np.result_type(X, float))
            np.add.at(out, h, s[:, None] * X)
            return out

        return Sketch(kind, m, k, apply, 1.0, {"rows": h, "signs": s})
    if kind == "identity":
        if k != m:
            raise ValueError("identity sketch needs k = m")
        return Sketch(kind, m, k, lambda X: X, 1.0)
    raise ValueError(f"unknown sketch kind {kind!r}")


@dataclass(frozen=True, eq=False)
class SketchedSolution:
    x_tilde: np.ndarray
    k: int
    F_spec: object
    residual: float
    opt_residual: float
    sketch_rank: int
    rank_deficient: bool

    @property
    def ratio(self) -> float:
        return self.residual / self.opt_residual if self.opt_residual > 0 else (
            1.0 if self.residual == 0 else math.inf)


def solve_exact(p: LsrProblem) -> np.ndarray:
    """Minimum-norm least squares solution ``A^+ b``."""
    return dense.pseudo_inverse(p.A) @ p.b


def solve_sketched(p: LsrProblem, k: int, F_spec="gaussian", rng=None) -> SketchedSolution:
    """Solve ``min ||F A x - F b||`` exactly and report both residuals.

    A rank-deficient ``F A`` still yields the pseudo-inverse solution, flagged
    in ``rank_deficient``.
    """
    if not p.d < k <= p.m:
        raise ValueError(f"need d < k <= m, got k={k}")
    F = F_spec if isinstance(F_spec, Sketch) else make_sketch(F_spec, p.m, k, rng)
    FAb = F(p.augmented)
    FA, Fb = FAb[:, :-1], FAb[:, -1]
    f = dense.svd(FA)
    x = f.T @ ((f.S.conj().T @ Fb) / f.sigma)
    if np.iscomplexobj(x):
        x = x.real
    x_opt = solve_exact(p)
    return SketchedSolution(
        x, k, F.descriptor if F.kind == "multiplier" else F.kind,
        p.residual(x), p.residual(x_opt), f.rank, f.rank < p.d,
    )


@dataclass(frozen=True)
class DistortionSummary:
    max_ratio: float
    min_ratio: float
    distortion: float
    xi: float | None
    holds: bool | None
    samples: int


def distortion_check(M, F, trials: int = 500, rng=None, *, xi: float | None = 0.5,
                     extra_y=()) -> DistortionSummary:
    """Ratios ``scale ||F M y|| / ||M y||`` over random ``y`` with last entry -1.

    ``F`` is a Sketch or a ``(kind, k)`` pair. The reported ``distortion`` is
    ``max |ratio - 1|``; with ``xi`` given it is asserted to stay below it.
    Vectors in ``extra_y`` (e.g. the exact and sketched solutions) are added.
    """
    M = dense.as_matrix(M)
    m, d1 = M.shape
    stream = as_stream(rng)
    if not isinstance(F, Sketch):
        kind, k = F
        F = make_sketch(kind, m, k, stream.child(0))
    Y = gaussian_matrix(stream.child(1), d1, trials)
    Y[-1] = -1.0
    if len(extra_y):
        Y = np.column_stack([Y] + [np.append(np.asarray(v, float), -1.0) for v in extra_y])
    MY = M @ Y
    ratios = F.scale * np.linalg.norm(F(MY), axis=0) / np.linalg.norm(MY, axis=0)
    dist = float(np.max(np.abs(ratios - 1.0)))
    return DistortionSummary(
        float(ratios.max()), float(ratios.min()), dist, xi,
        None if xi is None else dist <= xi, int(Y.shape[1]),
    )
