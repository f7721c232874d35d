"""Declarative multiplier families.

A family describes an n x n matrix ``B_hat``. Fields left as ``None`` are
random and get drawn by ``resolve(stream)``; a resolved family is a complete,
replayable record of the matrix. ``operator()`` turns a resolved family into
a fast runtime operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import log2

import numpy as np

from ..errors import DimensionNotSupported
from ..rand import RngStream
from . import ops
from . import stages as st

SCALE_SET = (0.25, 0.5, 1.0, 2.0, 4.0)


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def _require_pow2(n: int, d: int, name: str) -> int:
    if not _is_pow2(n):
        raise DimensionNotSupported(
            f"{name} needs n = 2^k, got {n}; wrap it in BlockDiagonal.split for other sizes"
        )
    k = int(log2(n))
    if not 0 <= d <= k:
        raise DimensionNotSupported(f"{name} depth d={d} outside [0, {k}] for n={n}")
    return k


def power_of_two_split(n: int) -> list[int]:
    """Binary expansion of n, largest part first."""
    return [1 << b for b in range(n.bit_length() - 1, -1, -1) if n >> b & 1]


def draw_values(g: np.random.Generator, size: int, dist) -> np.ndarray:
    """Sample scalars by a named rule or uniformly from an explicit finite set."""
    if isinstance(dist, (tuple, list)):
        return g.choice(np.asarray(dist, dtype=float), size=size)
    if dist == "signs":
        return g.choice([-1.0, 1.0], size=size)
    if dist == "unit":
        return np.exp(2j * np.pi * g.random(size))
    if dist == "gaussian":
        return g.standard_normal(size)
    if dist == "scales":
        return g.choice(np.asarray(SCALE_SET), size=size)
    if dist == "pow2signs":
        return g.choice([-1.0, 1.0], size=size) * 2.0 ** g.integers(0, 4, size=size)
    raise ValueError(f"unknown value distribution {dist!r}")


class Family:
    n: int

    def resolve(self, stream: RngStream) -> "Family":
        return self

    def operator(self) -> ops.Operator:
        raise NotImplementedError


# Primitives -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Permutation(Family):
    n: int
    perm: np.ndarray | None = None

    def resolve(self, stream):
        if self.perm is not None:
            return self
        return replace(self, perm=stream.generator().permutation(self.n))

    def operator(self):
        perm = np.asarray(self.perm)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise ValueError("perm is not a bijection on 0..n-1")
        return ops.StagedOp(self.n, [st.Permute(perm)])


@dataclass(frozen=True, eq=False)
class Diagonal(Family):
    """Diagonal scaling; ``dist="unit"`` or ``"signs"`` gives the unit-modulus primitive."""

    n: int
    values: np.ndarray | None = None
    dist: object = "signs"

    def resolve(self, stream):
        if self.values is not None:
            return self
        return replace(self, values=draw_values(stream.generator(), self.n, self.dist))

    def operator(self):
        return ops.StagedOp(self.n, [st.scale(np.asarray(self.values))])


@dataclass(frozen=True, eq=False)
class Shift(Family):
    """The f-circular shift ``Z_f`` (ones on the subdiagonal, f in the corner)."""

    n: int
    f: complex = 0.0
    transposed: bool = False

    def operator(self):
        if not (self.f == 0 or np.isclose(abs(self.f), 1.0)):
            raise ValueError("Shift needs f = 0 or |f| = 1")
        n = self.n
        if not self.transposed:
            idx = np.r_[np.arange(1, n), 0]
            w = np.ones(n, dtype=np.result_type(float, self.f))
            w[n - 1] = self.f
        else:
            idx = np.r_[n - 1, np.arange(0, n - 1)]
            w = np.ones(n, dtype=np.result_type(float, self.f))
            w[0] = self.f
        return ops.StagedOp(n, [st.Permute(idx), st.scale(w)])


@dataclass(frozen=True, eq=False)
class HadamardPrimitive(Family):
    s: int

    @property
    def n(self):
        return 2 * self.s

    def operator(self):
        return ops.StagedOp(self.n, [st.Butterfly(self.s)])


# Family (i): abridged Hadamard / Fourier --------------------------------------


def _recursive_stages(n, d, base_fn, rand):
    """Abridged transform with a random permutation and sign scaling inserted
    at every level; ``rand`` maps level size to (perm, signs)."""
    s = n >> d
    size = 2 * s
    perm, signs = rand[size]
    stages = [st.Permute(np.tile(perm, n // size) + np.repeat(np.arange(0, n, size), size)),
              st.scale(np.tile(signs, n // size)), st.Butterfly(s)]
    while size < n:
        q, size = size, 2 * size
        blocks = n // size
        perm, signs = rand[size]
        offs = np.repeat(np.arange(0, n, size), size)
        twiddle = base_fn(size, q)
        stages = (
            [st.Permute(np.tile(perm, blocks) + offs), st.scale(np.tile(signs, blocks))]
            + stages
            + ([st.Scale(np.tile(twiddle[0], blocks), np.tile(twiddle[1], blocks))] if twiddle else [])
            + [st.Butterfly(q)]
        )
    return stages


def _fourier_twiddle(size, q):
    tw = np.ones(size, dtype=complex)
    tw[q:] = np.exp(2j * np.pi * np.arange(q) / size)
    active = np.zeros(size, dtype=bool)
    active[q:] = True
    return tw, active


@dataclass(frozen=True, eq=False)
class AbridgedHadamard(Family):
    """Depth-d abridged Walsh-Hadamard matrix ``H_{n,d}`` (2^d nonzeros per row).

    ``recursive=True`` inserts a random permutation and random signs at every
    recursion level. ``normalized`` scales by ``2^{-d/2}`` so that the matrix
    is orthogonal.
    """

    n: int
    d: int
    recursive: bool = False
    normalized: bool = False
    levels: tuple | None = None

    def resolve(self, stream):
        if not self.recursive or self.levels is not None:
            return self
        _require_pow2(self.n, self.d, "AbridgedHadamard")
        g = stream.generator()
        s = self.n >> self.d
        sizes = [2 * s << j for j in range(self.d)]
        lv = tuple((size, g.permutation(size), g.choice([-1.0, 1.0], size=size)) for size in sizes)
        return replace(self, levels=lv)

    def _stages(self):
        _require_pow2(self.n, self.d, "AbridgedHadamard")
        if self.d == 0:
            out = []
        elif self.recursive:
            rand = {size: (p, s) for size, p, s in self.levels}
            out = _recursive_stages(self.n, self.d, lambda size, q: None, rand)
        else:
            out = st.hadamard_stages(self.n, self.d)
        if self.normalized and self.d:
            out = [st.Scale(np.full(self.n, 2.0 ** (-self.d / 2)), np.ones(self.n, bool))] + out
        return out

    def operator(self):
        return ops.StagedOp(self.n, self._stages())


@dataclass(frozen=True, eq=False)
class AbridgedFourier(Family):
    """Depth-d abridged DFT matrix ``Omega_{n,d}``; full DFT at ``d = log2 n``."""

    n: int
    d: int
    recursive: bool = False
    normalized: bool = False
    levels: tuple | None = None

    def resolve(self, stream):
        if not self.recursive or self.levels is not None:
            return self
        _require_pow2(self.n, self.d, "AbridgedFourier")
        g = stream.generator()
        s = self.n >> self.d
        sizes = [2 * s << j for j in range(self.d)]
        lv = tuple((size, g.permutation(size), g.choice([-1.0, 1.0], size=size)) for size in sizes)
        return replace(self, levels=lv)

    def _stages(self):
        _require_pow2(self.n, self.d, "AbridgedFourier")
        if self.d == 0:
            out = []
        elif self.recursive:
            rand = {size: (p, s) for size, p, s in self.levels}
            out = _recursive_stages(self.n, self.d, _fourier_twiddle, rand)
        else:
            out = st.fourier_stages(self.n, self.d)
        if self.normalized and self.d:
            out = [st.Scale(np.full(self.n, 2.0 ** (-self.d / 2)), np.ones(self.n, bool))] + out
        return out

    def operator(self):
        return ops.StagedOp(self.n, self._stages())


@dataclass(frozen=True, eq=False)
class ScaledPermuted(Family):
    """``P D B_base`` (side="left") or ``B_base P D`` (side="right").

    ``scaling`` is ``None`` (no D) or a value distribution understood by
    ``draw_values``; ``permute=False`` drops P.
    """

    base: Family
    side: str = "left"
    permute: bool = True
    scaling: object = "signs"
    perm: np.ndarray | None = None
    diag: np.ndarray | None = None

    @property
    def n(self):
        return self.base.n

    def resolve(self, stream):
        base = self.base.resolve(stream.child(0))
        g = stream.child(1).generator()
        perm = self.perm
        if self.permute and perm is None:
            perm = g.permutation(self.n)
        diag = self.diag
        if self.scaling is not None and diag is None:
            diag = draw_values(g, self.n, self.scaling)
        return replace(self, base=base, perm=perm, diag=diag)

    def operator(self):
        extra = []
        if self.perm is not None:
            extra.append(st.Permute(np.asarray(self.perm)))
        if self.diag is not None:
            extra.append(st.scale(np.asarray(self.diag)))
        inner = self.base.operator()
        if isinstance(inner, ops.StagedOp):
            seq = extra + inner.stages if self.side == "left" else inner.stages + extra
            return ops.StagedOp(self.n, seq)
        wrap = ops.StagedOp(self.n, extra)
        return ops.ProductOp([wrap, inner] if self.side == "left" else [inner, wrap])


# Family (ii): sparse f-circulant, and dense structured relatives ----------------


@dataclass(frozen=True, eq=False)
class SparseCirculant(Family):
    """``Z_f(v)`` with q nonzeros in v; random positions and values by default
    (``dist="signs"`` gives the real ±1 variant)."""

    n: int
    q: int
    f: complex = 1.0
    positions: np.ndarray | None = None
    values: np.ndarray | None = None
    dist: object = "signs"

    def resolve(self, stream):
        g = stream.generator()
        pos = self.positions
        if pos is None:
            pos = np.sort(g.choice(self.n, size=self.q, replace=False))
        vals = self.values
        if vals is None:
            vals = draw_values(g, self.q, self.dist)
        return replace(self, positions=np.asarray(pos), values=np.asarray(vals))

    def operator(self):
        if not np.isclose(abs(self.f), 1.0):
            raise ValueError("sparse f-circulant needs |f| = 1")
        return ops.ShiftSumOp(self.n, self.f, self.positions, self.values)


@dataclass(frozen=True, eq=False)
class Circulant(Family):
    """Dense f-circulant ``Z_f(v)`` applied through FFTs."""

    n: int
    f: complex = 1.0
    v: np.ndarray | None = None
    dist: object = "gaussian"

    def resolve(self, stream):
        if self.v is not None:
            return self
        return replace(self, v=draw_values(stream.generator(), self.n, self.dist))

    def operator(self):
        return ops.FFTCirculantOp(self.n, self.f, self.v)


@dataclass(frozen=True, eq=False)
class Toeplitz(Family):
    """Toeplitz ``(t_{i-j})``; ``c`` is the first column, ``r`` the first row."""

    n: int
    c: np.ndarray | None = None
    r: np.ndarray | None = None
    dist: object = "gaussian"

    def resolve(self, stream):
        if self.c is not None and self.r is not None:
            return self
        g = stream.generator()
        c = draw_values(g, self.n, self.dist)
        r = np.r_[c[0], draw_values(g, self.n - 1, self.dist)]
        return replace(self, c=c, r=r)

    def operator(self):
        return ops.ToeplitzOp(self.n, self.c, self.r)


# Family (iii): abridged f-circulant --------------------------------------------


@dataclass(frozen=True, eq=False)
class AbridgedCirculant(Family):
    """``2^{-d} D_f^{-1} A^H D A D_f`` with A a depth-d abridged transform.

    At full depth with the Fourier transform this is the f^n-circulant whose
    diagonal is D. ``transform`` is ``"fourier"`` or ``"hadamard"``.
    """

    n: int
    d: int
    f: complex = 1.0
    diag: np.ndarray | None = None
    transform: str = "fourier"
    dist: object = "unit"

    def resolve(self, stream):
        if self.diag is not None:
            return self
        return replace(self, diag=draw_values(stream.generator(), self.n, self.dist))

    def operator(self):
        _require_pow2(self.n, self.d, "AbridgedCirculant")
        if self.transform == "fourier":
            A = st.fourier_stages(self.n, self.d) if self.d else []
        elif self.transform == "hadamard":
            A = st.hadamard_stages(self.n, self.d)
        else:
            raise ValueError(f"unknown transform {self.transform!r}")
        seq = []
        powers = complex(self.f) ** np.arange(self.n)
        if self.f != 1:
            seq.append(st.Scale(1.0 / powers, np.ones(self.n, bool)))
        seq += st.adjoint(A)
        seq.append(st.Scale(np.asarray(self.diag) * 2.0 ** (-self.d), np.ones(self.n, bool)))
        seq += A
        if self.f != 1:
            seq.append(st.Scale(powers, np.ones(self.n, bool)))
        return ops.StagedOp(self.n, seq)


# Family (iv): inverse bidiagonal -------------------------------------------------


@dataclass(frozen=True, eq=False)
class InverseBidiagonal(Family):
    """``(diag(main) + D Z^k)^{-1}`` (lower) or ``(diag(main) + (Z^k)^T D)^{-1}``.

    ``off`` holds the diagonal of D; by default random signs. ``main`` is a
    scalar or an array.
    """

    n: int
    main: object = 1.0
    off: np.ndarray | None = None
    k: int = 1
    lower: bool = True
    dist: object = "signs"

    def resolve(self, stream):
        if self.off is not None:
            return self
        return replace(self, off=draw_values(stream.generator(), self.n, self.dist))

    def operator(self):
        if not 1 <= self.k < self.n:
            raise ValueError("offset k must lie in [1, n)")
        off = np.broadcast_to(np.asarray(self.off), (self.n,))
        return ops.InverseBidiagonalOp(self.n, self.main, off, self.k, self.lower)


# Dense random and explicit ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Gaussian(Family):
    n: int
    seed: int | None = None

    def resolve(self, stream):
        if self.seed is not None:
            return self
        return replace(self, seed=int(stream.generator().integers(2**63)))

    def operator(self):
        return ops.RandomDenseOp(self.n, self.seed, "gaussian")


@dataclass(frozen=True, eq=False)
class Ternary(Family):
    """Dense i.i.d. entries from {-1, 0, 1}, each with probability 1/3."""

    n: int
    seed: int | None = None

    def resolve(self, stream):
        if self.seed is not None:
            return self
        return replace(self, seed=int(stream.generator().integers(2**63)))

    def operator(self):
        return ops.RandomDenseOp(self.n, self.seed, "ternary")


@dataclass(frozen=True, eq=False)
class Dense(Family):
    matrix: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]

    def operator(self):
        if self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("Dense family needs a square matrix")
        return ops.DenseOp(self.matrix)


# Composites -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockDiagonal(Family):
    blocks: tuple

    @property
    def n(self):
        return sum(b.n for b in self.blocks)

    @classmethod
    def split(cls, n: int, factory) -> "BlockDiagonal":
        """Block decomposition over the binary expansion of n; ``factory(size)``
        returns the family for one power-of-two block."""
        return cls(tuple(factory(size) for size in power_of_two_split(n)))

    def resolve(self, stream):
        return replace(self, blocks=tuple(b.resolve(stream.child(i)) for i, b in enumerate(self.blocks)))

    def operator(self):
        return ops.BlockDiagonalOp([b.operator() for b in self.blocks])


@dataclass(frozen=True, eq=False)
class Sum(Family):
    terms: tuple
    coeffs: tuple | None = None

    def __post_init__(self):
        if len({t.n for t in self.terms}) != 1:
            raise ValueError("all terms of a sum must share n")

    @property
    def n(self):
        return self.terms[0].n

    def resolve(self, stream):
        terms = tuple(t.resolve(stream.child(i)) for i, t in enumerate(self.terms))
        return replace(self, terms=terms)

    def operator(self):
        coeffs = self.coeffs if self.coeffs is not None else (1.0,) * len(self.terms)
        return ops.SumOp([t.operator() for t in self.terms], coeffs)


@dataclass(frozen=True, eq=False)
class Product(Family):
    factors: tuple

    def __post_init__(self):
        if len({f.n for f in self.factors}) != 1:
            raise ValueError("all factors of a product must share n")

    @property
    def n(self):
        return self.factors[0].n

    def resolve(self, stream):
        factors = tuple(f.resolve(stream.child(i)) for i, f in enumerate(self.factors))
        return replace(self, factors=factors)

    def operator(self):
        return ops.ProductOp([f.operator() for f in self.factors])


@dataclass(frozen=True, eq=False)
class BlockCirculantPair(Family):
    """The 2s x 2s matrix ``[[C, C], [C, -C]]`` for one circulant ``C = Z_1(u)``,
    applied as ``diag(C, C) H^{(2s)}``."""

    s: int
    u: np.ndarray | None = None
    dist: object = "gaussian"

    @property
    def n(self):
        return 2 * self.s

    def resolve(self, stream):
        if self.u is not None:
            return self
        return replace(self, u=draw_values(stream.generator(), self.s, self.dist))

    def operator(self):
        c = ops.FFTCirculantOp(self.s, 1.0, self.u)
        return ops.ProductOp([ops.BlockDiagonalOp([c, c]), ops.StagedOp(self.n, [st.Butterfly(self.s)])])
