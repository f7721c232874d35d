"""Stage pipelines for right-multiplication by butterfly-structured matrices.

A pipeline is a list of stages applied left to right to the rows of ``X``, so
``X @ B`` for ``B = S_1 S_2 ... S_t``. Three stage kinds suffice for every
abridged transform: a column gather (permutation), a column scaling, and a
radix-2 butterfly ``I ⊗ [[I_h, I_h], [I_h, -I_h]]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Permute:
    """``X @ P`` with ``(X @ P)[:, j] = X[:, idx[j]]``."""

    idx: np.ndarray

    def apply(self, X):
        return X[:, self.idx]

    def flops(self) -> int:
        return 0

    def dense(self) -> np.ndarray:
        n = self.idx.size
        P = np.zeros((n, n))
        P[self.idx, np.arange(n)] = 1.0
        return P


@dataclass(frozen=True, eq=False)
class Scale:
    """Column scaling; ``active`` marks entries that cost a multiplication."""

    w: np.ndarray
    active: np.ndarray

    def apply(self, X):
        return X * self.w

    def flops(self) -> int:
        return int(np.count_nonzero(self.active))

    def dense(self) -> np.ndarray:
        return np.diag(self.w)


@dataclass(frozen=True)
class Butterfly:
    """``X @ (I_{n/2h} ⊗ H^{(2h)})``: one addition or subtraction per entry."""

    h: int

    def apply(self, X):
        m, n = X.shape
        Y = X.reshape(m, n // (2 * self.h), 2, self.h)
        a, b = Y[:, :, 0, :], Y[:, :, 1, :]
        return np.stack((a + b, a - b), axis=2).reshape(m, n)

    def flops_for(self, n: int) -> int:
        return n


def scale(w, active=None) -> Scale:
    w = np.asarray(w)
    if active is None:
        active = ~np.isclose(w, 1.0, rtol=0.0, atol=0.0)
    return Scale(w, np.asarray(active, dtype=bool))


def hadamard_stages(n: int, d: int) -> list:
    """Depth-d abridged Walsh-Hadamard ``H_{n,d}``: butterflies of half-width
    ``n/2^d, ..., n/2``; full Hadamard when ``d = log2 n``."""
    s = n >> d
    return [Butterfly(s << j) for j in range(d)]


def _shuffle(size: int) -> np.ndarray:
    return np.concatenate((np.arange(0, size, 2), np.arange(1, size, 2)))


def fourier_stages(n: int, d: int) -> list:
    """Depth-d abridged DFT ``Omega_{n,d}`` (decimation in frequency).

    The innermost factor is a bare butterfly ``H^{(2s)}``, ``2s = n/2^(d-1)``;
    each outer level of size ``N = 2q`` adds an even/odd shuffle before the
    recursion and twiddles ``exp(2 pi i j / N)`` on the odd half after it.
    """
    s = n >> d
    size = 2 * s
    stages: list = [Butterfly(s)]
    while size < n:
        q, size = size, 2 * size
        blocks = n // size
        shuffle = (_shuffle(size)[None, :] + size * np.arange(blocks)[:, None]).ravel()
        tw = np.ones(size, dtype=complex)
        tw[q:] = np.exp(2j * np.pi * np.arange(q) / size)
        active = np.zeros(size, dtype=bool)
        active[q:] = True
        stages = (
            [Permute(shuffle)]
            + stages
            + [Scale(np.tile(tw, blocks), np.tile(active, blocks)), Butterfly(q)]
        )
    return stages


def adjoint(stages: list) -> list:
    """Stages of ``B^H`` given stages of ``B``."""
    out = []
    for st in reversed(stages):
        if isinstance(st, Permute):
            inv = np.empty_like(st.idx)
            inv[st.idx] = np.arange(st.idx.size)
            out.append(Permute(inv))
        elif isinstance(st, Scale):
            out.append(Scale(np.conj(st.w), st.active))
        else:
            out.append(st)
    return out


def fuse(stages: list) -> list:
    """Move permutations ahead of scalings and merge neighbours of one kind.

    ``Scale(w) Permute(idx) = Permute(idx) Scale(w[idx])``. Identity
    permutations vanish; merged scalings keep the union of active entries.
    """
    work = list(stages)
    changed = True
    while changed:
        changed = False
        out: list = []
        for st in work:
            prev = out[-1] if out else None
            if isinstance(st, Permute) and isinstance(prev, Scale):
                out[-1] = st
                out.append(Scale(prev.w[st.idx], prev.active[st.idx]))
                changed = True
            elif isinstance(st, Permute) and isinstance(prev, Permute):
                out[-1] = Permute(prev.idx[st.idx])
                changed = True
            elif isinstance(st, Scale) and isinstance(prev, Scale):
                out[-1] = Scale(prev.w * st.w, prev.active | st.active)
                changed = True
            else:
                out.append(st)
        work = [
            st
            for st in out
            if not (isinstance(st, Permute) and np.array_equal(st.idx, np.arange(st.idx.size)))
        ]
    return work


def run(stages: list, X: np.ndarray) -> np.ndarray:
    for st in stages:
        X = st.apply(X)
    return X


def stage_flops(stages: list, n: int) -> int:
    return sum(st.flops_for(n) if isinstance(st, Butterfly) else st.flops() for st in stages)


def is_complex(stages: list) -> bool:
    return any(isinstance(st, Scale) and np.iscomplexobj(st.w) for st in stages)
