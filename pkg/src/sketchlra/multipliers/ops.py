"""Runtime operators: implicit n x n matrices applied from the right.

Every operator maps an m x n block ``X`` to ``X @ B`` (or selected columns of
it) and reports to an optional ``FlopCounter`` what a single row costs. The
counts are tallied while the code executes, so a one-row run is an audit of
the arithmetic actually performed.
"""

from __future__ import annotations

from math import ceil, log2

import numpy as np
import scipy.linalg

from . import stages as st


class FlopCounter:
    def __init__(self):
        self.count = 0

    def add(self, k: int) -> None:
        self.count += int(k)


def _tally(counter, k):
    if counter is not None:
        counter.add(k)


class Operator:
    n: int
    is_complex: bool = False

    def right(self, X, counter=None):
        raise NotImplementedError

    def right_cols(self, X, cols, counter=None):
        return self.right(X, counter)[:, cols]

    def flops(self) -> int:
        """Per-row cost of a full ``X @ B``."""
        c = FlopCounter()
        self.right(np.zeros((1, self.n), dtype=complex if self.is_complex else float), c)
        return c.count


class StagedOp(Operator):
    def __init__(self, n, stage_list):
        self.n = n
        self.stages = st.fuse(stage_list)
        self.is_complex = st.is_complex(self.stages)

    def right(self, X, counter=None):
        _tally(counter, st.stage_flops(self.stages, self.n))
        return st.run(self.stages, X)


class ShiftSumOp(Operator):
    """``sum_t v_t Z_f^{p_t}`` (or its transpose) by shifted additions.

    Row-wise, ``x @ Z_f^p`` rotates ``x`` left by ``p`` and multiplies the
    wrapped part by ``f``.
    """

    def __init__(self, n, f, positions, values, transposed=False):
        self.n = n
        self.f = f
        self.positions = np.asarray(positions, dtype=int)
        self.values = np.asarray(values)
        self.transposed = transposed
        self.is_complex = np.iscomplexobj(self.values) or np.iscomplexobj(f)
        self.unit_real = (
            not self.is_complex
            and np.all(np.abs(self.values) == 1)
            and f in (0, 1, -1)
        )

    def _shift(self, X, p):
        n, f = self.n, self.f
        Y = np.empty_like(X, dtype=np.result_type(X, self.values, f))
        if not self.transposed:
            Y[:, : n - p] = X[:, p:]
            Y[:, n - p :] = f * X[:, :p]
        else:
            Y[:, p:] = X[:, : n - p]
            Y[:, :p] = f * X[:, n - p :]
        return Y

    def right(self, X, counter=None):
        n, q = self.n, self.positions.size
        if self.unit_real:
            # one signed add per entry and term; the first term is a signed copy
            _tally(counter, q * n)
        else:
            _tally(counter, (2 * q - 1) * n)
        Y = None
        for p, v in zip(self.positions, self.values):
            term = v * self._shift(X, int(p))
            Y = term if Y is None else Y + term
        return Y


class FFTCirculantOp(Operator):
    """Dense f-circulant ``Z_f(v)`` through the diagonalization by the DFT.

    With ``g^n = f``, ``Z_f(v) = D_g^{-1} C D_g`` for the plain circulant C of
    ``g^i v_i``. Row-wise ``x Z_f(v) = ifft(fft(x / g^i) * d) * g^j`` with
    ``d = n ifft(g^i v)``; ``|f| = 1``.
    """

    def __init__(self, n, f, v):
        self.n = n
        self.f = complex(f)
        self.v = np.asarray(v)
        self.powers = np.exp(np.log(self.f) / n) ** np.arange(n)
        self.d = n * np.fft.ifft(self.powers * self.v)
        self.is_complex = np.iscomplexobj(self.v) or self.f != 1

    def right(self, X, counter=None):
        n = self.n
        # two length-n FFTs plus the diagonal and the f-scalings
        _tally(counter, 2 * ceil(5 * n * log2(max(n, 2)) / 2) + (6 if self.f != 1 else 2) * n)
        Z = X / self.powers if self.f != 1 else X
        Y = np.fft.ifft(np.fft.fft(Z, axis=1) * self.d, axis=1)
        if self.f != 1:
            Y = Y * self.powers
        return Y if self.is_complex else Y.real


class ToeplitzOp(Operator):
    """``T = (t_{i-j})`` given its first column ``c`` and first row ``r``."""

    def __init__(self, n, c, r):
        self.n = n
        self.c, self.r = np.asarray(c), np.asarray(r)
        self.is_complex = np.iscomplexobj(self.c) or np.iscomplexobj(self.r)

    def right(self, X, counter=None):
        n = self.n
        _tally(counter, 3 * ceil(5 * 2 * n * log2(2 * n) / 2) + 8 * n)
        # X @ T = (T^T X^T)^T and T^T is Toeplitz with the roles of c, r swapped
        Y = scipy.linalg.matmul_toeplitz((self.r, self.c), X.T, check_finite=False)
        return np.asarray(Y).T


class InverseBidiagonalOp(Operator):
    """``(diag(a) + diag(e) Z^k)^{-1}`` (lower) or ``(diag(a) + Z^{kT} diag(e))^{-1}``.

    ``Y @ L = X`` is solved by substitution along stride-k chains, k columns
    at a time.
    """

    def __init__(self, n, main, off, k, lower):
        self.n = n
        self.main = np.broadcast_to(np.asarray(main), (n,)).copy()
        self.off = np.asarray(off)
        self.k = k
        self.lower = lower
        self.is_complex = np.iscomplexobj(self.main) or np.iscomplexobj(self.off)
        active = self.off[k:] if lower else self.off[k:]
        self.unit_off = (not self.is_complex) and np.all(np.abs(active) == 1)
        self.unit_main = np.all(self.main == 1)

    def right(self, X, counter=None):
        n, k = self.n, self.k
        per = (n - k) if self.unit_off else 2 * (n - k)
        if not self.unit_main:
            per += n
        _tally(counter, per)
        Y = np.empty(X.shape, dtype=np.result_type(X, self.main, self.off))
        inv = None if self.unit_main else 1.0 / self.main
        if self.lower:
            # Y_j a_j + Y_{j+k} e_{j+k} = X_j, backwards
            for start in range(((n - 1) // k) * k, -1, -k):
                j = slice(start, min(start + k, n))
                blk = X[:, j]
                if start + k < n:
                    nxt = slice(start + k, min(start + 2 * k, n))
                    w = nxt.stop - nxt.start
                    blk = blk.copy()
                    blk[:, :w] = blk[:, :w] - Y[:, nxt] * self.off[nxt]
                Y[:, j] = blk if inv is None else blk * inv[j]
        else:
            # Y_j a_j + Y_{j-k} e_j = X_j, forwards
            for start in range(0, n, k):
                j = slice(start, min(start + k, n))
                blk = X[:, j]
                if start >= k:
                    prv = slice(start - k, start - k + (j.stop - j.start))
                    blk = blk - Y[:, prv] * self.off[j]
                Y[:, j] = blk if inv is None else blk * inv[j]
        return Y


class DenseOp(Operator):
    def __init__(self, B):
        self.B = np.asarray(B)
        self.n = self.B.shape[0]
        self.is_complex = np.iscomplexobj(self.B)

    def right(self, X, counter=None):
        return self.right_cols(X, slice(None), counter)

    def right_cols(self, X, cols, counter=None):
        Bsel = self.B[:, cols]
        _tally(counter, Bsel.shape[1] * (2 * self.n - 1))
        return X @ Bsel


class RandomDenseOp(Operator):
    """Dense random matrix whose column j comes from its own stream (seed, j),
    so any column subset is generated without the rest."""

    def __init__(self, n, seed, kind):
        from ..rand import RngStream

        self.n = n
        self.seed = seed
        self.kind = kind
        self._stream = RngStream(seed)

    def columns(self, cols) -> np.ndarray:
        idx = np.arange(self.n)[cols]
        out = np.empty((self.n, idx.size))
        for t, j in enumerate(idx):
            g = self._stream.child(int(j)).generator()
            if self.kind == "gaussian":
                out[:, t] = g.standard_normal(self.n)
            else:
                out[:, t] = g.integers(-1, 2, size=self.n)
        return out

    def right(self, X, counter=None):
        return self.right_cols(X, slice(None), counter)

    def right_cols(self, X, cols, counter=None):
        B = self.columns(cols)
        _tally(counter, B.shape[1] * (2 * self.n - 1))
        return X @ B


class BlockDiagonalOp(Operator):
    def __init__(self, blocks):
        self.blocks = list(blocks)
        self.sizes = [b.n for b in self.blocks]
        self.offsets = np.concatenate(([0], np.cumsum(self.sizes)))
        self.n = int(self.offsets[-1])
        self.is_complex = any(b.is_complex for b in self.blocks)

    def right(self, X, counter=None):
        parts = [
            b.right(X[:, self.offsets[i] : self.offsets[i + 1]], counter)
            for i, b in enumerate(self.blocks)
        ]
        return np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]


class SumOp(Operator):
    """Term-by-term ``sum_t c_t B_t``; never materialized."""

    def __init__(self, terms, coeffs):
        self.terms = list(terms)
        self.coeffs = np.asarray(coeffs)
        self.n = self.terms[0].n
        self.is_complex = any(t.is_complex for t in self.terms) or np.iscomplexobj(self.coeffs)

    def right(self, X, counter=None):
        return self.right_cols(X, slice(None), counter)

    def right_cols(self, X, cols, counter=None):
        width = np.arange(self.n)[cols].size
        out = None
        for c, t in zip(self.coeffs, self.terms):
            Y = t.right_cols(X, cols, counter)
            if abs(c) != 1:
                _tally(counter, width)
            Y = c * Y if c != 1 else Y
            out = Y if out is None else out + Y
        _tally(counter, (len(self.terms) - 1) * width)
        return out


class ProductOp(Operator):
    """``B_1 B_2 ... B_t`` applied as ``((X B_1) B_2) ...``."""

    def __init__(self, factors):
        self.factors = list(factors)
        self.n = self.factors[0].n
        self.is_complex = any(f.is_complex for f in self.factors)

    def right(self, X, counter=None):
        return self.right_cols(X, slice(None), counter)

    def right_cols(self, X, cols, counter=None):
        for f in self.factors[:-1]:
            X = f.right(X, counter)
        return self.factors[-1].right_cols(X, cols, counter)
