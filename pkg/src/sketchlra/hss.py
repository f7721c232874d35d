"""HSS compression with randomized generators and a flop-counted fast matvec.

Nested-basis form over a perfect binary tree. Every non-root node ``i``
owns a column basis ``V_i`` of its neutered block column ``M[~I_i, I_i]`` and
a row basis ``U_i`` of its block row ``M[I_i, ~I_i]``. Leaves store them
explicitly; inner nodes store transfer matrices so that
``V_p = diag(V_a, V_b) W_p``. Sibling blocks are ``M[I_a, I_b] ~ U_a B_ab V_b^T``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dense
from .errors import GeneratorRankExceeded
from .multipliers import FlopCounter, MultiplierSpec, build, families as fam
from .rand import as_stream
from .rangefinder import range_find

OVERSAMPLING = 4


@dataclass(frozen=True)
class Node:
    index: int
    start: int
    stop: int
    level: int
    children: tuple = ()
    parent: int | None = None

    @property
    def size(self) -> int:
        return self.stop - self.start

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def rows(self) -> slice:
        return slice(self.start, self.stop)


def _mv(rows: int, cols: int) -> int:
    """Flops of a dense (rows x cols) matrix-vector product."""
    return rows * (2 * cols - 1) if rows and cols else 0


def default_leaf_max(r: int) -> int:
    return max(2 * r, 16)


def build_tree(n: int, leaf_max: int) -> list[Node]:
    """Perfect binary tree over ``range(n)``; halving stops once leaves fit ``leaf_max``."""
    if n < 1 or leaf_max < 1:
        raise ValueError("need n, leaf_max >= 1")
    depth = 0
    while -(-n // (1 << depth)) > leaf_max:
        depth += 1
    nodes: list[Node] = []

    def make(start, stop, level, parent):
        idx = len(nodes)
        nodes.append(None)
        kids = ()
        if level < depth:
            mid = (start + stop) // 2
            kids = (make(start, mid, level + 1, idx), make(mid, stop, level + 1, idx))
        nodes[idx] = Node(idx, start, stop, level, kids, parent)
        return idx

    make(0, n, 0, None)
    return nodes


def sibling_pairs(tree):
    for node in tree:
        if node.children:
            a, b = node.children
            yield tree[a], tree[b]


def partition_blocks(tree):
    """Off-diagonal blocks of the partition: every sibling pair in both orders."""
    for a, b in sibling_pairs(tree):
        yield a.rows, b.rows
        yield b.rows, a.rows


def neutered_column(M, node: Node) -> np.ndarray:
    """``M[~I, I]``: the block column of ``I`` with its diagonal block removed."""
    return np.concatenate([M[: node.start, node.rows], M[node.stop :, node.rows]], axis=0)


def neutered_split(M, node: Node):
    """Super- and sub-diagonal parts of the neutered block column."""
    return M[: node.start, node.rows], M[node.stop :, node.rows]


@dataclass(eq=False)
class HssMatrix:
    n: int
    r: int
    xi: float
    tree: list
    D: dict
    U: dict
    V: dict
    R: dict
    W: dict
    B: dict
    compression_flops: int = 0
    leaf_max: int = 16
    symmetric: bool = False
    fallbacks: int = 0
    _U_full: dict = field(default_factory=dict, repr=False)
    _V_full: dict = field(default_factory=dict, repr=False)

    @property
    def leaves(self):
        return [t for t in self.tree if t.is_leaf]

    def rank(self, i: int) -> int:
        return self.V[i].shape[1] if self.tree[i].is_leaf else self.W[i].shape[1]

    def basis(self, i: int, which: str = "V") -> np.ndarray:
        """Explicit ``U_i`` or ``V_i`` (size_i x k_i) expanded through the transfers."""
        cache = self._V_full if which == "V" else self._U_full
        if i not in cache:
            node = self.tree[i]
            if node.is_leaf:
                cache[i] = (self.V if which == "V" else self.U)[i]
            else:
                T = (self.W if which == "V" else self.R)[i]
                a, b = node.children
                Xa, Xb = self.basis(a, which), self.basis(b, which)
                ka = Xa.shape[1]
                cache[i] = np.concatenate([Xa @ T[:ka], Xb @ T[ka:]], axis=0)
        return cache[i]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for leaf in self.leaves:
            out[leaf.rows, leaf.rows] = self.D[leaf.index]
        for a, b in sibling_pairs(self.tree):
            Ua, Vb = self.basis(a.index, "U"), self.basis(b.index, "V")
            Ub, Va = self.basis(b.index, "U"), self.basis(a.index, "V")
            out[a.rows, b.rows] = Ua @ self.B[(a.index, b.index)] @ Vb.T
            out[b.rows, a.rows] = Ub @ self.B[(b.index, a.index)] @ Va.T
        return out

    def generator(self, i: int):
        """Pair ``(F, H)`` with ``M[~I_i, I_i] ~ F H`` (F: h x k_i, H: k_i x |I_i|)."""
        node = self.tree[i]
        V = self.basis(i, "V")
        return neutered_column(self.to_dense(), node) @ V, V.T

    def matvec(self, x, counter: FlopCounter | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vec = x.ndim == 1
        X = x[:, None] if vec else x
        if X.shape[0] != self.n:
            raise ValueError(f"vector of length {X.shape[0]} for an HSS matrix of size {self.n}")
        c = X.shape[1]
        flops = 0
        xh: dict[int, np.ndarray] = {}
        # upward pass, children before parents
        for node in reversed(self.tree):
            i = node.index
            if node.parent is None:
                continue
            if node.is_leaf:
                xh[i] = self.V[i].T @ X[node.rows]
                flops += c * _mv(self.V[i].shape[1], node.size)
            else:
                a, b = node.children
                xh[i] = self.W[i].T @ np.concatenate([xh[a], xh[b]], axis=0)
                kin, kout = self.W[i].shape
                flops += c * _mv(kout, kin)
        yh: dict[int, np.ndarray] = {}
        for a, b in sibling_pairs(self.tree):
            Bab, Bba = self.B[(a.index, b.index)], self.B[(b.index, a.index)]
            yh[a.index] = Bab @ xh[b.index]
            yh[b.index] = Bba @ xh[a.index]
            flops += c * (_mv(*Bab.shape) + _mv(*Bba.shape))
        # downward pass, parents before children
        Y = np.empty_like(X)
        for node in self.tree:
            i = node.index
            if node.parent is not None and not node.is_leaf:
                a, b = node.children
                z = self.R[i] @ yh[i]
                flops += c * _mv(*self.R[i].shape)
                ka = yh[a].shape[0]
                yh[a] = yh[a] + z[:ka]
                yh[b] = yh[b] + z[ka:]
                flops += c * z.shape[0]
            if node.is_leaf:
                s = node.size
                y = self.D[i] @ X[node.rows]
                flops += c * _mv(s, s)
                if node.parent is not None and self.U[i].shape[1]:
                    y = y + self.U[i] @ yh[i]
                    flops += c * 2 * self.U[i].shape[1] * s
                Y[node.rows] = y
        if counter is not None:
            counter.add(flops)
        return Y[:, 0] if vec else Y

    def matvec_flops(self) -> int:
        c = FlopCounter()
        self.matvec(np.zeros(self.n), c)
        return c.count

    # storage ------------------------------------------------------------------

    def save(self, directory) -> None:
        """Directory layout: ``manifest.json`` plus one DMAT file per stored block."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        files = []

        def put(name, A):
            dense.write_dmat(out / name, np.atleast_2d(A) if A.size else np.zeros((A.shape[0] or 1, 0)))
            files.append(name)

        for kind, store in (("D", self.D), ("U", self.U), ("V", self.V), ("R", self.R), ("W", self.W)):
            for i, A in store.items():
                put(f"{kind}_{i}.dmat", A)
        for (a, b), A in self.B.items():
            put(f"B_{a}_{b}.dmat", A)
        ranks = {str(t.index): self.rank(t.index) for t in self.tree if t.parent is not None}
        manifest = {
            "n": self.n, "r": self.r, "xi": self.xi, "leaf_max": self.leaf_max,
            "symmetric": self.symmetric, "compression_flops": self.compression_flops,
            "fallbacks": self.fallbacks,
            "tree": [[t.start, t.stop, t.level, list(t.children), t.parent] for t in self.tree],
            "ranks": ranks,
            "files": files,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")

    @classmethod
    def load(cls, directory) -> "HssMatrix":
        src = Path(directory)
        man = json.loads((src / "manifest.json").read_text())
        tree = [Node(i, s, e, lv, tuple(ch), p) for i, (s, e, lv, ch, p) in enumerate(man["tree"])]
        ranks = {int(k): v for k, v in man["ranks"].items()}
        stores = {k: {} for k in "DUVRWB"}
        for name in man["files"]:
            parts = name[:-5].split("_")
            A = dense.read_dmat(src / name)
            if parts[0] == "B":
                a, b = int(parts[1]), int(parts[2])
                A = A.reshape(ranks[a], ranks[b])
                stores["B"][(a, b)] = A
            else:
                i = int(parts[1])
                node = tree[i]
                if parts[0] in "UV":
                    A = A.reshape(node.size, ranks.get(i, 0))
                elif parts[0] in "RW":
                    kin = sum(ranks[c] for c in node.children)
                    A = A.reshape(kin, ranks[i])
                stores[parts[0]][i] = A
        return cls(man["n"], man["r"], man["xi"], tree, stores["D"], stores["U"], stores["V"],
                   stores["R"], stores["W"], stores["B"], man["compression_flops"], man["leaf_max"],
                   man["symmetric"], man["fallbacks"])


def _multiplier(kind, h: int, l: int):
    if callable(kind) and not isinstance(kind, fam.Family):
        return kind(h, l)
    if kind == "gaussian":
        return MultiplierSpec(fam.Gaussian(h), l)
    if kind == "hadamard":

        def block(s):
            return fam.AbridgedHadamard(s, min(3, s.bit_length() - 1))

        base = fam.BlockDiagonal.split(h, block)
        return MultiplierSpec(fam.ScaledPermuted(base, side="right", scaling="signs"), l)
    raise ValueError(f"unknown multiplier family {kind!r}")


class _Compressor:
    def __init__(self, r, xi, scale, kind, stream):
        self.r, self.xi, self.scale, self.kind, self.stream = r, xi, scale, kind, stream
        self.flops = 0
        self.fallbacks = 0
        self.calls = 0

    def basis(self, N: np.ndarray) -> np.ndarray:
        """Orthonormal basis (k x rank) of the row space of ``N`` (h x k)."""
        h, k = N.shape
        if h == 0 or k == 0 or not np.any(N):
            return np.zeros((k, 0))
        tol = self.xi * self.scale
        Nt = N.T
        l = min(self.r + OVERSAMPLING, h, k)
        stream = self.stream.child(self.calls)
        self.calls += 1
        spec = _multiplier(self.kind, h, l)
        mult = build(spec, stream.child(0))
        res = range_find(Nt, mult, tol, stream.child(1))
        probe = FlopCounter()
        mult.apply_right(np.zeros((1, h)), probe)
        self.flops += k * probe.count + 2 * k * l * l + 2 * l * k * h
        if not res.success and self.kind != "gaussian":
            self.fallbacks += 1
            res = range_find(Nt, MultiplierSpec(fam.Gaussian(h), l), tol, stream.child(2))
            self.flops += 2 * k * h * l + 2 * k * l * l + 2 * l * k * h
        # truncate the sketch basis with a small SVD of Q^T N^T
        f = dense.svd(res.QtM, rank_tol=0.0)
        self.flops += 4 * l * l * h
        keep = int(np.sum(f.sigma > tol))
        if keep > self.r or not res.success:
            rank = dense.numerical_rank(N, tol)
            raise GeneratorRankExceeded(
                f"neutered block of shape {N.shape} has numerical rank {rank} > r={self.r} at {tol:.3g}"
            )
        return res.Q @ f.S[:, :keep]


def hss_compress(M, r: int, xi: float, mult_family="gaussian", rng=None, *,
                 leaf_max: int | None = None, symmetric: bool | None = None) -> HssMatrix:
    """Compress ``M`` into nested-basis HSS form with generator length at most ``r``.

    Bases are sketched with ``l = r + 4`` columns of an h-dimensional
    multiplier (``"gaussian"``, ``"hadamard"`` or ``callable(h, l)``
    returning a MultiplierSpec), then truncated at ``xi * ||M||``. Raises
    GeneratorRankExceeded when some block needs more than r.
    """
    M = dense.as_matrix(M)
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError("HSS compression needs a square matrix")
    if r < 0 or xi <= 0:
        raise ValueError("need r >= 0 and xi > 0")
    leaf_max = default_leaf_max(r) if leaf_max is None else leaf_max
    tree = build_tree(n, leaf_max)
    if symmetric is None:
        symmetric = bool(np.allclose(M, M.T, rtol=0, atol=1e-14 * np.abs(M).max()))
    stream = as_stream(rng)
    comp = _Compressor(r, xi, dense.spectral_norm(M), mult_family, stream)
    D, U, V, R, W, B = {}, {}, {}, {}, {}, {}
    Vfull, Ufull = {}, {}

    def compressed(node, full, transposed):
        """``M[~I, I] diag(V_a, V_b)`` (or the block row analogue) for an inner node."""
        src = M.T if transposed else M
        if node.is_leaf:
            return neutered_column(src, node)
        a, b = (tree[c] for c in node.children)
        cols = []
        for ch in (a, b):
            blk = np.concatenate([src[: node.start, ch.rows], src[node.stop :, ch.rows]], axis=0)
            cols.append(blk @ full[ch.index])
            comp.flops += 2 * blk.size * full[ch.index].shape[1]
        return np.concatenate(cols, axis=1)

    for node in reversed(tree):
        i = node.index
        if node.is_leaf:
            D[i] = M[node.rows, node.rows].copy()
        if node.parent is None:
            continue
        Wi = comp.basis(compressed(node, Vfull, False))
        Ri = Wi if symmetric else comp.basis(compressed(node, Ufull, True))
        if node.is_leaf:
            V[i], U[i] = Wi, Ri
            Vfull[i], Ufull[i] = Wi, Ri
        else:
            W[i], R[i] = Wi, Ri
            a, b = node.children
            ka = Vfull[a].shape[1]
            kua = Ufull[a].shape[1]
            Vfull[i] = np.concatenate([Vfull[a] @ Wi[:ka], Vfull[b] @ Wi[ka:]], axis=0)
            Ufull[i] = np.concatenate([Ufull[a] @ Ri[:kua], Ufull[b] @ Ri[kua:]], axis=0)
    for a, b in sibling_pairs(tree):
        for x, y in ((a, b), (b, a)):
            B[(x.index, y.index)] = Ufull[x.index].T @ M[x.rows, y.rows] @ Vfull[y.index]
            comp.flops += 2 * x.size * y.size * Vfull[y.index].shape[1]
    H = HssMatrix(n, r, xi, tree, D, U, V, R, W, B, comp.flops, leaf_max, symmetric, comp.fallbacks)
    H._U_full.update(Ufull)
    H._V_full.update(Vfull)
    return H


def hss_matvec(H: HssMatrix, x, counter: FlopCounter | None = None) -> np.ndarray:
    return H.matvec(x, counter)


@dataclass(frozen=True)
class PartitionRankReport:
    max_rank: int
    ranks: list
    tol: float
    holds: bool
    split_bound_holds: bool


def partition_rank_check(M, r: int, tol: float, leaf_max: int | None = None) -> PartitionRankReport:
    """Numerical ranks of the partition's off-diagonal blocks and neutered block
    columns, with the split bound ``rank(N) <= rank(upper) + rank(lower)``."""
    M = dense.as_matrix(M)
    tree = build_tree(M.shape[0], default_leaf_max(r) if leaf_max is None else leaf_max)
    ranks = [dense.numerical_rank(M[rows, cols], tol) for rows, cols in partition_blocks(tree)]
    split_ok = True
    for node in tree[1:]:
        N = neutered_column(M, node)
        up, lo = neutered_split(M, node)
        rk = dense.numerical_rank(N, tol)
        ranks.append(rk)
        parts = sum(dense.numerical_rank(P, tol) if P.size else 0 for P in (up, lo))
        split_ok &= rk <= parts
    mx = max(ranks) if ranks else 0
    return PartitionRankReport(mx, ranks, tol, mx <= r, bool(split_ok))
