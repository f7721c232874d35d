"""Named multiplier classes used by the experiments.

``family(name, n)`` returns an unresolved n x n family. Names:

* ``gaussian``, ``B(+-1,0)`` (ternary), ``toeplitz``, ``circulant``, ``circulant+-1``
* ``3-AH``, ``3-ASPH`` (signed and permuted rows), ``3-APH``, ``3-APF``
  (column permuted); ``3-ASPH*`` scales columns from {1/4, 1/2, 1, 2, 4}
* ``set1`` .. ``set8``: the eight compositions of the three basic sets
* ``class0`` .. ``class17``: sums of abridged Hadamard, inverse-bidiagonal and
  permutation matrices

Sizes that are not powers of two use a block-diagonal split over the binary
expansion of n.
"""

from __future__ import annotations

import numpy as np

from .multipliers import families as fam


def _abridged(kind, n, d=3):
    cls = fam.AbridgedHadamard if kind == "H" else fam.AbridgedFourier
    if fam._is_pow2(n):
        return cls(n, min(d, n.bit_length() - 1))
    return fam.BlockDiagonal.split(n, lambda s: cls(s, min(d, s.bit_length() - 1)))


def ah(n):
    return _abridged("H", n)


def asph_rows(n):
    return fam.ScaledPermuted(ah(n), side="left", scaling="signs")


def aph(n):
    return fam.ScaledPermuted(ah(n), side="right", scaling=None)


def asph_cols(n):
    return fam.ScaledPermuted(ah(n), side="right", scaling="scales")


def apf(n):
    return fam.ScaledPermuted(_abridged("F", n), side="right", scaling=None)


def ibd(n, main, k, off, lower, permute=True):
    """Inverse of ``main*I + off*Z^k`` (sub-diagonal) or its super-diagonal twin."""
    base = fam.InverseBidiagonal(n, main=float(main), off=np.full(n, float(off)), k=k, lower=lower)
    return fam.ScaledPermuted(base, side="right", scaling=None) if permute else base


def SB(n, main, k, off, permute=True):
    return ibd(n, main, k, off, True, permute)


def SP(n, main, k, off, permute=True):
    return ibd(n, main, k, off, False, permute)


def basic_set(i, n):
    if i == 1:
        return apf(n)
    if i == 2:
        return fam.SparseCirculant(n, 10, 1.0)
    if i == 3:

        def scaled():
            inner = fam.InverseBidiagonal(n, main=101.0, k=1, lower=True, dist="signs")
            return fam.Product((fam.Diagonal(n, dist="pow2signs"), inner))

        return fam.Sum((scaled(), scaled()))
    raise ValueError(f"no basic set {i}")


def _set_class(i, n):
    b = lambda j: basic_set(j, n)
    table = {
        1: lambda: b(1),
        2: lambda: b(2),
        3: lambda: b(3),
        4: lambda: fam.Product((b(1), b(1))),
        5: lambda: fam.Product((b(2), b(2))),
        6: lambda: fam.Product((b(3), b(3))),
        7: lambda: fam.Sum((b(1), b(3))),
        8: lambda: fam.Sum((b(2), b(3))),
    }
    return table[i]()


def _class(i, n):
    P = lambda: fam.Permutation(n)
    A = lambda: asph_cols(n)
    H = lambda: aph(n)
    s = lambda *terms: fam.Sum(tuple(terms))
    table = {
        0: lambda: fam.Gaussian(n),
        1: lambda: s(A(), SB(n, -1, 2, -1), SP(n, 1, 1, 1)),
        2: lambda: s(A(), SB(n, 1, 2, -1), SP(n, 1, 1, -1)),
        3: lambda: s(A(), SB(n, 1, 1, -1), SP(n, 1, 1, -1)),
        4: lambda: s(A(), SB(n, 1, 1, 1), SP(n, 1, 1, -1)),
        5: lambda: s(A(), SB(n, 1, 1, 1, False), SP(n, 1, 1, -1, False)),
        6: lambda: s(A(), SB(n, -1, 2, -1), SP(n, 1, 1, 1), SB(n, 1, 9, 1)),
        7: lambda: s(A(), SB(n, 1, 2, -1), SP(n, 1, 1, -1), SP(n, 1, 8, 1)),
        8: lambda: s(A(), SB(n, 1, 1, -1), SP(n, 1, 1, -1), SB(n, 1, 4, 1)),
        9: lambda: s(A(), SB(n, 1, 1, 1), SP(n, 1, 1, -1), SP(n, -1, 3, 1)),
        10: lambda: s(SB(n, 1, 1, 1), SP(n, 1, 1, -1), SP(n, -1, 3, 1)),
        11: lambda: s(H(), SB(n, 1, 2, -1), SP(n, 1, 1, -1), SP(n, 1, 8, 1)),
        12: lambda: s(H(), SB(n, 1, 1, -1), SP(n, 1, 1, -1)),
        13: lambda: s(A(), P()),
        14: lambda: s(A(), P(), P()),
        15: lambda: s(A(), P(), P(), P()),
        16: lambda: s(H(), P(), P(), P()),
        17: lambda: s(H(), P(), P()),
    }
    return table[i]()


SIMPLE = {
    "gaussian": lambda n: fam.Gaussian(n),
    "B(+-1,0)": lambda n: fam.Ternary(n),
    "toeplitz": lambda n: fam.Toeplitz(n),
    "circulant": lambda n: fam.Circulant(n),
    "circulant+-1": lambda n: fam.Circulant(n, dist="signs"),
    "3-AH": ah,
    "3-ASPH": asph_rows,
    "3-ASPH*": asph_cols,
    "3-APH": aph,
    "3-APF": apf,
}

SVD_SWEEP = ("gaussian", "3-AH", "3-ASPH", "B(+-1,0)")
LAPLACIAN5 = ("gaussian", "toeplitz", "circulant", "3-APF", "3-APH")
SUM_CLASSES = tuple(f"class{i}" for i in range(18))
SET_CLASSES = tuple(f"set{i}" for i in range(1, 9))


def names() -> list[str]:
    return list(SIMPLE) + list(SET_CLASSES) + list(SUM_CLASSES)


def family(name: str, n: int) -> fam.Family:
    if name in SIMPLE:
        return SIMPLE[name](n)
    if name.startswith("class") and name[5:].isdigit() and int(name[5:]) <= 17:
        return _class(int(name[5:]), n)
    if name.startswith("set") and name[3:].isdigit() and 1 <= int(name[3:]) <= 8:
        return _set_class(int(name[3:]), n)
    raise KeyError(f"unknown multiplier class {name!r}; known: {', '.join(names())}")
