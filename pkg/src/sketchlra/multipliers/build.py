"""Column selection, building and applying multipliers."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import DimensionMismatch
from ..rand import RngStream, as_stream
from . import families as fam
from . import ops


@dataclass(frozen=True, eq=False)
class MultiplierSpec:
    """An n x l multiplier: l columns of the n x n matrix of ``family``.

    ``columns`` is ``"leftmost"``, ``"random"`` or an explicit index sequence.
    """

    family: fam.Family
    l: int
    columns: object = "leftmost"

    @property
    def n(self) -> int:
        return self.family.n

    def __post_init__(self):
        if not 1 <= self.l <= self.family.n:
            raise ValueError(f"need 1 <= l <= n, got l={self.l}, n={self.family.n}")

    def with_l(self, l: int) -> "MultiplierSpec":
        return replace(self, l=l)


@dataclass(frozen=True, eq=False)
class FastMultiplier:
    spec: MultiplierSpec
    op: ops.Operator
    cols: np.ndarray

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def l(self) -> int:
        return self.cols.size

    @property
    def is_complex(self) -> bool:
        return self.op.is_complex

    @property
    def flops_estimate(self) -> int:
        """Arithmetic per row of M for the full n x n matrix."""
        return self.op.flops()

    def apply_right(self, M, counter=None) -> np.ndarray:
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[1] != self.n:
            raise DimensionMismatch(f"M has shape {M.shape}, multiplier needs {self.n} columns")
        cols = self._slice()
        return self.op.right_cols(M, cols, counter)

    def _slice(self):
        c = self.cols
        if c.size and np.array_equal(c, np.arange(c[0], c[0] + c.size)):
            return slice(int(c[0]), int(c[0]) + c.size)
        return c

    def materialize(self) -> np.ndarray:
        return self.apply_right(np.eye(self.n))


def resolve(spec: MultiplierSpec, rng=None) -> MultiplierSpec:
    stream = as_stream(rng)
    family = spec.family.resolve(stream.child(0))
    cols = spec.columns
    if isinstance(cols, str):
        if cols == "leftmost":
            cols = np.arange(spec.l)
        elif cols == "random":
            cols = np.sort(stream.child(1).generator().choice(spec.n, size=spec.l, replace=False))
        else:
            raise ValueError(f"unknown column selection {cols!r}")
    cols = np.asarray(cols, dtype=int)
    if cols.size != spec.l or cols.min() < 0 or cols.max() >= spec.n:
        raise ValueError("column selection does not match l or n")
    return MultiplierSpec(family, spec.l, cols)


def build(spec, rng=None) -> FastMultiplier:
    """Draw the random choices of ``spec`` from ``rng`` and compile the operator."""
    if isinstance(spec, FastMultiplier):
        return spec
    resolved = resolve(spec, rng)
    return FastMultiplier(resolved, resolved.family.operator(), np.asarray(resolved.columns))


def apply_right(mult, M, rng=None) -> np.ndarray:
    return build(mult, rng).apply_right(M)


def materialize(spec, rng=None) -> np.ndarray:
    """Dense n x l matrix of a multiplier; ``Family`` objects give n x n."""
    if isinstance(spec, fam.Family):
        spec = MultiplierSpec(spec, spec.n)
    return build(spec, rng).materialize()
