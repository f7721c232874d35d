"""Structured multipliers: primitives, the four sparse families and composites."""

from .build import FastMultiplier, MultiplierSpec, apply_right, build, materialize, resolve
from .checks import (
    circulant_diagonalization_check,
    condition_bound_check,
    flops_audit,
    flop_budget,
)
from .families import (
    AbridgedCirculant,
    AbridgedFourier,
    AbridgedHadamard,
    BlockCirculantPair,
    BlockDiagonal,
    Circulant,
    Dense,
    Diagonal,
    Family,
    Gaussian,
    HadamardPrimitive,
    InverseBidiagonal,
    Permutation,
    Product,
    ScaledPermuted,
    Shift,
    SparseCirculant,
    Sum,
    Ternary,
    Toeplitz,
    power_of_two_split,
)
from .ops import FlopCounter
from .record import dumps, loads, spec_from_dict, spec_to_dict
