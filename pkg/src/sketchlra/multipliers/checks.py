"""Dense-oracle checks on the multiplier families."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import dense
from ..errors import FlopBudgetExceeded
from ..rand import as_stream
from . import families as fam
from .build import FastMultiplier, build
from .ops import FlopCounter


def dft_matrix(n: int) -> np.ndarray:
    """``Omega_n = (w^{ij})`` with ``w = exp(2 pi i / n)``."""
    i = np.arange(n)
    return np.exp(2j * np.pi * np.outer(i, i) / n)


def shift_matrix(n: int, f) -> np.ndarray:
    Z = np.zeros((n, n), dtype=np.result_type(float, f))
    Z[np.arange(1, n), np.arange(n - 1)] = 1.0
    Z[0, n - 1] = f
    return Z


def f_circulant(v, f) -> np.ndarray:
    """``sum_i v_i Z_f^i`` by explicit powers."""
    v = np.asarray(v)
    n = v.size
    Z = shift_matrix(n, f)
    out = np.zeros((n, n), dtype=np.result_type(v, Z))
    P = np.eye(n, dtype=Z.dtype)
    for vi in v:
        out = out + vi * P
        P = Z @ P
    return out


@dataclass(frozen=True)
class DiagonalizationReport:
    n: int
    g: complex
    rel_error: float
    holds: bool


def circulant_diagonalization_check(f, v, tol: float = 1e-10) -> DiagonalizationReport:
    """Compare ``Z_g(v)`` with ``(1/n) D_f^{-1} Omega^H diag(Omega D_f v) Omega D_f``,
    ``g = f^n``."""
    v = np.asarray(v)
    n = v.size
    if not fam._is_pow2(n):
        raise ValueError("n must be a power of two")
    if not np.isclose(abs(f), 1.0):
        raise ValueError("need |f| = 1")
    g = complex(f) ** n
    lhs = f_circulant(v, g)
    Df = np.diag(complex(f) ** np.arange(n))
    W = dft_matrix(n)
    d = W @ Df @ v
    rhs = np.linalg.inv(Df) @ W.conj().T @ np.diag(d) @ W @ Df / n
    err = dense.spectral_norm(lhs - rhs, method="svd")
    scale = dense.spectral_norm(lhs, method="svd")
    rel = err / scale if scale > 0 else err
    return DiagonalizationReport(n, g, float(rel), bool(rel <= tol))


@dataclass(frozen=True)
class ConditionReport:
    n: int
    trials: int
    kappas: np.ndarray
    bound: float
    violations: int
    # kappa <= ||I + DZ|| ||B||_F <= 2 sqrt(n(n+1)/2), valid for every draw
    frobenius_bound: float = 0.0

    @property
    def holds(self) -> bool:
        return self.violations == 0

    @property
    def frobenius_holds(self) -> bool:
        return bool(np.all(self.kappas <= self.frobenius_bound))


def condition_bound_check(spec: fam.InverseBidiagonal, trials: int, rng=None) -> ConditionReport:
    """Condition numbers of ``trials`` independent draws of ``spec`` against ``sqrt(2n)``."""
    if np.any(np.abs(np.asarray(spec.main)) != 1):
        raise ValueError("the bound applies to unit main diagonals")
    base = as_stream(rng)
    kappas = np.empty(trials)
    for t in range(trials):
        B = build(fam_spec(spec), base.child(t)).materialize()
        kappas[t] = dense.condition_number(B)
    bound = float(np.sqrt(2 * spec.n))
    fro = float(np.sqrt(2 * spec.n * (spec.n + 1)))
    return ConditionReport(spec.n, trials, kappas, bound, int(np.count_nonzero(kappas > bound)), fro)


def fam_spec(family):
    from .build import MultiplierSpec

    return MultiplierSpec(family, family.n)


def _unwrap(family):
    return family.base if isinstance(family, fam.ScaledPermuted) else family


def flop_budget(family: fam.Family) -> int | None:
    """Per-vector flop budget of the family, or ``None`` when none is tabulated."""
    n = family.n
    if isinstance(family, fam.AbridgedHadamard) and not family.normalized:
        return (2 if family.recursive else 1) * family.d * n
    if isinstance(family, fam.AbridgedFourier) and not family.normalized and not family.recursive:
        return int(np.ceil(1.5 * family.d * n))
    if isinstance(family, fam.ScaledPermuted) and family.side == "left":
        base = family.base
        if isinstance(base, fam.AbridgedHadamard) and not (base.normalized or base.recursive):
            return (base.d + 1) * n
        if isinstance(base, fam.AbridgedFourier) and not (base.normalized or base.recursive):
            return int(np.ceil((1.5 * base.d + 1) * n))
    if isinstance(family, fam.SparseCirculant):
        vals = np.asarray(family.values)
        real_unit = not np.iscomplexobj(vals) and np.all(np.abs(vals) == 1) and family.f in (1, -1)
        return family.q * n if real_unit else (2 * family.q - 1) * n
    if isinstance(family, fam.AbridgedCirculant):
        return (3 * family.d + 2) * n
    if isinstance(family, fam.InverseBidiagonal) and np.all(np.asarray(family.main) == 1):
        off = np.broadcast_to(np.asarray(family.off), (n,))
        real_unit = not np.iscomplexobj(off) and np.all(np.abs(off) == 1)
        return n - 1 if real_unit else 2 * n - 1
    return None


def flops_audit(mult: FastMultiplier, *, check: bool = True) -> int:
    """Arithmetic counted during one column-vector application of the full matrix.

    With ``check`` the count is compared to the tabulated budget of the family
    and ``FlopBudgetExceeded`` is raised when it is over.
    """
    counter = FlopCounter()
    x = np.ones((1, mult.n), dtype=complex if mult.is_complex else float)
    mult.op.right(x, counter)
    if check:
        budget = flop_budget(mult.spec.family)
        if budget is not None and counter.count > budget:
            raise FlopBudgetExceeded(f"counted {counter.count} flops, budget {budget}")
    return counter.count
