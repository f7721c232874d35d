"""Randomized range finders and the error estimates that go with them."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from math import e, sqrt
from pathlib import Path

import numpy as np

from . import dense
from .errors import DimensionMismatch, RankDeficientSketch, ScheduleExhausted
from .multipliers import MultiplierSpec, build, families as fam, record
from .rand import RngStream, as_stream, gaussian_matrix


class Status(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass(frozen=True)
class Frievalds:
    """Estimate the residual norm with ``t`` Gaussian probes instead of exactly."""

    t: int = 8


def _delta_mode(mode):
    if mode in (None, "exact"):
        return None
    if mode == "frievalds":
        return Frievalds()
    if isinstance(mode, Frievalds):
        return mode
    raise ValueError(f"unknown delta mode {mode!r}")


@dataclass(eq=False)
class RangeResult:
    Q: np.ndarray
    QtM: np.ndarray
    delta: float
    status: Status
    l_used: int
    multiplier_provenance: list
    power_iterations: int = 0
    tau: float = 0.0
    sketch_rank: int | None = None
    stage_deltas: list = field(default_factory=list)
    coefficients: list | None = None
    diagnostic: str = ""

    @property
    def success(self) -> bool:
        return self.status is Status.SUCCESS

    def approximation(self) -> np.ndarray:
        A = self.Q @ self.QtM
        return A.real if np.isrealobj(self.QtM) or np.allclose(A.imag, 0) else A

    def save(self, directory) -> None:
        """Write ``Q.dmat``, ``QtM.dmat`` and a JSON provenance sidecar."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        dense.write_dmat(out / "Q.dmat", self.Q)
        dense.write_dmat(out / "QtM.dmat", self.QtM)
        side = {
            "delta": self.delta,
            "status": self.status.value,
            "tau": self.tau,
            "l_used": self.l_used,
            "power_iterations": self.power_iterations,
            "sketch_rank": self.sketch_rank,
            "stage_deltas": self.stage_deltas,
            "coefficients": self.coefficients,
            "diagnostic": self.diagnostic,
            "multipliers": [record.spec_to_dict(s) for s in self.multiplier_provenance],
        }
        (out / "provenance.json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "RangeResult":
        src = Path(directory)
        side = json.loads((src / "provenance.json").read_text())
        return cls(
            Q=dense.read_dmat(src / "Q.dmat"),
            QtM=dense.read_dmat(src / "QtM.dmat"),
            delta=side["delta"],
            status=Status(side["status"]),
            l_used=side["l_used"],
            multiplier_provenance=[record.spec_from_dict(d) for d in side["multipliers"]],
            power_iterations=side["power_iterations"],
            tau=side["tau"],
            sketch_rank=side["sketch_rank"],
            stage_deltas=side["stage_deltas"],
            coefficients=side["coefficients"],
            diagnostic=side["diagnostic"],
        )


def default_tau(M, xi: float = 1e-5) -> float:
    return 10.0 * xi * dense.spectral_norm(M)


def frievalds_norm(E_apply, n: int, t: int = 8, rng=None, *, adjoint=None, m: int | None = None) -> float:
    """Largest ``||E x|| / ||x||`` over ``t`` Gaussian probes; never exceeds ``||E||``.

    With ``adjoint`` (``y -> E^H y``, E being m x n) the probes are
    ``x = E^H g`` for Gaussian g in m dimensions, one power step that lifts
    the estimate when a few directions dominate a wide residual.
    """
    if t < 1:
        raise ValueError("need at least one probe")
    if adjoint is None:
        X = gaussian_matrix(rng, n, t)
    else:
        X = np.asarray(adjoint(gaussian_matrix(rng, n if m is None else m, t)))
    Y = np.asarray(E_apply(X))
    xn = np.linalg.norm(X, axis=0)
    if not np.any(xn > 0):
        return 0.0
    keep = xn > 0
    return float(np.max(np.linalg.norm(Y[:, keep], axis=0) / xn[keep]))


def residual(M, Q, QtM=None) -> np.ndarray:
    QtM = Q.conj().T @ M if QtM is None else QtM
    return M - Q @ QtM


def _residual_norm(M, Q, QtM, mode, stream):
    if mode is None:
        return dense.spectral_norm(residual(M, Q, QtM))
    return frievalds_norm(lambda X: M @ X - Q @ (QtM @ X), M.shape[1], mode.t, stream)


def power_matrix(M, i: int) -> np.ndarray:
    """``(M M^H)^i M``, whose singular values are those of M raised to ``2i + 1``."""
    out = M
    for _ in range(i):
        out = M @ (M.conj().T @ out)
    return out


def _power(M, Y, q):
    for _ in range(q):
        Z = dense.orthogonalize(M.conj().T @ dense.orthogonalize(Y))
        Y = M @ Z
    return Y


def _finish(M, Y, tau, stream, mode, provenance, power_iters, coefficients=None):
    Q, rank = dense.orthogonalize(Y, return_rank=True)
    if rank < Y.shape[1]:
        # unpivoted QR fills dependent slots with arbitrary directions; keep range(Y) only
        Q = dense.svd(Y).S
        rank = Q.shape[1]
    QtM = Q.conj().T @ M
    delta = _residual_norm(M, Q, QtM, mode, stream)
    note = f"sketch rank {rank} < {Y.shape[1]}" if rank < Y.shape[1] else ""
    return RangeResult(
        Q, QtM, float(delta), Status.SUCCESS if delta <= tau else Status.FAILURE, Y.shape[1],
        provenance, power_iters, float(tau), rank, [float(delta)], coefficients, note,
    )


def _check(M):
    M = dense.as_matrix(M)
    return M


def range_find(M, spec, tau: float, rng=None, power_iters: int = 0, delta_mode="exact") -> RangeResult:
    """Sketch ``M`` with ``B``, orthogonalize, and measure ``||Q Q^H M - M||``.

    ``spec`` is a MultiplierSpec (random parts drawn from ``rng``) or an
    already built multiplier. With ``power_iters = q`` the sketch is taken of
    ``(M M^H)^q M``, re-orthogonalizing between products. A rank-deficient
    sketch is not an error by itself: status follows ``delta <= tau`` and the
    deficiency is noted in ``diagnostic``.
    """
    M = _check(M)
    stream = as_stream(rng)
    mult = build(spec, stream.child(0))
    if mult.n != M.shape[1]:
        raise DimensionMismatch(f"multiplier is for n={mult.n}, M has {M.shape[1]} columns")
    if tau < 0 or power_iters < 0:
        raise ValueError("tau and power_iters must be nonnegative")
    Y = _power(M, mult.apply_right(M), power_iters)
    return _finish(M, Y, tau, stream.child(1), _delta_mode(delta_mode), [mult.spec], power_iters)


@dataclass(frozen=True, eq=False)
class RecursiveSchedule:
    """Block widths l_1..l_h over the leading columns of ``base``."""

    block_widths: tuple
    base: object

    def __post_init__(self):
        widths = tuple(int(w) for w in self.block_widths)
        if not widths or min(widths) < 1:
            raise ValueError("block widths must be positive")
        object.__setattr__(self, "block_widths", widths)
        if sum(widths) > self.n:
            raise ValueError("block widths exceed n")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def prefix(self) -> np.ndarray:
        return np.cumsum(self.block_widths)


def _orth_against(Q, Y):
    """Block Gram-Schmidt step with one reorthogonalization pass."""
    for _ in range(2):
        if Q.shape[1]:
            Y = Y - Q @ (Q.conj().T @ Y)
    Qi = dense.orthogonalize(Y)
    if Q.shape[1]:
        Qi = dense.orthogonalize(Qi - Q @ (Q.conj().T @ Qi))
    return Qi


def range_find_recursive(M, schedule: RecursiveSchedule, tau: float, rng=None, reuse: bool = True,
                         delta_mode="exact") -> RangeResult:
    """Grow the multiplier block by block until the residual drops to ``tau``.

    With ``reuse`` each stage only orthogonalizes the new block against the
    accumulated basis and deflates the stored residual; otherwise every stage
    recomputes the range finder on ``(B_1 | ... | B_i)`` from scratch.
    """
    M = _check(M)
    stream = as_stream(rng)
    base = schedule.base
    if isinstance(base, fam.Family):
        base = MultiplierSpec(base, base.n)
    total = int(schedule.prefix[-1])
    mult = build(MultiplierSpec(base.family, total, "leftmost"), stream.child(0))
    mode = _delta_mode(delta_mode)
    Y_all = mult.apply_right(M)
    dtype = np.result_type(M, Y_all)
    Q = np.zeros((M.shape[0], 0), dtype=dtype)
    E = M.astype(dtype, copy=True)
    deltas: list[float] = []
    start = 0
    result = None
    for stage, stop in enumerate(schedule.prefix):
        if reuse:
            Qi = _orth_against(Q, Y_all[:, start:stop])
            E = E - Qi @ (Qi.conj().T @ E)
            Q = np.concatenate([Q, Qi], axis=1)
            QtM = Q.conj().T @ M
            if mode is None:
                delta = dense.spectral_norm(E)
            else:
                delta = _residual_norm(M, Q, QtM, mode, stream.child(1, stage))
        else:
            Q = dense.orthogonalize(Y_all[:, :stop])
            QtM = Q.conj().T @ M
            delta = _residual_norm(M, Q, QtM, mode, stream.child(1, stage))
        deltas.append(float(delta))
        start = stop
        status = Status.SUCCESS if delta <= tau else Status.FAILURE
        result = RangeResult(Q, QtM, float(delta), status, int(stop), [mult.spec], 0, float(tau),
                             None, list(deltas))
        if status is Status.SUCCESS:
            return result
    if total < schedule.n:
        raise ScheduleExhausted(f"no stage reached tau={tau:.3g}; last delta {deltas[-1]:.3g}", result)
    return result


def expand_compress(M, sparse_spec, l: int, rng=None, *, tau: float | None = None,
                    fraction: float = 1.0, delta_mode="exact") -> RangeResult:
    """Sketch with a wide sparse multiplier, then compress by a Gaussian.

    ``M B`` (m x l_plus) is formed through the fast path and multiplied by an
    l_plus x l Gaussian before orthogonalization.
    """
    M = _check(M)
    stream = as_stream(rng)
    mult = build(sparse_spec, stream.child(0))
    l_plus = mult.l
    if not 1 <= l <= fraction * l_plus:
        raise ValueError(f"need 1 <= l <= {fraction} * l_plus = {fraction * l_plus}")
    MB = mult.apply_right(M)
    comp = build(MultiplierSpec(fam.Gaussian(l_plus), l), stream.child(2))
    Y = comp.apply_right(MB)
    tau = default_tau(M) if tau is None else tau
    return _finish(M, Y, tau, stream.child(1), _delta_mode(delta_mode), [mult.spec, comp.spec], 0)


def amend_combine(M, failed_specs, tau: float, rng=None, *, coefficients="sum",
                  power_iters: int = 0, delta_mode="exact") -> RangeResult:
    """Retry with a linear combination of multipliers that failed one by one.

    ``coefficients`` is ``"sum"`` (all ones), ``"signs"`` (random ±1) or an
    explicit sequence.
    """
    M = _check(M)
    if len(failed_specs) < 2:
        raise ValueError("need at least two multipliers to combine")
    stream = as_stream(rng)
    mults = [build(s, stream.child(0, i)) for i, s in enumerate(failed_specs)]
    if len({m.l for m in mults}) != 1:
        raise ValueError("multipliers must share l")
    if isinstance(coefficients, str):
        if coefficients == "sum":
            coeffs = np.ones(len(mults))
        elif coefficients == "signs":
            coeffs = stream.child(3).generator().choice([-1.0, 1.0], size=len(mults))
        else:
            raise ValueError(f"unknown combination {coefficients!r}")
    else:
        coeffs = np.asarray(coefficients, dtype=float)
    Y = sum(c * m.apply_right(M) for c, m in zip(coeffs, mults))
    Y = _power(M, Y, power_iters)
    return _finish(M, Y, tau, stream.child(1), _delta_mode(delta_mode), [m.spec for m in mults],
                   power_iters, [float(c) for c in coeffs])


# Error-bound verifiers ------------------------------------------------------------


@dataclass(frozen=True)
class ErrorBoundReport:
    delta: float
    sigma_r1: float
    rhs_eqdlt: float
    guard: float
    fp_floor: float
    holds: bool
    observed_C: float
    eb_frobenius: float
    eb_bound: float
    eb_holds: bool


GUARD_C = 10.0


def error_bound_report(M, spec, result: RangeResult, r: int) -> ErrorBoundReport:
    """First-order error estimate for a sketch of rank-r-dominated ``M``.

    Checks ``|delta - s| <= sqrt(8(n-r)) s ||B||_F ||(M_r B)^+|| + guard``
    with ``s = sigma_{r+1}(M)`` and ``guard = 10 s^2 ||(M_r B)^+||^2 ||B||_F^2``,
    plus a roundoff floor of ``10 max(m, n) eps ||M||``. Also checks
    ``||(M - M_r) B||_F <= ||B||_F s sqrt(n - r)``. ``spec`` may be None to use
    the multiplier recorded in ``result``, or a dense n x l matrix.
    """
    M = _check(M)
    m, n = M.shape
    if spec is None:
        spec = result.multiplier_provenance[0]
    B = np.asarray(spec) if isinstance(spec, np.ndarray) else build(spec).materialize()
    f = dense.svd(M, rank_tol=0.0)
    sig = np.zeros(min(m, n) + 1)
    sig[: f.rank] = f.sigma
    s = float(sig[r])
    Mr = (f.S[:, :r] * f.sigma[:r]) @ f.T[:, :r].conj().T
    MrB = Mr @ B
    sv = dense.singular_values(MrB)
    if dense.numerical_rank(MrB, dense.default_rank_tol(MrB, sv[0])) < r:
        raise RankDeficientSketch(f"rank(M_r B) < {r}")
    pinv = 1.0 / sv[r - 1]
    BF = dense.frobenius_norm(B)
    rhs = sqrt(8 * (n - r)) * s * BF * pinv
    guard = GUARD_C * s * s * pinv * pinv * BF * BF
    floor = 10 * max(m, n) * dense.EPS * float(sig[0])
    gap = abs(result.delta - s)
    observed_C = max(0.0, gap - rhs) / (s * s * pinv * pinv * BF * BF) if s > 0 else 0.0
    EB = dense.frobenius_norm((M - Mr) @ B)
    eb_bound = BF * s * sqrt(n - r)
    return ErrorBoundReport(
        float(result.delta), s, float(rhs), float(guard), float(floor),
        bool(gap <= rhs + guard + floor), float(observed_C),
        float(EB), float(eb_bound), bool(EB <= eb_bound * (1 + 1e-12) + floor),
    )


@dataclass(frozen=True)
class PrimalDualConfig:
    m: int = 256
    n: int = 256
    r: int = 8
    l: int = 12
    trials: int = 200
    seed: int = 0
    dual_family: object = None
    slack: float = 1.0


@dataclass(frozen=True)
class PrimalDualSummary:
    p: int
    mean_f: float
    bound_f: float | None
    mean_fd: float
    bound_fd_printed: float | None
    bound_fd: float | None
    kappa_B: float

    @property
    def primal_ok(self) -> bool | None:
        return None if self.bound_f is None else self.mean_f < self.bound_f

    @property
    def dual_ok(self) -> bool | None:
        return None if self.bound_fd is None else self.mean_fd < self.bound_fd

    @property
    def dual_printed_ok(self) -> bool | None:
        return None if self.bound_fd_printed is None else self.mean_fd < self.bound_fd_printed


def primal_dual_statistics(config: PrimalDualConfig) -> PrimalDualSummary:
    """Monte Carlo means of the primal and dual error factors f and f_d.

    Primal: fixed input with ``sigma_r = 1/r`` and Gaussian B,
    ``f = sqrt(8(n-r)) ||B||_F ||(T_r^T B)^+|| / sigma_r``.
    Dual: factor-Gaussian ``M = U V`` with a fixed multiplier B,
    ``f_d = sqrt(8(n-r) l) ||(T_U^T V S_B)^+|| ||U^+|| kappa(B)``.

    Two dual bounds are reported. ``bound_fd_printed`` is
    ``e^2 sqrt(8(n-r) l) kappa(B) r / ((m-r) p)``; ``bound_fd`` multiplies the
    expectation bounds ``e sqrt(a) / |a-b|`` of the two independent factors,
    ``e^2 sqrt(8(n-r) l) kappa(B) sqrt(m l) / ((m-r) p)``. With ``p = 0`` the
    means are reported without bounds.
    """
    c = config
    m, n, r, l = c.m, c.n, c.r, c.l
    p = l - r
    base = RngStream(c.seed)
    sigma_r = 1.0 / r
    fs, fds = [], []
    family = c.dual_family if c.dual_family is not None else fam.AbridgedHadamard(n, 3)
    B = build(MultiplierSpec(family, l), base.child(99)).materialize()
    SB = dense.svd(B).S
    kB = dense.condition_number(B)
    for t in range(c.trials):
        tr = base.child(t)
        Tr = dense.orthogonalize(gaussian_matrix(tr.child(0), n, r))
        G = gaussian_matrix(tr.child(1), n, l)
        fs.append(sqrt(8 * (n - r)) * dense.frobenius_norm(G)
                  / dense.singular_values(Tr.T @ G)[-1] / sigma_r)
        U = gaussian_matrix(tr.child(2), m, r)
        V = gaussian_matrix(tr.child(3), r, n)
        TU = dense.svd(U).T
        nu_rl = 1.0 / dense.singular_values(TU.T @ V @ SB)[-1]
        nu_mr = 1.0 / dense.singular_values(U)[-1]
        fds.append(sqrt(8 * (n - r) * l) * nu_rl * nu_mr * kB)
    if p > 0:
        bound_f = e * sqrt(8 * (n - r) * r * l) * (1 + sqrt(n) + sqrt(l)) / (p * sigma_r) * c.slack
        printed = e * e * sqrt(8 * (n - r) * l) * kB * r / ((m - r) * p) * c.slack
        corrected = e * e * sqrt(8 * (n - r) * l) * kB * sqrt(m * l) / ((m - r) * p) * c.slack
    else:
        bound_f = printed = corrected = None
    return PrimalDualSummary(p, float(np.mean(fs)), bound_f, float(np.mean(fds)), printed, corrected, kB)


@dataclass(frozen=True)
class PowerReport:
    i: int
    sigma: np.ndarray
    sigma_power: np.ndarray
    max_rel_error: float
    checked: int
    holds: bool


def power_scheme_check(M, i: int, *, floor: float = 1e-2, rtol: float = 1e-6) -> PowerReport:
    """Compare ``sigma_j((M M^H)^i M)`` with ``sigma_j(M)^(2i+1)`` where ``sigma_j(M) >= floor``."""
    M = _check(M)
    if i < 0:
        raise ValueError("i must be nonnegative")
    s = dense.singular_values(M)
    sp = dense.singular_values(power_matrix(M, i))
    keep = s >= floor
    target = s[keep] ** (2 * i + 1)
    rel = np.abs(sp[keep] - target) / target if keep.any() else np.zeros(0)
    worst = float(rel.max()) if rel.size else 0.0
    return PowerReport(i, s, sp, worst, int(keep.sum()), worst <= rtol)
