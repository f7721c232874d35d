"""Seeded random streams and Monte Carlo checks on Gaussian matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import e, sqrt

import numpy as np
from scipy import stats

from . import dense

ALGORITHM_TAG = "philox4x64-10"
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A (seed, stream_id) pair naming one Philox counter stream.

    The Philox key is ``seed | stream_id << 64``, so equal pairs give equal
    sequences on every platform and distinct ids give independent streams.
    ``generator()`` returns a fresh generator positioned at the stream start.
    """

    seed: int
    stream_id: int = 0
    algorithm_tag: str = field(default=ALGORITHM_TAG, init=False)

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.seed | (self.stream_id << 64)))

    def child(self, *path: int) -> "RngStream":
        """Stream derived from this one and an integer path (trial, class, ...)."""
        mixed = np.random.SeedSequence([self.stream_id, *path], spawn_key=(len(path),))
        return RngStream(self.seed, int(mixed.generate_state(1, np.uint64)[0]))

    def to_record(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id, "algorithm": self.algorithm_tag}


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(int(rng))


def gaussian_matrix(rng, m: int, n: int) -> np.ndarray:
    """An m x n matrix of i.i.d. standard normals (ziggurat sampler)."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    return as_stream(rng).generator().standard_normal((m, n))


def orthogonal_matrix(rng, m: int, n: int | None = None) -> np.ndarray:
    """Q factor of a Gaussian matrix with the sign ambiguity of QR removed."""
    n = m if n is None else n
    rows, cols = max(m, n), min(m, n)
    Q, R = np.linalg.qr(gaussian_matrix(rng, rows, cols))
    Q = Q * np.sign(np.diagonal(R))
    return Q if m >= n else Q.T


@dataclass(frozen=True)
class FullRankReport:
    trials: int
    failures: int
    failure_frequency: float


def full_rank_check(rng, m: int, n: int, r: int, trials: int, *, A=None, values=None) -> FullRankReport:
    """Count trials where ``F A`` or ``A H`` drops below rank ``r``.

    ``F`` is r x m and ``H`` is n x r. Entries are Gaussian unless ``values``
    gives a finite set to sample uniformly from. ``A`` defaults to the leading
    m x n block of the identity.
    """
    if not r <= min(m, n):
        raise ValueError("need r <= min(m, n)")
    A = np.eye(m, n) if A is None else dense.as_matrix(A)
    g = as_stream(rng).generator()

    def draw(shape):
        if values is None:
            return g.standard_normal(shape)
        return g.choice(np.asarray(values, dtype=float), size=shape)

    failures = 0
    for _ in range(trials):
        F, H = draw((r, m)), draw((n, r))
        FA, AH = F @ A, A @ H
        tol = lambda X: dense.default_rank_tol(X, dense.spectral_norm(X, method="svd"))
        low = dense.numerical_rank(FA, tol(FA)) < r or dense.numerical_rank(AH, tol(AH)) < r
        failures += bool(low)
    return FullRankReport(trials, failures, failures / trials)


@dataclass(frozen=True)
class KsReport:
    ks_statistic: float
    critical_value: float
    p_value: float
    passed: bool


def rotational_invariance_check(rng, k: int, m: int, n: int, trials: int, *, S=None) -> KsReport:
    """Two-sample KS test of the entries of ``S @ G`` against fresh normals.

    ``S`` is a fixed k x m matrix with orthonormal rows (random if omitted).
    The test passes when the statistic is below the 0.999 quantile of its null
    distribution.
    """
    if k > min(m, n):
        raise ValueError("need k <= min(m, n)")
    base = as_stream(rng)
    if S is None:
        S = orthogonal_matrix(base.child(0), k, m)
    S = dense.as_matrix(S)
    g = base.child(1).generator()
    rotated = np.concatenate([(S @ g.standard_normal((m, n))).ravel() for _ in range(trials)])
    fresh = g.standard_normal(rotated.size)
    res = stats.ks_2samp(rotated, fresh)
    # asymptotic two-sample critical value at level 0.001, equal sample sizes
    critical = sqrt(-np.log(0.001 / 2) / 2) * sqrt(2.0 / rotated.size)
    return KsReport(float(res.statistic), float(critical), float(res.pvalue), res.statistic < critical)


@dataclass(frozen=True)
class NormSample:
    m: int
    n: int
    nu: float
    nu_plus: float
    nu_F: float


def norm_sample(rng, m: int, n: int) -> NormSample:
    s = dense.singular_values(gaussian_matrix(rng, m, n))
    return NormSample(m, n, float(s[0]), float(1.0 / s[-1]), float(np.sqrt(np.sum(s**2))))


@dataclass(frozen=True)
class NormSummary:
    m: int
    n: int
    trials: int
    mean_nu: float
    mean_nu_plus: float
    bound_nu: float
    bound_nu_plus: float | None
    nu_ok: bool
    nu_plus_ok: bool | None


NU_SLACK = 1.0
NU_PLUS_SLACK = 1.5


def norm_statistics(rng, m: int, n: int, trials: int) -> NormSummary:
    """Sample means of ``||G||`` and ``||G^+||`` against their expectation bounds.

    For square sizes the mean of ``||G^+||`` has no finite bound; it is
    reported and ``nu_plus_ok`` is ``None``.
    """
    if trials < 30:
        raise ValueError("norm_statistics needs at least 30 trials")
    base = as_stream(rng)
    samples = [norm_sample(base.child(t), m, n) for t in range(trials)]
    mean_nu = float(np.mean([s.nu for s in samples]))
    mean_nu_plus = float(np.mean([s.nu_plus for s in samples]))
    bound_nu = (1 + sqrt(m) + sqrt(n)) * NU_SLACK
    if m == n:
        bound_plus, plus_ok = None, None
    else:
        bound_plus = e * sqrt(max(m, n)) / abs(m - n) * NU_PLUS_SLACK
        plus_ok = mean_nu_plus < bound_plus
    return NormSummary(m, n, trials, mean_nu, mean_nu_plus, bound_nu, bound_plus,
                       mean_nu < bound_nu, plus_ok)


@dataclass(frozen=True)
class TailReport:
    n: int
    x: float
    frequency: float
    bound: float
    holds: bool


def square_pinv_tail_check(rng, n: int, x: float, trials: int) -> TailReport:
    """Empirical ``P(||G^+|| >= x)`` for square G against ``2.35 sqrt(n) / x``."""
    base = as_stream(rng)
    hits = sum(norm_sample(base.child(t), n, n).nu_plus >= x for t in range(trials))
    freq = hits / trials
    bound = 2.35 * sqrt(n) / x
    return TailReport(n, x, freq, bound, freq <= bound)
