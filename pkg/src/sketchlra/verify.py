"""Verifier suites: fixed-seed runs of the package's check operations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import classes, dense, lsr
from . import multipliers as mp
from .cg import accelerated_cg, gen_concentrated
from .errors import RankDeficientSketch
from .hss import partition_rank_check
from .multipliers import MultiplierSpec, build, checks
from .multipliers import families as fam
from .rand import (RngStream, full_rank_check, gaussian_matrix, norm_statistics,
                   rotational_invariance_check, square_pinv_tail_check)
from .rangefinder import (PrimalDualConfig, error_bound_report, power_scheme_check,
                          primal_dual_statistics, range_find)
from .testmatrices import gen_fd_inverse, gen_laplacian, gen_svd_spectrum

SUITES = ("gaussian", "bounds", "multipliers", "lsr", "hss")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerifierReport:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))

    def lines(self) -> list[str]:
        return [f"[{'PASS' if c.passed else 'FAIL'}] {self.suite}: {c.name}  {c.detail}".rstrip()
                for c in self.checks]


def _gaussian_stats(rep, seed, scale):
    base = RngStream(seed)
    s = norm_statistics(base.child(0), 100, 50, 200)
    rep.add("mean ||G|| below 1 + sqrt(m) + sqrt(n)", s.nu_ok, f"{s.mean_nu:.4g} < {s.bound_nu:.4g}")
    rep.add("mean ||G^+|| below slack * e sqrt(m) / |m - n|", s.nu_plus_ok,
            f"{s.mean_nu_plus:.4g} < {s.bound_nu_plus:.4g}")
    sq = norm_statistics(base.child(1), 20, 20, 50)
    rep.add("square ||G^+|| reported without bound", sq.nu_plus_ok is None, f"mean {sq.mean_nu_plus:.4g}")
    g = gaussian_matrix(base.child(2), 100_000, 1).ravel()
    rep.add("entry moments", abs(g.mean()) < 0.02 and abs(g.var() - 1) < 0.02,
            f"mean {g.mean():.4f}, var {g.var():.4f}")
    c = math.pi / 4
    rot = np.array([[math.cos(c), -math.sin(c)], [math.sin(c), math.cos(c)]])
    for name, k, m, n, trials, S in (("identity", 4, 4, 50, 50, np.eye(4)),
                                      ("2x2 rotation", 2, 2, 50, 100, rot),
                                      ("random 8x16", 8, 16, 125, 10, None)):
        ks = rotational_invariance_check(base.child(3, k, m), k, m, n, trials, S=S)
        rep.add(f"rotational invariance, {name}", ks.passed,
                f"KS {ks.ks_statistic:.4f} < {ks.critical_value:.4f}")
    fr = full_rank_check(base.child(4), 20, 15, 5, 200)
    rep.add("Gaussian products keep full rank", fr.failures == 0, f"{fr.failures}/200 deficient")
    fr2 = full_rank_check(base.child(5), 8, 8, 4, 200, values=(-1.0, 1.0))
    rep.add("+-1 products (reported)", True, f"deficiency frequency {fr2.failure_frequency:.3f}")
    trials = max(50, int(500 * scale))
    hits = sum(dense.spectral_norm(gaussian_matrix(base.child(6, t), 100, 100), method="svd") < 27
               for t in range(trials))
    rep.add("||G_100x100|| < 1 + sqrt(100) + sqrt(100) + 6", hits / trials >= 0.99,
            f"frequency {hits / trials:.3f}")
    for n in (4, 16):
        tr = square_pinv_tail_check(base.child(7, n), n, 10.0 * math.sqrt(n), 400)
        rep.add(f"square ||G^+|| tail, n={n}", tr.holds, f"{tr.frequency:.4f} <= {tr.bound:.4f}")


def _bounds(rep, seed, scale):
    base = RngStream(seed)
    trials = max(10, int(100 * scale))
    corpus = (
        ("svd 256, r=8", lambda t: gen_svd_spectrum(256, 8, base.child(0, t)), 8),
        ("laplacian 200, r=3", lambda t: gen_laplacian(200), 3),
        ("fd 88x160, r=5", lambda t: gen_fd_inverse((88, 160)), 5),
    )
    cache = {}
    for name, make, r in corpus:
        held = eb = 0
        worst_c = 0.0
        for t in range(trials):
            M = make(t) if name.startswith("svd") or name not in cache else cache[name]
            cache.setdefault(name, M)
            n = M.shape[1]
            mult = build(MultiplierSpec(fam.Gaussian(n), r + 4), base.child(1, r, t))
            res = range_find(M, mult, 0.0, base.child(2, r, t))
            try:
                rpt = error_bound_report(M, mult.spec, res, r)
            except RankDeficientSketch:
                continue
            held += rpt.holds
            eb += rpt.eb_holds
            worst_c = max(worst_c, rpt.observed_C)
        rep.add(f"first-order error bound, {name}", held == trials, f"{held}/{trials}, max C {worst_c:.3g}")
        rep.add(f"||(M - M_r) B||_F bound, {name}", eb == trials, f"{eb}/{trials}")
    pd = primal_dual_statistics(PrimalDualConfig(trials=max(50, int(200 * scale)), seed=seed))
    rep.add("primal mean f below its bound", pd.primal_ok, f"{pd.mean_f:.4g} < {pd.bound_f:.4g}")
    rep.add("dual mean f_d below the product-of-expectations bound", pd.dual_ok,
            f"{pd.mean_fd:.4g} < {pd.bound_fd:.4g}")
    rep.add("dual mean f_d against the r/((m-r)p) form (reported)", True,
            f"{pd.mean_fd:.4g} vs {pd.bound_fd_printed:.4g}")
    M = gen_svd_spectrum(256, 8, base.child(3))
    for i in (1, 2, 3):
        pr = power_scheme_check(M, i)
        rep.add(f"power scheme sigma^(2i+1), i={i}", pr.holds, f"max rel {pr.max_rel_error:.2e}")


def _family_cases(n):
    k = int(math.log2(n))
    v = RngStream(n).generator().standard_normal(n)
    return {
        "AH d=3": fam.AbridgedHadamard(n, 3),
        "AH full": fam.AbridgedHadamard(n, k),
        "ASPH d=3": fam.ScaledPermuted(fam.AbridgedHadamard(n, 3)),
        "AF d=3": fam.AbridgedFourier(n, 3),
        "AF full": fam.AbridgedFourier(n, k),
        "ASPF d=3": fam.ScaledPermuted(fam.AbridgedFourier(n, 3), scaling="unit"),
        "recursive AH": fam.AbridgedHadamard(n, 3, recursive=True),
        "sparse circulant q=10": fam.SparseCirculant(n, 10),
        "sparse f-circulant": fam.SparseCirculant(n, 10, f=np.exp(0.3j), dist="unit"),
        "circulant": fam.Circulant(n, v=v),
        "toeplitz": fam.Toeplitz(n),
        "abridged circulant": fam.AbridgedCirculant(n, 3),
        "abridged f-circulant": fam.AbridgedCirculant(n, 3, f=np.exp(0.7j)),
        "inverse bidiagonal": fam.InverseBidiagonal(n),
        "inverse bidiagonal upper": fam.InverseBidiagonal(n, lower=False, k=3),
        "gaussian": fam.Gaussian(n),
        "ternary": fam.Ternary(n),
        "sum": classes.family("class12", n),
        "product": classes.family("set6", n),
    }


def _multipliers(rep, seed, scale):
    base = RngStream(seed)
    for n in (64, 256):
        X = gaussian_matrix(base.child(0, n), 16, n)
        for name, family in _family_cases(n).items():
            mult = build(MultiplierSpec(family, n), base.child(1, n))
            B = mult.materialize()
            fast = mult.apply_right(X)
            rel = np.abs(fast - X @ B).max() / max(np.abs(X @ B).max(), 1e-300)
            ok = rel <= 1e-12
            budget = checks.flop_budget(mult.spec.family)
            flops = checks.flops_audit(mult, check=False)
            ok_f = budget is None or flops <= budget
            rep.add(f"fast apply and flops, {name}, n={n}", ok and ok_f,
                    f"rel {rel:.1e}, flops {flops}" + (f" <= {budget}" if budget else ""))
        for d in (1, 3):
            B = mp.materialize(fam.AbridgedHadamard(n, d))
            nnz = set(np.count_nonzero(B, axis=1)) | set(np.count_nonzero(B, axis=0))
            unit = np.abs(B.T @ B / 2**d - np.eye(n)).max()
            rep.add(f"AH d={d} sparsity and orthogonality, n={n}", nnz == {2**d} and unit < 1e-10,
                    f"nonzeros {sorted(nnz)}")
            F = mp.materialize(fam.AbridgedFourier(n, d))
            unit = np.abs(F.conj().T @ F / 2**d - np.eye(n)).max()
            rep.add(f"AF d={d} unitarity, n={n}", unit < 1e-10, f"{unit:.1e}")
        H = mp.materialize(fam.AbridgedHadamard(n, int(math.log2(n))))
        rep.add(f"full-depth AH equals Walsh-Hadamard, n={n}",
                np.array_equal(H, scipy.linalg.hadamard(n)))
        W = mp.materialize(fam.AbridgedFourier(n, int(math.log2(n))))
        err = np.abs(W - checks.dft_matrix(n)).max()
        rep.add(f"full-depth AF equals DFT, n={n}", err < 1e-10, f"{err:.1e}")
    for f, n in ((1.0, 16), (np.exp(1j * np.pi / 4), 8)):
        v = RngStream(seed + n).generator().standard_normal(n)
        dg = checks.circulant_diagonalization_check(f, v)
        rep.add(f"f-circulant diagonalization, n={n}, f={complex(f):.3g}", dg.holds, f"{dg.rel_error:.1e}")
    trials = max(10, int(100 * scale))
    for n in (256, 1024):
        cb = checks.condition_bound_check(fam.InverseBidiagonal(n), trials, base.child(2, n))
        rep.add(f"inverse bidiagonal kappa <= sqrt(2n), n={n}", cb.holds,
                f"max {cb.kappas.max():.3g} vs {cb.bound:.3g}, {cb.violations}/{trials} above")
        rep.add(f"inverse bidiagonal kappa <= sqrt(2n(n+1)), n={n}", cb.frobenius_holds,
                f"max {cb.kappas.max():.3g} <= {cb.frobenius_bound:.3g}")
    sel = MultiplierSpec(fam.ScaledPermuted(fam.AbridgedHadamard(64, 3)), 12, "random")
    Bs = build(sel, base.child(3)).materialize()
    full = mp.materialize(fam.AbridgedHadamard(64, 3))
    rep.add("submatrix conditioning", dense.condition_number(Bs) <= dense.condition_number(full) + 1e-9)


def _lsr(rep, seed, scale):
    base = RngStream(seed)
    trials = max(20, int(100 * scale))
    m, d = 2000, 10
    k = 4 * (d + 10)
    for kind in ("gaussian", "hadamard"):
        ok = 0
        for t in range(trials):
            st = base.child(kind == "hadamard", t)
            A = gaussian_matrix(st.child(0), m, d)
            b = gaussian_matrix(st.child(1), m, 1).ravel()
            sol = lsr.solve_sketched(lsr.LsrProblem(A, b), k, kind, st.child(2))
            ok += sol.ratio <= 1.5
        need = math.ceil(0.95 * trials)
        rep.add(f"sketched residual within 1.5x, {kind}", ok >= need, f"{ok}/{trials}")
    dc = lsr.distortion_check(gaussian_matrix(base.child(2), m, d + 1), ("gaussian", 200), 500,
                              base.child(3), xi=0.5)
    rep.add("Gaussian distortion at k=200", dc.holds, f"max |ratio - 1| {dc.distortion:.3f}")
    dc = lsr.distortion_check(gaussian_matrix(base.child(4), 256, d + 1), ("hadamard", 256), 100,
                              base.child(5), xi=1e-12)
    rep.add("orthogonal sketch with k = m preserves norms", dc.holds, f"{dc.distortion:.1e}")


def _hss(rep, seed, scale):
    n, r, xi = 512, 6, 1e-10
    M = gen_concentrated(n, r, xi, seed)
    pr = partition_rank_check(M, r, 10 * xi * dense.spectral_norm(M))
    rep.add("off-diagonal partition blocks have rank <= r", pr.holds, f"max {pr.max_rank}")
    rep.add("neutered column rank <= sum of its two parts", pr.split_bound_holds)
    b = gaussian_matrix(RngStream(seed).child(1), n, 1).ravel()
    hist = {}
    for family in ("gaussian", "hadamard"):
        res = accelerated_cg(M, b, r, xi, 1e-8, RngStream(seed).child(2), mult_family=family)
        hist[family] = res
        true_rel = np.linalg.norm(M @ res.x - b) / np.linalg.norm(b)
        rep.add(f"accelerated CG, {family} generators", res.iters <= 8 and true_rel <= 1e-8
                and res.per_iter_fraction < 0.10,
                f"{res.iters} iterations, residual {true_rel:.1e}, {100 * res.per_iter_fraction:.1f}% of dense")
    a, b2 = hist["gaussian"], hist["hadamard"]
    same = a.iters == b2.iters and np.allclose(a.residual_history, b2.residual_history, rtol=0, atol=1e-6)
    rep.add("generator family does not change the iteration", same)


_RUNNERS = {"gaussian": _gaussian_stats, "bounds": _bounds, "multipliers": _multipliers,
            "lsr": _lsr, "hss": _hss}


def run_verifiers(suite: str, seed: int = 0, scale: float = 1.0) -> list[VerifierReport]:
    """Run one suite (or ``"all"``); ``scale`` shrinks the Monte Carlo trial counts."""
    names = SUITES if suite == "all" else (suite,)
    out = []
    for name in names:
        if name not in _RUNNERS:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
        rep = VerifierReport(name)
        _RUNNERS[name](rep, seed, scale)
        out.append(rep)
    return out
