import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sketchlra.errors import DimensionMismatch, DimensionNotSupported, FlopBudgetExceeded
from sketchlra.multipliers import (MultiplierSpec, build, checks, dumps, families as fam, loads,
                                   materialize, resolve)
from sketchlra.multipliers.checks import flops_audit, flop_budget
from sketchlra.rand import RngStream


def resolved(family, seed=0):
    return resolve(MultiplierSpec(family, family.n), RngStream(seed)).family


@pytest.mark.parametrize("n,d", [(8, 0), (8, 1), (16, 2), (64, 3), (64, 6), (256, 3)])
def test_abridged_hadamard_matches_kronecker(n, d):
    assert np.array_equal(materialize(fam.AbridgedHadamard(n, d)), oracles.abridged_hadamard(n, d))


@pytest.mark.parametrize("n,d", [(4, 1), (16, 2), (64, 3), (64, 6), (256, 4)])
def test_abridged_fourier_matches_recursion(n, d):
    B = materialize(fam.AbridgedFourier(n, d))
    assert np.abs(B - oracles.abridged_fourier(n, d)).max() < 1e-12


@pytest.mark.parametrize("n", [8, 64, 256])
def test_full_depth_transforms(n):
    k = int(np.log2(n))
    assert np.array_equal(materialize(fam.AbridgedHadamard(n, k)), scipy.linalg.hadamard(n))
    assert np.abs(materialize(fam.AbridgedFourier(n, k)) - oracles.dft(n)).max() < 1e-10


def test_hadamard_primitive():
    I = np.eye(2)
    assert np.array_equal(materialize(fam.HadamardPrimitive(2)), np.block([[I, I], [I, -I]]))


def test_recursive_factored_forms():
    # H_2q = diag(H_q, H_q) H^(2q) and Omega_2q = P diag(Omega_q, Omega_q D) H^(2q)
    q = 16
    H = oracles.abridged_hadamard(2 * q, 5)
    Hq = scipy.linalg.hadamard(q)
    assert np.array_equal(H, scipy.linalg.block_diag(Hq, Hq) @ oracles.hadamard_primitive(2 * q))
    F = materialize(fam.AbridgedFourier(2 * q, 5))
    Fq = materialize(fam.AbridgedFourier(q, 4))
    D = np.diag(np.exp(2j * np.pi * np.arange(q) / (2 * q)))
    rhs = oracles._interleave(2 * q) @ scipy.linalg.block_diag(Fq, Fq @ D) @ oracles.hadamard_primitive(2 * q)
    assert np.abs(F - rhs).max() < 1e-12


@pytest.mark.parametrize("d", [1, 2, 3])
def test_unitarity_and_sparsity(d):
    n = 64
    for family in (fam.AbridgedHadamard(n, d), fam.AbridgedFourier(n, d),
                   resolved(fam.ScaledPermuted(fam.AbridgedHadamard(n, d))),
                   resolved(fam.ScaledPermuted(fam.AbridgedFourier(n, d), scaling="unit"))):
        B = materialize(family)
        assert np.abs(B.conj().T @ B / 2**d - np.eye(n)).max() < 1e-10
        nnz = np.count_nonzero(np.abs(B) > 1e-14, axis=0)
        assert set(nnz) == {2**d}
        assert set(np.count_nonzero(np.abs(B) > 1e-14, axis=1)) == {2**d}
    C = materialize(resolved(fam.AbridgedCirculant(n, d)))
    assert np.abs(C.conj().T @ C - np.eye(n)).max() < 1e-10


def test_normalized_hadamard_is_orthogonal():
    B = materialize(fam.AbridgedHadamard(32, 3, normalized=True))
    assert np.allclose(B.T @ B, np.eye(32))


def test_scaled_permuted_layout():
    base = fam.AbridgedHadamard(16, 2)
    left = resolved(fam.ScaledPermuted(base, side="left"), 1)
    right = resolved(fam.ScaledPermuted(base, side="right", scaling="scales"), 1)
    H = oracles.abridged_hadamard(16, 2)
    P = oracles.permutation(left.perm)
    assert np.allclose(materialize(left), P @ np.diag(left.diag) @ H)
    P = oracles.permutation(right.perm)
    assert np.allclose(materialize(right), H @ P @ np.diag(right.diag))
    assert set(np.unique(right.diag)) <= set(fam.SCALE_SET)


@pytest.mark.parametrize("f", [1.0, -1.0, np.exp(0.4j)])
def test_sparse_circulant_matches_shift_sum(f):
    n = 32
    family = resolved(fam.SparseCirculant(n, 5, f=f, dist="gaussian"), 2)
    v = np.zeros(n)
    v[family.positions] = family.values
    assert np.abs(materialize(family) - oracles.f_circulant(v, f)).max() < 1e-12


@pytest.mark.parametrize("f", [1.0, np.exp(0.9j)])
def test_dense_circulant_and_toeplitz(f):
    n = 24
    c = resolved(fam.Circulant(n, f=f), 3)
    assert np.abs(materialize(c) - oracles.f_circulant(c.v, f)).max() < 1e-11
    t = resolved(fam.Toeplitz(n), 3)
    assert np.abs(materialize(t) - scipy.linalg.toeplitz(t.c, t.r)).max() < 1e-11


@pytest.mark.parametrize("transform", ["fourier", "hadamard"])
@pytest.mark.parametrize("f", [1.0, np.exp(0.7j)])
def test_abridged_circulant_definition(transform, f):
    n, d = 32, 3
    family = resolved(fam.AbridgedCirculant(n, d, f=f, transform=transform), 4)
    A = oracles.abridged_fourier(n, d) if transform == "fourier" else oracles.abridged_hadamard(n, d)
    Df = np.diag(complex(f) ** np.arange(n))
    ref = np.linalg.inv(Df) @ A.conj().T @ np.diag(family.diag) @ A @ Df / 2**d
    assert np.abs(materialize(family) - ref).max() < 1e-12


def test_full_depth_abridged_circulant_is_circulant():
    n = 16
    family = resolved(fam.AbridgedCirculant(n, 4), 5)
    C = materialize(family)
    # a circulant is constant along wrapped diagonals
    for k in range(n):
        assert np.allclose(np.diag(np.roll(C, -k, axis=1)), C[0, k])


@pytest.mark.parametrize("lower,k", [(True, 1), (True, 3), (False, 1), (False, 2)])
def test_inverse_bidiagonal(lower, k):
    n = 20
    family = resolved(fam.InverseBidiagonal(n, main=2.0, k=k, lower=lower), 6)
    ref = oracles.inverse_bidiagonal(2.0, family.off, k, lower)
    assert np.abs(materialize(family) - ref).max() < 1e-12


def test_inverse_bidiagonal_alternating_signs():
    B = materialize(fam.InverseBidiagonal(6, off=np.ones(6)))
    i, j = np.indices((6, 6))
    assert np.array_equal(B, np.where(i >= j, (-1.0) ** (i - j), 0.0))


def test_composites():
    n = 16
    a = resolved(fam.ScaledPermuted(fam.AbridgedHadamard(n, 2)), 1)
    b = resolved(fam.InverseBidiagonal(n), 2)
    A, B = materialize(a), materialize(b)
    assert np.allclose(materialize(fam.Sum((a, b))), A + B)
    assert np.allclose(materialize(fam.Sum((a, b), coeffs=(2.0, -1.0))), 2 * A - B)
    assert np.allclose(materialize(fam.Product((a, b))), A @ B)
    blk = fam.BlockDiagonal((fam.AbridgedHadamard(8, 3), fam.AbridgedHadamard(4, 1)))
    assert np.array_equal(materialize(blk),
                          scipy.linalg.block_diag(scipy.linalg.hadamard(8), oracles.abridged_hadamard(4, 1)))
    with pytest.raises(ValueError):
        fam.Sum((a, fam.Gaussian(8)))


def test_shift_and_permutation():
    Z = materialize(fam.Shift(5, f=-1.0))
    assert np.array_equal(Z, oracles.f_shift(5, -1.0).real)
    p = np.array([2, 0, 1])
    assert np.array_equal(materialize(fam.Permutation(3, perm=p)), oracles.permutation(p))
    with pytest.raises(ValueError):
        materialize(fam.Permutation(3, perm=np.array([0, 0, 1])))


def test_non_power_of_two_needs_split():
    with pytest.raises(DimensionNotSupported):
        materialize(fam.AbridgedHadamard(24, 2))
    blk = fam.BlockDiagonal.split(24, lambda s: fam.AbridgedHadamard(s, min(2, s.bit_length() - 1)))
    assert [b.n for b in blk.blocks] == [16, 8]


def test_column_selection_and_errors():
    spec = MultiplierSpec(fam.AbridgedHadamard(16, 2), 5, "random")
    m = build(spec, RngStream(1))
    full = oracles.abridged_hadamard(16, 2)
    assert np.array_equal(m.materialize(), full[:, m.cols])
    assert np.array_equal(build(MultiplierSpec(fam.AbridgedHadamard(16, 2), 5)).materialize(), full[:, :5])
    with pytest.raises(ValueError):
        MultiplierSpec(fam.AbridgedHadamard(16, 2), 17)
    with pytest.raises(DimensionMismatch):
        m.apply_right(np.ones((3, 15)))


def test_random_parts_replay_from_records():
    for family in (fam.Gaussian(32), fam.Ternary(32), fam.InverseBidiagonal(32),
                   fam.ScaledPermuted(fam.AbridgedFourier(32, 3), scaling="unit"),
                   fam.AbridgedHadamard(32, 3, recursive=True), fam.SparseCirculant(32, 4),
                   fam.Sum((fam.Permutation(32), fam.Toeplitz(32)))):
        spec = resolve(MultiplierSpec(family, 7, "random"), RngStream(11))
        again = loads(dumps(spec))
        assert np.array_equal(build(spec).materialize(), build(again).materialize())


def test_same_stream_same_matrix():
    a = materialize(fam.Gaussian(16), RngStream(3))
    b = materialize(fam.Gaussian(16), RngStream(3))
    c = materialize(fam.Gaussian(16), RngStream(4))
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    assert set(np.unique(materialize(fam.Ternary(16), RngStream(3)))) <= {-1.0, 0.0, 1.0}


def test_flop_budgets():
    n = 1024
    m = build(MultiplierSpec(fam.AbridgedHadamard(n, 3), n))
    assert flops_audit(m) == 3 * n
    m = build(MultiplierSpec(fam.InverseBidiagonal(n), n), RngStream(0))
    assert flops_audit(m) == n - 1
    m = build(MultiplierSpec(fam.SparseCirculant(n, 10), n), RngStream(0))
    assert flops_audit(m) == 10 * n
    m = build(MultiplierSpec(fam.AbridgedFourier(n, 3), n))
    assert flops_audit(m) <= flop_budget(m.spec.family) == 1.5 * 3 * n


def test_flop_counter_matches_work(monkeypatch):
    m = build(MultiplierSpec(fam.AbridgedHadamard(64, 2), 64))
    sub = build(MultiplierSpec(fam.AbridgedHadamard(64, 2), 8))
    from sketchlra.multipliers import FlopCounter

    # counts are per row of the left operand
    c = FlopCounter()
    m.apply_right(np.ones((3, 64)), c)
    assert c.count == 2 * 64
    c2 = FlopCounter()
    sub.apply_right(np.ones((3, 64)), c2)
    assert c2.count <= c.count
    monkeypatch.setattr(checks, "flop_budget", lambda family: 1)
    with pytest.raises(FlopBudgetExceeded):
        flops_audit(m)


def test_circulant_diagonalization():
    g = np.random.default_rng(0)
    rep = checks.circulant_diagonalization_check(1.0, np.eye(8)[0])
    assert rep.holds and rep.rel_error < 1e-13
    assert checks.circulant_diagonalization_check(1.0, g.standard_normal(16)).rel_error < 1e-12
    assert checks.circulant_diagonalization_check(np.exp(1j * np.pi / 4), g.standard_normal(8)).holds


def test_condition_bound_report_fields():
    rep = checks.condition_bound_check(fam.InverseBidiagonal(64), 10, RngStream(0))
    assert rep.kappas.shape == (10,) and rep.bound == pytest.approx(np.sqrt(128))
    assert rep.frobenius_holds
    with pytest.raises(ValueError):
        checks.condition_bound_check(fam.InverseBidiagonal(8, main=2.0), 2)


def test_submatrix_conditioning():
    for seed in range(10):
        full = materialize(resolved(fam.ScaledPermuted(fam.AbridgedHadamard(64, 3)), seed))
        cols = np.random.default_rng(seed).choice(64, 12, replace=False)
        assert np.linalg.cond(full[:, cols]) <= np.linalg.cond(full) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.integers(0, 7), st.integers(0, 2**31))
def test_fast_apply_is_linear_and_matches_dense(k, d, seed):
    n = 2**k
    d = min(d, k)
    family = resolved(fam.ScaledPermuted(fam.AbridgedHadamard(n, d)), seed)
    B = materialize(family)
    g = np.random.default_rng(seed)
    X, Y = g.standard_normal((3, n)), g.standard_normal((3, n))
    m = build(MultiplierSpec(family, n))
    assert np.allclose(m.apply_right(2 * X - Y), 2 * (X @ B) - Y @ B, atol=1e-10 * 2**d)
