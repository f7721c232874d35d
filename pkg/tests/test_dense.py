import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sketchlra import dense
from sketchlra.errors import ReducedRank, ThetaTooLarge


def rand(m, n, seed=0):
    return np.random.default_rng(seed).standard_normal((m, n))


def test_as_matrix_rejects_bad_input():
    with pytest.raises(ValueError):
        dense.as_matrix(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        dense.as_matrix([[1.0, np.nan]])
    assert dense.as_matrix([1, 2, 3]).shape == (3, 1)


def test_orthogonalize_orthonormal_and_spans():
    A = rand(30, 7)
    Q = dense.orthogonalize(A)
    assert np.abs(Q.T @ Q - np.eye(7)).max() < dense.tol_ortho(30)
    assert np.abs(Q @ (Q.T @ A) - A).max() < 1e-12


def test_orthogonalize_flags_dependent_columns():
    A = rand(10, 3)
    A = np.column_stack([A, A[:, 0] + A[:, 1]])
    Q, rank = dense.orthogonalize(A, return_rank=True)
    assert rank == 3
    with pytest.raises(ReducedRank) as info:
        dense.orthogonalize(A, strict=True)
    assert info.value.rank == 3 and info.value.q.shape == (10, 4)


def test_svd_against_jacobi_oracle():
    A = rand(12, 8, 3)
    f, g = dense.svd(A), dense.jacobi_svd(A)
    assert np.allclose(f.sigma, g.sigma, rtol=1e-13)
    assert np.abs(g.reconstruct() - A).max() < 1e-13
    assert np.abs(f.reconstruct() - A).max() < 1e-13


def test_jacobi_wide_and_rank_deficient():
    A = rand(4, 9) @ np.diag([1, 1, 1, 0, 0, 0, 0, 0, 0.0])
    g = dense.jacobi_svd(A)
    assert g.rank == 3
    assert np.allclose(g.reconstruct(), A, atol=1e-13)


def test_svd_complex():
    g = np.random.default_rng(1)
    A = g.standard_normal((6, 5)) + 1j * g.standard_normal((6, 5))
    f = dense.svd(A)
    assert np.abs(f.reconstruct() - A).max() < 1e-13


def test_numerical_rank_and_condition():
    A = np.diag([1.0, 1e-3, 1e-9])
    assert dense.numerical_rank(A, 1e-6) == 2
    assert dense.condition_number(np.diag([4.0, 2.0])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        dense.numerical_rank(A, 0)


def test_spectral_norm_methods_agree():
    A = rand(400, 300, 5)
    s = np.linalg.svd(A, compute_uv=False)[0]
    assert dense.spectral_norm(A, method="lanczos") == pytest.approx(s, rel=1e-10)
    assert dense.spectral_norm(A, method="svd") == pytest.approx(s, rel=1e-13)
    assert dense.frobenius_norm(A) == pytest.approx(np.sqrt((A**2).sum()))


def test_pseudo_inverse_penrose_conditions():
    A = rand(9, 4) @ rand(4, 7)
    P = dense.pseudo_inverse(A)
    assert np.allclose(A @ P @ A, A, atol=1e-11)
    assert np.allclose(P @ A @ P, P, atol=1e-11)


def test_inverse_perturbation():
    g = np.random.default_rng(2)
    C = np.eye(10) * 3 + 0.1 * g.standard_normal((10, 10))
    E = g.standard_normal((10, 10))
    E *= 0.1 / np.linalg.norm(np.linalg.inv(C), 2) / np.linalg.norm(E, 2)
    rep = dense.inverse_perturbation_check(C, E)
    assert rep.holds and rep.theta <= 0.1 + 1e-12
    with pytest.raises(ThetaTooLarge):
        dense.inverse_perturbation_check(np.eye(2), -np.eye(2))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(-1e300, 1e300, allow_nan=False)))
def test_dmat_roundtrip_exact(tmp_path_factory, A):
    p = tmp_path_factory.mktemp("d") / "a.dmat"
    dense.write_dmat(p, A)
    assert np.array_equal(dense.read_dmat(p), A)


def test_dmat_complex_and_header(tmp_path):
    A = np.array([[1 + 2j, -0.5j], [3.25, 1e-300 + 0j]])
    dense.write_dmat(tmp_path / "c.dmat", A)
    assert (tmp_path / "c.dmat").read_text().startswith("DMAT 2 2 complex")
    assert np.array_equal(dense.read_dmat(tmp_path / "c.dmat"), A)
    (tmp_path / "bad.dmat").write_text("DMAT 2 2 real\n1 2 3\n")
    with pytest.raises(ValueError):
        dense.read_dmat(tmp_path / "bad.dmat")
