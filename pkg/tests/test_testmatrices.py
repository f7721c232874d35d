import numpy as np
import pytest
import scipy.integrate

from sketchlra import dense
from sketchlra.rand import RngStream
from sketchlra.testmatrices import (FD_CASES, LAPLACIAN_NORM, InputClass, adaptive_gauss_legendre,
                                    gen_adversarial, gen_factor_gaussian, gen_fd_inverse,
                                    gen_laplacian, gen_svd_spectrum, svd_spectrum)


def test_svd_spectrum_is_exact():
    M = gen_svd_spectrum(64, 8, RngStream(0))
    s = np.linalg.svd(M, compute_uv=False)
    assert np.allclose(s[:8], 1 / np.arange(1, 9), rtol=1e-12)
    assert np.allclose(s[8:], 1e-10, rtol=1e-4)
    assert dense.numerical_rank(M, 1e-5) == 8
    assert svd_spectrum(4, 2).tolist() == [1.0, 0.5, 1e-10, 1e-10]
    with pytest.raises(ValueError):
        gen_svd_spectrum(4, 4)


def test_gauss_legendre_against_quad():
    for fn, a, b in ((np.sin, 0, 3), (lambda t: np.log(np.abs(2 - np.exp(1j * t))), 0, 0.5),
                     (lambda t: np.exp(-t * t), -2, 5)):
        ref = scipy.integrate.quad(fn, a, b, epsabs=1e-15, epsrel=1e-13)[0]
        assert adaptive_gauss_legendre(fn, a, b) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_laplacian_entries_match_quadrature():
    n = 16
    M = gen_laplacian(n, norm=1.0)
    # unscaled entry (i, j): integral of log|2 w^i - e^{it}| over the j-th arc
    raw = lambda i, j: scipy.integrate.quad(
        lambda t: np.log(abs(2 * np.exp(2j * np.pi * i / n) - np.exp(1j * t))),
        2 * np.pi * j / n, 2 * np.pi * (j + 1) / n, epsabs=1e-14)[0]
    ref = np.array([[raw(i, j) for j in range(n)] for i in range(n)])
    ref /= np.linalg.norm(ref, 2)
    assert np.allclose(M, ref, atol=1e-12)


def test_laplacian_circulant_and_scale():
    M = gen_laplacian(40)
    assert np.allclose(np.roll(np.roll(M, 1, 0), 1, 1), M, atol=1e-20)
    assert np.linalg.norm(M, 2) == pytest.approx(LAPLACIAN_NORM, rel=1e-12)
    assert dense.numerical_rank(gen_laplacian(200), 1e-6) == 3


def test_fd_inverse_is_grid_green_function():
    M = gen_fd_inverse((88, 160))
    assert M.shape == (88, 160) and np.linalg.norm(M, 2) == pytest.approx(1.0)
    assert np.all(M > 0)  # inverse of an M-matrix with a connected grid
    assert dense.numerical_rank(M, 1e-6) == FD_CASES[(88, 160)]
    with pytest.raises(ValueError):
        gen_fd_inverse((10, 20))


def test_factor_gaussian_and_noise():
    M = gen_factor_gaussian(30, 20, 4, rng=1)
    s = np.linalg.svd(M, compute_uv=False)
    assert s[3] > 1e-3 * s[0] and s[4] < 1e-12 * s[0]
    N = gen_factor_gaussian(30, 20, 4, noise=1e-3, rng=1)
    assert np.linalg.norm(N - M, 2) == pytest.approx(1e-3, rel=1e-10)


def test_adversarial():
    perm = np.random.default_rng(0).permutation(10)
    M = gen_adversarial(5, 10, 3, perm)
    assert np.array_equal(np.nonzero(M)[1], perm[:3])
    with pytest.raises(ValueError):
        gen_adversarial(5, 10, 3, [0] * 10)


def test_input_class_dispatch_is_deterministic():
    ic = InputClass("svd", n=32, r=4)
    assert np.array_equal(ic.generate(3), ic.generate(3))
    assert not np.array_equal(ic.generate(3), ic.generate(4))
    assert InputClass("fd", 88, 160).shape == (88, 160) and InputClass("fd", 88, 160).xi == 1e-6
    assert InputClass("factor_gaussian", 8, 6, 2).generate(0).shape == (8, 6)
    with pytest.raises(ValueError):
        InputClass("bogus")
