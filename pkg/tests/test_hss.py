import numpy as np
import pytest

from sketchlra import dense
from sketchlra.cg import gen_concentrated
from sketchlra.errors import GeneratorRankExceeded
from sketchlra.hss import (HssMatrix, build_tree, hss_compress, hss_matvec, neutered_column,
                           neutered_split, partition_blocks, partition_rank_check)
from sketchlra.multipliers import FlopCounter, MultiplierSpec, families as fam
from sketchlra.rand import RngStream, gaussian_matrix


def hodlr_test_matrix(n, r, seed=0):
    """Sum of a rank-r matrix and a block diagonal: every off-diagonal block has rank <= r."""
    g = np.random.default_rng(seed)
    M = g.standard_normal((n, r)) @ g.standard_normal((r, n))
    for s in range(0, n, 16):
        M[s:s + 16, s:s + 16] += g.standard_normal((min(16, n - s), min(16, n - s)))
    return M


def test_tree_is_a_binary_partition():
    tree = build_tree(100, 16)
    leaves = [t for t in tree if t.is_leaf]
    assert sum(t.size for t in leaves) == 100 and max(t.size for t in leaves) <= 16
    assert {t.level for t in leaves} == {3}
    for t in tree:
        if t.children:
            a, b = (tree[c] for c in t.children)
            assert (a.start, b.stop, a.stop) == (t.start, t.stop, b.start)
    assert len(build_tree(10, 16)) == 1
    with pytest.raises(ValueError):
        build_tree(0, 4)


def test_partition_blocks_and_neutered_columns():
    M = np.arange(64.0).reshape(8, 8)
    tree = build_tree(8, 2)
    blocks = list(partition_blocks(tree))
    # two blocks per sibling pair
    assert len(blocks) == len(tree) - 1
    node = tree[2]
    N = neutered_column(M, node)
    up, lo = neutered_split(M, node)
    assert N.shape == (8 - node.size, node.size)
    assert np.array_equal(N, np.vstack([up, lo]))


@pytest.mark.parametrize("family", ["gaussian", "hadamard"])
def test_compression_reproduces_matrix(family):
    M = hodlr_test_matrix(128, 4)
    H = hss_compress(M, 12, 1e-12, family, RngStream(1), symmetric=False)
    err = np.linalg.norm(H.to_dense() - M, 2) / np.linalg.norm(M, 2)
    assert err < 1e-9
    x = gaussian_matrix(RngStream(2), 128, 3)
    assert np.allclose(H.matvec(x), M @ x, rtol=0, atol=1e-8 * np.abs(M @ x).max())
    assert np.allclose(hss_matvec(H, x[:, 0]), H.to_dense() @ x[:, 0])


def test_symmetric_and_odd_size():
    M = gen_concentrated(150, 4, 1e-10, 3)
    H = hss_compress(M, 4, 1e-10, "gaussian", RngStream(0))
    assert H.symmetric
    assert np.linalg.norm(H.to_dense() - M, 2) < 1e-8 * np.linalg.norm(M, 2)


def test_rank_budget_enforced():
    M = gaussian_matrix(RngStream(0), 64, 64)
    with pytest.raises(GeneratorRankExceeded):
        hss_compress(M, 2, 1e-10, "gaussian", RngStream(0))


def test_custom_multiplier_callable():
    M = hodlr_test_matrix(64, 3)
    H = hss_compress(M, 10, 1e-12, lambda h, l: MultiplierSpec(fam.Ternary(h), l), RngStream(0))
    assert np.linalg.norm(H.to_dense() - M, 2) < 1e-9 * np.linalg.norm(M, 2)


def test_generators_and_flops():
    M = gen_concentrated(256, 5, 1e-10, 1)
    H = hss_compress(M, 5, 1e-10, "gaussian", RngStream(0))
    for node in H.tree[1:]:
        F, Hf = H.generator(node.index)
        N = neutered_column(M, node)
        assert F.shape[1] == Hf.shape[0] <= 5
        assert np.linalg.norm(F @ Hf - N, 2) < 1e-8 * np.linalg.norm(M, 2)
    c = FlopCounter()
    H.matvec(np.ones(256), c)
    assert c.count == H.matvec_flops() < 256 * 511
    assert H.compression_flops > 0


def test_save_load_roundtrip(tmp_path):
    M = gen_concentrated(128, 3, 1e-10, 2)
    H = hss_compress(M, 3, 1e-10, "gaussian", RngStream(0))
    H.save(tmp_path)
    assert (tmp_path / "manifest.json").exists()
    back = HssMatrix.load(tmp_path)
    assert np.array_equal(back.to_dense(), H.to_dense())
    x = np.arange(128.0)
    assert np.array_equal(back.matvec(x), H.matvec(x))


def test_partition_rank_check():
    M = gen_concentrated(256, 4, 1e-10, 0)
    rep = partition_rank_check(M, 4, 1e-8 * dense.spectral_norm(M))
    assert rep.holds and rep.split_bound_holds and rep.max_rank <= 4
    G = gaussian_matrix(RngStream(0), 64, 64)
    bad = partition_rank_check(G, 4, 1e-8)
    assert not bad.holds and bad.split_bound_holds
