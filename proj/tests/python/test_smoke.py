import numpy as np
import pytest

import h2mul


@pytest.fixture(scope="module")
def setup():
    mesh = h2mul.sphere_mesh(2)
    tree = h2mul.build_cluster_tree(mesh, 16)
    blocks = h2mul.build_block_tree(tree, tree, 1.0)
    G = h2mul.assemble_single_layer(mesh, blocks, 3)
    return mesh, tree, blocks, G


def dense_kernel_matrix(mesh, tree):
    # midpoint rule, off-diagonal entries only; diagonal left to the H2 matrix
    m = mesh.midpoints[tree.index_at]
    a = mesh.areas[tree.index_at]
    d = np.linalg.norm(m[:, None, :] - m[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    return a[:, None] * a[None, :] / (4.0 * np.pi * d)


def test_mesh(setup):
    mesh, _, _, _ = setup
    assert len(mesh) == 128
    assert mesh.triangles.shape == (128, 3)
    assert np.allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0)
    assert 0.9 * 4 * np.pi < mesh.areas.sum() < 4 * np.pi


def test_kernel():
    x = np.array([0.0, 0.0, 0.0])
    y = np.array([2.0, 0.0, 0.0])
    assert h2mul.single_layer_kernel(x, y) == pytest.approx(1.0 / (8.0 * np.pi))


def test_matvec_matches_dense(setup):
    mesh, tree, _, G = setup
    D = G.to_dense()
    assert D.shape == (128, 128)
    x = np.random.default_rng(1).standard_normal(128)
    assert np.allclose(G.matvec(x), D @ x, rtol=0, atol=1e-12 * np.abs(D).sum())
    assert np.allclose(G.rmatvec(x), D.T @ x, rtol=0, atol=1e-12 * np.abs(D).sum())
    K = dense_kernel_matrix(mesh, tree)
    off = ~np.eye(128, dtype=bool)
    assert np.linalg.norm((D - K)[off]) < 1e-2 * np.linalg.norm(K[off])


def test_multiply(setup):
    _, _, blocks, G = setup
    ctl = h2mul.TruncationControl(eps=1e-6)
    Z = h2mul.multiply(G, G, blocks, ctl)
    D = G.to_dense()
    err = np.linalg.norm(Z.to_dense() - D @ D, 2) / np.linalg.norm(D @ D, 2)
    assert err < 2e-6


def test_save_load(setup, tmp_path):
    _, _, _, G = setup
    path = str(tmp_path / "g.h2")
    G.save(path)
    H = h2mul.load_h2(path)
    assert np.array_equal(H.to_dense(), G.to_dense())
    assert H.memory_bytes() == G.memory_bytes()


def test_mesh_round_trip(setup, tmp_path):
    mesh, _, _, _ = setup
    path = str(tmp_path / "sphere.mesh")
    h2mul.write_mesh(path, mesh)
    back = h2mul.read_mesh(path)
    assert np.array_equal(back.triangles, mesh.triangles)


def test_benchmark_small():
    cfg = h2mul.BenchConfig()
    cfg.levels = [2]
    rows = h2mul.run_benchmark(cfg)
    assert len(rows) == 1
    assert rows[0]["n"] == 128
    assert rows[0]["rel_error"] <= 2 * cfg.eps


def test_invalid_control():
    with pytest.raises(Exception):
        h2mul.TruncationControl(eps=0.0)
