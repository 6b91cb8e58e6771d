import numpy as np
import pytest

from ttprompt.align import AlignedFeatures, svd_align
from ttprompt.encoder import (
    GcnParams,
    encode,
    load_gcn_params,
    normalize_adjacency,
    save_gcn_params,
)
from ttprompt.errors import DataError, NumericalError
from ttprompt.graph import build_graph, generate_sbm
from ttprompt.pretrain import init_gcn_params


def simple_graph(num_nodes, edges, d=2):
    feats = np.arange(num_nodes * d, dtype=np.float64).reshape(num_nodes, d)
    return build_graph(num_nodes, edges, feats, np.zeros(num_nodes, dtype=int), 1)


def test_normalize_single_edge():
    g = simple_graph(2, [(0, 1)])
    assert np.allclose(normalize_adjacency(g).dense(), np.full((2, 2), 0.5))


def test_normalize_edgeless_is_identity():
    g = simple_graph(3, [])
    assert np.allclose(normalize_adjacency(g).dense(), np.eye(3))


def test_normalize_k3_uniform():
    g = simple_graph(3, [(0, 1), (1, 2), (0, 2)])
    assert np.allclose(normalize_adjacency(g).dense(), np.full((3, 3), 1.0 / 3.0))


def test_normalize_symmetric_and_positive():
    g = generate_sbm([10, 10], 0.4, 0.1, 3, 1.0, seed=0)
    dense = normalize_adjacency(g).dense()
    assert np.allclose(dense, dense.T, atol=1e-12)
    vals = normalize_adjacency(g).values
    assert np.all(vals > 0)
    assert np.all(np.diag(dense) > 0)  # self-loop present on every row


def test_normalize_matches_dense_formula():
    for seed in range(3):
        g = generate_sbm([12, 9], 0.4, 0.15, 3, 1.0, seed=seed)
        n = g.num_nodes
        adj = np.zeros((n, n))
        for u, v in g.undirected_edges():
            adj[u, v] = adj[v, u] = 1.0
        adj += np.eye(n)
        d_inv_sqrt = np.diag(1.0 / np.sqrt(adj.sum(axis=1)))
        want = d_inv_sqrt @ adj @ d_inv_sqrt
        assert np.allclose(normalize_adjacency(g).dense(), want, atol=1e-12)


def test_encode_zero_weights():
    g = generate_sbm([5, 5], 0.5, 0.1, 3, 1.0, seed=1)
    aligned = svd_align(g.features, 3)
    params = GcnParams(
        [np.zeros((3, 4)), np.zeros((4, 4))], [np.zeros(4), np.zeros(4)]
    )
    emb = encode(g, aligned, params)
    assert np.array_equal(emb.layers[1], np.zeros((10, 4)))
    assert np.array_equal(emb.layers[2], np.zeros((10, 4)))


def test_encode_edgeless_identity_weights():
    g = simple_graph(4, [], d=3)
    aligned = AlignedFeatures(np.abs(np.random.default_rng(0).standard_normal((4, 3))), 3)
    params = GcnParams([np.eye(3)], [np.zeros(3)])
    emb = encode(g, aligned, params)
    assert np.allclose(emb.layers[1], emb.layers[0], atol=1e-15)


def dense_reference(g, h0, params):
    a = normalize_adjacency(g).dense()
    hs = [h0]
    for w, b in zip(params.weights, params.biases):
        z = a @ hs[-1] @ w + b
        hs.append(np.where(z >= 0, z, params.activation_slope * z))
    return hs


def test_encode_matches_dense_reference(rng):
    g = generate_sbm([5, 5], 0.5, 0.2, 4, 1.0, seed=2)
    aligned = svd_align(g.features, 4)
    params = init_gcn_params(4, 4, 2, seed=3)
    emb = encode(g, aligned, params)
    ref = dense_reference(g, aligned.matrix, params)
    for got, want in zip(emb.layers, ref):
        assert np.allclose(got, want, atol=1e-10)


def test_sparse_dense_propagation_agreement(rng):
    for seed in range(3):
        g = generate_sbm([40, 35, 25], 0.2, 0.05, 3, 0.5, seed=seed)
        a = normalize_adjacency(g)
        x = rng.standard_normal((g.num_nodes, 8))
        assert np.allclose(a.matmul(x), a.dense() @ x, atol=1e-10)


def test_permutation_equivariance(rng):
    g = generate_sbm([6, 6], 0.5, 0.2, 3, 1.0, seed=4)
    params = init_gcn_params(3, 5, 2, seed=5)
    aligned = AlignedFeatures(rng.standard_normal((12, 3)), 3)
    emb = encode(g, aligned, params)

    perm = rng.permutation(12)
    inv = np.argsort(perm)
    # relabel node i -> inv[i] so row perm[j] of the original becomes row j
    edges = g.undirected_edges()
    g2 = build_graph(
        12,
        np.stack([inv[edges[:, 0]], inv[edges[:, 1]]], axis=1),
        g.features[perm],
        g.labels[perm],
        g.num_classes,
    )
    emb2 = encode(g2, AlignedFeatures(aligned.matrix[perm], 3), params)
    for h, h2 in zip(emb.layers, emb2.layers):
        assert np.allclose(h[perm], h2, rtol=0.0, atol=1e-12)


def test_encode_is_pure(rng):
    g = generate_sbm([5, 5], 0.5, 0.2, 3, 1.0, seed=6)
    aligned = svd_align(g.features, 3)
    params = init_gcn_params(3, 4, 2, seed=7)
    before = [w.copy() for w in params.weights]
    a = encode(g, aligned, params)
    b = encode(g, aligned, params)
    for w0, w1 in zip(before, params.weights):
        assert np.array_equal(w0, w1)
    for x, y in zip(a.layers, b.layers):
        assert np.array_equal(x, y)


def test_encode_dimension_mismatch():
    g = simple_graph(3, [(0, 1)])
    aligned = AlignedFeatures(np.zeros((3, 2)), 2)
    params = GcnParams([np.zeros((5, 4))], [np.zeros(4)])
    with pytest.raises(DataError):
        encode(g, aligned, params)


def test_encode_nonfinite_reports_layer():
    g = simple_graph(2, [(0, 1)])
    aligned = AlignedFeatures(np.full((2, 1), 1e200), 1)
    params = GcnParams([np.full((1, 1), 1e200)], [np.zeros(1)])
    with pytest.raises(NumericalError, match="layer 1"):
        encode(g, aligned, params)


def test_params_file_roundtrip(tmp_path, rng):
    params = init_gcn_params(5, 3, 2, seed=8)
    params.weights[0][0, 0] = 1.0 / 3.0  # exercise full precision
    path = tmp_path / "gcn.params"
    save_gcn_params(params, path)
    loaded = load_gcn_params(path)
    assert loaded.activation_slope == params.activation_slope
    for a, b in zip(loaded.weights, params.weights):
        assert np.array_equal(a, b)
    for a, b in zip(loaded.biases, params.biases):
        assert np.array_equal(a, b)


def test_params_file_bad_header(tmp_path):
    path = tmp_path / "bad.params"
    path.write_text("layers=oops\n")
    with pytest.raises(DataError):
        load_gcn_params(path)
