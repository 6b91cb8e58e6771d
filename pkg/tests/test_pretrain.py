import math

import numpy as np
import pytest

from conftest import max_rel_err
from ttprompt.align import AlignedFeatures, svd_align
from ttprompt.encoder import GcnParams
from ttprompt.errors import DataError
from ttprompt.graph import build_graph, generate_sbm
from ttprompt.pretrain import (
    PretrainConfig,
    init_gcn_params,
    lp_loss_and_grads,
    mann_whitney_auc,
    pretrain,
    sample_negative_edges,
)


def edgeless(n, d=2):
    return build_graph(n, [], np.ones((n, d)), np.zeros(n, dtype=int), 1)


def test_negative_sampling_edgeless():
    neg = sample_negative_edges(edgeless(4), 3, seed=0)
    assert neg.shape == (3, 2)
    assert np.all(neg[:, 0] != neg[:, 1])
    keys = {u * 4 + v for u, v in neg}
    assert len(keys) == 3


def test_negative_sampling_complete_graph_errors():
    k3 = build_graph(
        3, [(0, 1), (1, 2), (0, 2)], np.ones((3, 1)), np.zeros(3, dtype=int), 1
    )
    with pytest.raises(DataError):
        sample_negative_edges(k3, 1, seed=0)


def test_negative_sampling_avoids_edges():
    g = generate_sbm([50, 50], 0.3, 0.05, 3, 1.0, seed=1)
    neg = sample_negative_edges(g, 500, seed=2)
    assert neg.shape == (500, 2)
    edge_set = {
        (int(u), int(v))
        for u, v in zip(
            np.repeat(np.arange(g.num_nodes), np.diff(g.csr_row_offsets)),
            g.csr_col_indices,
        )
    }
    for u, v in neg:
        assert (int(u), int(v)) not in edge_set
        assert u != v
    # deterministic per seed
    again = sample_negative_edges(g, 500, seed=2)
    assert np.array_equal(neg, again)


def test_lp_loss_zero_scores_is_two_log_two():
    g = generate_sbm([4, 4], 0.5, 0.2, 3, 1.0, seed=3)
    aligned = svd_align(g.features, 3)
    params = GcnParams(
        [np.zeros((3, 4)), np.zeros((4, 4))], [np.zeros(4), np.zeros(4)]
    )
    pos = g.undirected_edges()[:4]
    neg = sample_negative_edges(g, 4, seed=4)
    loss, _ = lp_loss_and_grads(params, g, aligned, pos, neg)
    assert loss == pytest.approx(2.0 * math.log(2.0), abs=1e-12)


def test_lp_loss_saturated_scores_vanish():
    # edgeless graph, identity propagation and slope-1 activation keep the
    # aligned features as final embeddings, so dot products are hand-set
    g = edgeless(4, d=1)
    root20 = math.sqrt(20.0)
    aligned = AlignedFeatures(np.array([[root20], [root20], [root20], [-root20]]), 1)
    params = GcnParams([np.eye(1)], [np.zeros(1)], activation_slope=1.0)
    loss, _ = lp_loss_and_grads(params, g, aligned, [(0, 1)], [(2, 3)])
    assert 0.0 < loss < 1e-8


def test_lp_gradients_match_finite_differences(rng):
    for seed in range(3):
        g = generate_sbm([4, 4], 0.6, 0.3, 5, 1.0, seed=seed)
        aligned = svd_align(g.features, 4)
        params = init_gcn_params(4, 3, 2, seed=seed + 10)
        pos = g.undirected_edges()[:5]
        neg = sample_negative_edges(g, 5, seed=seed + 20)
        _, grads = lp_loss_and_grads(params, g, aligned, pos, neg)

        def loss_fn():
            return lp_loss_and_grads(params, g, aligned, pos, neg)[0]

        for arr, grad in zip(
            params.weights + params.biases, grads.weights + grads.biases
        ):
            assert max_rel_err(loss_fn, arr, grad) <= 1e-5


def test_lp_loss_requires_positives():
    g = edgeless(3)
    aligned = svd_align(g.features, 2)
    params = init_gcn_params(2, 2, 1, seed=0)
    with pytest.raises(ValueError):
        lp_loss_and_grads(params, g, aligned, np.empty((0, 2), int), [(0, 1)])


def test_auc_constant_scorer_is_half():
    assert mann_whitney_auc(np.ones(7), np.ones(13)) == 0.5


def test_auc_matches_pairwise_oracle(rng):
    pos = rng.standard_normal(20)
    neg = rng.standard_normal(30)
    wins = sum(
        1.0 if p > n else (0.5 if p == n else 0.0) for p in pos for n in neg
    )
    assert mann_whitney_auc(pos, neg) == pytest.approx(wins / (20 * 30), abs=1e-12)


def test_auc_perfect_separation():
    assert mann_whitney_auc([2.0, 3.0], [0.0, 1.0]) == 1.0
    assert mann_whitney_auc([0.0], [1.0, 2.0]) == 0.0


def sbm_sources():
    g = generate_sbm([50, 50], 0.2, 0.01, 8, 1.5, seed=100)
    return [g], [svd_align(g.features, 8)]


def test_pretrain_zero_epochs_returns_init():
    graphs, aligned = sbm_sources()
    cfg = PretrainConfig(epochs=0, hidden_dim=8, num_layers=2, seed=1)
    params = pretrain(graphs, aligned, cfg)
    ref = init_gcn_params(8, 8, 2, seed=[1, 0])
    for a, b in zip(params.weights, ref.weights):
        assert np.array_equal(a, b)


def test_pretrain_zero_lr_keeps_init():
    graphs, aligned = sbm_sources()
    cfg = PretrainConfig(
        learning_rate=0.0, epochs=3, hidden_dim=8, num_layers=2, seed=1
    )
    params = pretrain(graphs, aligned, cfg)
    ref = init_gcn_params(8, 8, 2, seed=[1, 0])
    for a, b in zip(params.weights, ref.weights):
        assert np.array_equal(a, b)
    for a, b in zip(params.biases, ref.biases):
        assert np.array_equal(a, b)


def test_pretrain_reaches_auc_on_sbm():
    g = generate_sbm([100, 100], 0.2, 0.01, 16, 1.0, seed=200)
    aligned = svd_align(g.features, 8)
    cfg = PretrainConfig(
        learning_rate=1e-2, epochs=200, hidden_dim=16, num_layers=2, seed=0,
        edge_holdout_fraction=0.1,
    )
    params = pretrain([g], [aligned], cfg)
    # best-AUC snapshot must beat 0.75 on its own holdout; re-measure
    # independently on a fresh holdout-style evaluation
    from ttprompt.encoder import encode

    emb = encode(g, aligned, params)
    z = emb.layers[-1]
    und = g.undirected_edges()
    rng = np.random.default_rng(5)
    pick = rng.choice(und.shape[0], size=200, replace=False)
    pos = und[pick]
    neg = sample_negative_edges(g, 200, seed=6)
    sp = np.einsum("ij,ij->i", z[pos[:, 0]], z[pos[:, 1]])
    sn = np.einsum("ij,ij->i", z[neg[:, 0]], z[neg[:, 1]])
    assert mann_whitney_auc(sp, sn) > 0.75


def test_pretrain_loss_decreases_most_seeds():
    wins = 0
    for seed in range(5):
        g = generate_sbm([40, 40], 0.25, 0.02, 8, 1.0, seed=300 + seed)
        aligned = svd_align(g.features, 6)
        pos = g.undirected_edges()
        neg = sample_negative_edges(g, pos.shape[0], seed=seed)
        cfg = PretrainConfig(
            learning_rate=1e-2, epochs=60, hidden_dim=8, num_layers=2, seed=seed
        )
        init = pretrain([g], [aligned], PretrainConfig(
            epochs=0, hidden_dim=8, num_layers=2, seed=seed
        ))
        before, _ = lp_loss_and_grads(init, g, aligned, pos, neg)
        trained = pretrain([g], [aligned], cfg)
        after, _ = lp_loss_and_grads(trained, g, aligned, pos, neg)
        wins += after < before
    assert wins >= 4
