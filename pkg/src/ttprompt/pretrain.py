"""Label-free link-prediction pre-training of the GCN encoder.

Objective: binary cross-entropy on the logistic of final-layer dot products,
positives = graph edges, negatives sampled uniformly among non-edges.
Gradients come from a hand-written reverse pass restricted to the encoder's
op set (spmm, matmul, bias add, leaky rectifier, pairwise dot, logistic BCE);
every entry is checked against central finite differences in the tests.
"""

from dataclasses import dataclass

import numpy as np

from .encoder import GcnParams, normalize_adjacency
from .errors import DataError, NumericalError
from .graph import build_graph


@dataclass
class PretrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    neg_ratio: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    hidden_dim: int = 64
    num_layers: int = 2
    edge_holdout_fraction: float = 0.1

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.neg_ratio < 1:
            raise ValueError("neg_ratio must be >= 1")
        if not 0.0 <= self.edge_holdout_fraction < 1.0:
            raise ValueError("edge_holdout_fraction must be in [0, 1)")


@dataclass
class ParamGrads:
    """GcnParams-shaped gradient container."""

    weights: list
    biases: list


def sample_negative_edges(g, count, seed):
    """count distinct ordered non-edge pairs (u, v), u != v, by rejection."""
    n = g.num_nodes
    available = n * (n - 1) - g.num_edges
    if count > available:
        raise DataError(
            f"requested {count} negative edges but only {available} non-edges exist"
        )
    off, col = g.csr_row_offsets, g.csr_col_indices
    src = np.repeat(np.arange(n), np.diff(off))
    edge_keys = src * n + col  # sorted because CSR rows/cols are sorted

    rng = np.random.default_rng(seed)
    seen = set()
    out = np.empty((count, 2), dtype=np.int64)
    filled = 0
    draws = 0
    budget = 50 * count + 1000
    while filled < count:
        batch = max(2 * (count - filled), 16)
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        draws += batch
        ok = u != v
        keys = u * n + v
        idx = np.searchsorted(edge_keys, keys)
        idx_c = np.minimum(idx, max(edge_keys.size - 1, 0))
        if edge_keys.size:
            ok &= edge_keys[idx_c] != keys
        for key in keys[ok]:
            if key in seen:
                continue
            seen.add(key)
            out[filled, 0] = key // n
            out[filled, 1] = key % n
            filled += 1
            if filled == count:
                break
        if draws > budget:
            raise DataError(
                f"negative sampling exhausted retry budget ({draws} draws for {count})"
            )
    return out


def _forward(a_hat, h0, params):
    """Forward pass keeping pre-activations and propagated inputs."""
    hs = [h0]
    zs = []
    ahs = []
    slope = params.activation_slope
    for w, b in zip(params.weights, params.biases):
        ah = a_hat.matmul(hs[-1])
        z = ah @ w + b
        hs.append(np.where(z >= 0.0, z, slope * z))
        zs.append(z)
        ahs.append(ah)
    return hs, zs, ahs


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _lp_core(params, a_hat, h0, pos, neg):
    pos = np.asarray(pos, dtype=np.int64).reshape(-1, 2)
    neg = np.asarray(neg, dtype=np.int64).reshape(-1, 2)
    if pos.shape[0] == 0:
        raise ValueError("lp loss needs at least one positive edge")
    hs, zs, ahs = _forward(a_hat, h0, params)
    z_final = hs[-1]

    s_pos = np.einsum("ij,ij->i", z_final[pos[:, 0]], z_final[pos[:, 1]])
    loss = np.mean(np.logaddexp(0.0, -s_pos))
    if neg.shape[0]:
        s_neg = np.einsum("ij,ij->i", z_final[neg[:, 0]], z_final[neg[:, 1]])
        loss += np.mean(np.logaddexp(0.0, s_neg))
    if not np.isfinite(loss):
        raise NumericalError("non-finite link-prediction loss")

    # backward: d loss / d score, scattered into d loss / d H(L)
    dh = np.zeros_like(z_final)
    coef_pos = (_sigmoid(s_pos) - 1.0) / pos.shape[0]
    np.add.at(dh, pos[:, 0], coef_pos[:, None] * z_final[pos[:, 1]])
    np.add.at(dh, pos[:, 1], coef_pos[:, None] * z_final[pos[:, 0]])
    if neg.shape[0]:
        coef_neg = _sigmoid(s_neg) / neg.shape[0]
        np.add.at(dh, neg[:, 0], coef_neg[:, None] * z_final[neg[:, 1]])
        np.add.at(dh, neg[:, 1], coef_neg[:, None] * z_final[neg[:, 0]])

    slope = params.activation_slope
    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.biases)
    for l in range(len(params.weights) - 1, -1, -1):
        dz = dh * np.where(zs[l] >= 0.0, 1.0, slope)
        d_weights[l] = ahs[l].T @ dz
        d_biases[l] = dz.sum(axis=0)
        if l > 0:
            dh = a_hat.matmul(dz @ params.weights[l].T)  # A_hat symmetric
    return float(loss), ParamGrads(d_weights, d_biases)


def lp_loss_and_grads(params, g, aligned, pos, neg):
    """BCE loss over pos/neg pairs and its gradient w.r.t. every parameter."""
    a_hat = normalize_adjacency(g)
    return _lp_core(params, a_hat, aligned.matrix, pos, neg)


def init_gcn_params(d_in, hidden_dim, num_layers, seed, slope=0.25):
    """Scaled-uniform fan init for weights, zero biases."""
    rng = np.random.default_rng(seed)
    dims = [d_in] + [hidden_dim] * num_layers
    weights = []
    biases = []
    for l in range(num_layers):
        limit = np.sqrt(6.0 / (dims[l] + dims[l + 1]))
        weights.append(rng.uniform(-limit, limit, size=(dims[l], dims[l + 1])))
        biases.append(np.zeros(dims[l + 1]))
    return GcnParams(weights, biases, slope)


class _Adam:
    def __init__(self, params, cfg):
        self.lr = cfg.learning_rate
        self.b1 = cfg.adam_beta1
        self.b2 = cfg.adam_beta2
        self.eps = cfg.adam_eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for i in range(len(params.weights)):
            for p, g, m, v in (
                (params.weights[i], grads.weights[i], self.m_w[i], self.v_w[i]),
                (params.biases[i], grads.biases[i], self.m_b[i], self.v_b[i]),
            ):
                m *= self.b1
                m += (1.0 - self.b1) * g
                v *= self.b2
                v += (1.0 - self.b2) * g * g
                p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def mann_whitney_auc(pos_scores, neg_scores):
    """P(random positive outranks random negative); ties count half."""
    pos_scores = np.asarray(pos_scores, dtype=np.float64)
    neg_scores = np.asarray(neg_scores, dtype=np.float64)
    scores = np.concatenate([pos_scores, neg_scores])
    _, inv, counts = np.unique(scores, return_inverse=True, return_counts=True)
    cum = np.concatenate([[0], np.cumsum(counts)])
    avg_rank = cum[:-1] + (counts + 1) / 2.0
    ranks = avg_rank[inv]
    rp = ranks[:pos_scores.size].sum()
    np_size = pos_scores.size
    return (rp - np_size * (np_size + 1) / 2.0) / (np_size * neg_scores.size)


def pretrain(graphs, aligned_list, cfg):
    """Round-robin full-graph Adam on the LP objective over source graphs.

    Holds out edge_holdout_fraction of each graph's undirected edges for a
    validation AUC (those edges are also removed from the propagation
    structure during pre-training); returns the snapshot with the best mean
    held-out AUC across graphs.
    """
    if len(graphs) != len(aligned_list):
        raise ValueError("graphs and aligned feature lists differ in length")
    d_a = aligned_list[0].target_dim
    for a in aligned_list:
        if a.target_dim != d_a:
            raise DataError("source graphs aligned to different dimensions")

    params = init_gcn_params(
        d_a, cfg.hidden_dim, cfg.num_layers, seed=[cfg.seed, 0]
    )
    if cfg.epochs == 0:
        return params

    # per-graph fixed holdout, training adjacency, and evaluation negatives
    prepared = []
    for gi, (g, a) in enumerate(zip(graphs, aligned_list)):
        und = g.undirected_edges()
        k = int(cfg.edge_holdout_fraction * und.shape[0])
        perm = np.random.default_rng([cfg.seed, 1, gi]).permutation(und.shape[0])
        val_pos = und[perm[:k]]
        train_pos = und[perm[k:]]
        if train_pos.shape[0] == 0:
            raise DataError(f"graph {gi}: no training edges left after holdout")
        g_train = build_graph(
            g.num_nodes, train_pos, g.features, g.labels, g.num_classes
        )
        a_hat = normalize_adjacency(g_train)
        val_neg = (
            sample_negative_edges(g, val_pos.shape[0], seed=[cfg.seed, 2, gi])
            if k > 0
            else np.empty((0, 2), dtype=np.int64)
        )
        prepared.append((g, a.matrix, a_hat, train_pos, val_pos, val_neg))

    def holdout_auc(p):
        aucs = []
        for _, h0, a_hat, _, val_pos, val_neg in prepared:
            if val_pos.shape[0] == 0:
                continue
            hs, _, _ = _forward(a_hat, h0, p)
            zf = hs[-1]
            sp = np.einsum("ij,ij->i", zf[val_pos[:, 0]], zf[val_pos[:, 1]])
            sn = np.einsum("ij,ij->i", zf[val_neg[:, 0]], zf[val_neg[:, 1]])
            aucs.append(mann_whitney_auc(sp, sn))
        return float(np.mean(aucs)) if aucs else None

    adam = _Adam(params, cfg)
    best = params.copy()
    best_auc = holdout_auc(params)
    for epoch in range(cfg.epochs):
        for gi, (g, h0, a_hat, train_pos, _, _) in enumerate(prepared):
            neg = sample_negative_edges(
                g, cfg.neg_ratio * train_pos.shape[0], seed=[cfg.seed, 3, epoch, gi]
            )
            _, grads = _lp_core(params, a_hat, h0, train_pos, neg)
            adam.step(params, grads)
        auc = holdout_auc(params)
        if auc is not None and (best_auc is None or auc > best_auc):
            best_auc = auc
            best = params.copy()
    return best if best_auc is not None else params
