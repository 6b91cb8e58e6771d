"""Centroid prompts, layer prompts, the test-time complementary objective,
gradient-descent tuning, and multi-layer ensemble prediction.

Two learnable prompt families adapt a frozen encoder: per-class additive
centroid prompts beta (one C x d_l matrix per layer) and scalar layer
prompts eta (length L+1, layer 0 = the aligned input features). The tuning
loss is a convex combination of a complementary-label term over test nodes,
pushing down the probability of each node's least-similar class, and a
cross-entropy term over the (possibly augmented) few-shot set:

    total = gamma * L_te + (1 - gamma) * L_fs
    L_te  = -sum_l mean_i log(1 - p_l[i, comp_label_i])
    L_fs  = -sum_l mean_j log p_l[j, label_j]
    p_l   = softmax_c(eta_l * cos(h_i_l, centroid_l_c + beta_l_c) / tau)

Gradients w.r.t. beta and eta are analytic (chain rule through the softmax
and the cosine); node embeddings are constants. Updates are plain gradient
descent. Prediction sums eta-weighted cosines across all layers and takes
the argmax; the softmax is omitted because argmax is monotone-invariant.
"""

from dataclasses import dataclass

import numpy as np

from .centroids import COSINE_EPS, Centroids, cosine_matrix, softmax_rows
from .errors import DataError, NumericalError

LOG_CLAMP = 1e-12


@dataclass
class TuneConfig:
    tau: float = 1.0
    gamma: float = 0.5
    alpha: float = 1e-2
    steps: int = 200
    beta_init_std: float = 0.01
    patience: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.steps < 0 or self.patience < 0:
            raise ValueError("steps and patience must be >= 0")
        if self.beta_init_std < 0:
            raise ValueError("beta_init_std must be >= 0")


@dataclass
class PromptState:
    """beta: per-layer C x d_l matrices; eta: per-layer scalars (length L+1)."""

    beta: list
    eta: np.ndarray

    def copy(self):
        return PromptState([b.copy() for b in self.beta], self.eta.copy())


@dataclass
class TuningTask:
    """Few-shot nodes with labels and test nodes with complementary labels."""

    fs_nodes: np.ndarray
    fs_labels: np.ndarray
    test_nodes: np.ndarray
    comp_labels: np.ndarray


def init_prompts(cents, cfg):
    """Gaussian beta (std = cfg.beta_init_std), eta all ones."""
    rng = np.random.default_rng(cfg.seed)
    beta = [
        rng.normal(0.0, cfg.beta_init_std, size=e.shape) for e in cents.per_layer
    ]
    return PromptState(beta=beta, eta=np.ones(len(cents.per_layer)))


def prompted_centroids(cents, prompts):
    """Element-wise centroid + prompt per layer."""
    if len(cents.per_layer) != len(prompts.beta):
        raise ValueError("prompt/centroid layer count mismatch")
    out = []
    for e, b in zip(cents.per_layer, prompts.beta):
        if e.shape != b.shape:
            raise ValueError(f"prompt shape {b.shape} != centroid shape {e.shape}")
        out.append(e + b)
    return Centroids(out)


def class_prob(h, e_tilde_layer, eta_l, tau):
    """Softmax over classes of eta * cosine(h, centroid_c) / tau."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    sims = cosine_matrix(np.asarray(h, dtype=np.float64)[None, :], e_tilde_layer)
    return softmax_rows(eta_l * sims / tau)[0]


def _layer_probs(h_rows, e_tilde, eta_l, tau):
    return _layer_sims_probs(h_rows, e_tilde, eta_l, tau)[2]


def _layer_sims_probs(h_rows, e_tilde, eta_l, tau):
    with np.errstate(over="ignore", invalid="ignore"):
        hn = np.maximum(np.linalg.norm(h_rows, axis=1), COSINE_EPS)
        en = np.maximum(np.linalg.norm(e_tilde, axis=1), COSINE_EPS)
        s_raw = (h_rows @ e_tilde.T) / np.outer(hn, en)
    if not np.all(np.isfinite(s_raw)):
        raise NumericalError("non-finite cosine similarity (norm overflow?)")
    s = np.clip(s_raw, -1.0, 1.0)
    probs = softmax_rows(eta_l * s / tau)
    return s_raw, s, probs


def tgcl_loss(emb, task, cents, prompts, cfg):
    """(total, L_te, L_fs); log arguments are clamped below at 1e-12."""
    if task.test_nodes.size == 0 or task.fs_nodes.size == 0:
        raise ValueError("both the test set and the few-shot set must be non-empty")
    tilde = prompted_centroids(cents, prompts)
    l_te = 0.0
    l_fs = 0.0
    for l, (h, e) in enumerate(zip(emb.layers, tilde.per_layer)):
        p_te = _layer_probs(h[task.test_nodes], e, prompts.eta[l], cfg.tau)
        p_comp = p_te[np.arange(task.test_nodes.size), task.comp_labels]
        l_te -= np.mean(np.log(np.maximum(1.0 - p_comp, LOG_CLAMP)))
        p_fs = _layer_probs(h[task.fs_nodes], e, prompts.eta[l], cfg.tau)
        p_true = p_fs[np.arange(task.fs_nodes.size), task.fs_labels]
        l_fs -= np.mean(np.log(np.maximum(p_true, LOG_CLAMP)))
    total = cfg.gamma * l_te + (1.0 - cfg.gamma) * l_fs
    return float(total), float(l_te), float(l_fs)


def _cosine_backward(h_rows, e_tilde, s_raw, d_s):
    """d(sum of d_s * sim)/d(e_tilde) through the guarded, clamped cosine.

    d sim/d e = h/(|h| |e|) - sim * e/|e|^2 when |e| > eps (zero where the
    clip at +-1 is active); when |e| <= eps the denominator is the constant
    eps so only the first term survives.
    """
    hn = np.maximum(np.linalg.norm(h_rows, axis=1), COSINE_EPS)
    en_raw = np.linalg.norm(e_tilde, axis=1)
    en = np.maximum(en_raw, COSINE_EPS)
    w = d_s * (np.abs(s_raw) < 1.0)
    term1 = (w / np.outer(hn, en)).T @ h_rows
    coef = np.where(en_raw > COSINE_EPS, (w * s_raw).sum(axis=0) / en**2, 0.0)
    return term1 - coef[:, None] * e_tilde


def tgcl_grads(emb, task, cents, prompts, cfg):
    """Exact gradients of the total loss w.r.t. every beta entry and eta."""
    tilde = prompted_centroids(cents, prompts)
    n_te = task.test_nodes.size
    n_fs = task.fs_nodes.size
    d_beta = []
    d_eta = np.zeros_like(prompts.eta)
    for l, (h, e) in enumerate(zip(emb.layers, tilde.per_layer)):
        eta_l = prompts.eta[l]
        db = np.zeros_like(e)
        de = 0.0
        for nodes, labels, is_comp in (
            (task.test_nodes, task.comp_labels, True),
            (task.fs_nodes, task.fs_labels, False),
        ):
            rows = h[nodes]
            s_raw, s, p = _layer_sims_probs(rows, e, eta_l, cfg.tau)
            idx = np.arange(nodes.size)
            onehot = np.zeros_like(p)
            onehot[idx, labels] = 1.0
            if is_comp:
                p_y = p[idx, labels]
                live = (1.0 - p_y) > LOG_CLAMP  # clamped rows are flat
                scale = cfg.gamma / n_te
                g_z = (
                    scale
                    * np.where(live, p_y / np.maximum(1.0 - p_y, LOG_CLAMP), 0.0)[:, None]
                    * (onehot - p)
                )
            else:
                live = p[idx, labels] > LOG_CLAMP
                scale = (1.0 - cfg.gamma) / n_fs
                g_z = scale * live[:, None] * (p - onehot)
            de += (g_z * s).sum() / cfg.tau
            db += _cosine_backward(rows, e, s_raw, g_z * (eta_l / cfg.tau))
        d_beta.append(db)
        d_eta[l] = de
    return d_beta, d_eta


def predict(emb, cents, prompts, nodes):
    """Argmax over classes of the eta-weighted cosine sum across layers."""
    nodes = np.asarray(nodes, dtype=np.int64)
    tilde = prompted_centroids(cents, prompts)
    logits = np.zeros((nodes.size, tilde.num_classes))
    for l, (h, e) in enumerate(zip(emb.layers, tilde.per_layer)):
        logits += prompts.eta[l] * cosine_matrix(h[nodes], e)
    return np.argmax(logits, axis=1).astype(np.int64)


def tune(emb, task, cents, cfg, val_nodes, val_labels,
         freeze_beta=False, freeze_eta=False):
    """Plain gradient descent on the prompts, keeping the best-validation
    snapshot; stops early after cfg.patience steps without a strict
    improvement (patience <= 0 disables early stopping). Among snapshots
    tied on validation accuracy the most-tuned one is kept, so the loss
    keeps descending while the selection metric is flat.

    freeze_beta pins the centroid prompts at zero, freeze_eta pins the layer
    prompts at one (the toggles of the ablation lattice).
    """
    val_nodes = np.asarray(val_nodes, dtype=np.int64)
    prompts = init_prompts(cents, cfg)
    if freeze_beta:
        prompts = PromptState([np.zeros_like(b) for b in prompts.beta], prompts.eta)

    def val_acc(p):
        if val_nodes.size == 0:
            return 0.0
        return float(np.mean(predict(emb, cents, p, val_nodes) == val_labels))

    best = prompts.copy()
    best_acc = val_acc(prompts)
    stale = 0
    for _ in range(cfg.steps):
        d_beta, d_eta = tgcl_grads(emb, task, cents, prompts, cfg)
        if not freeze_beta:
            for b, db in zip(prompts.beta, d_beta):
                b -= cfg.alpha * db
        if not freeze_eta:
            prompts.eta -= cfg.alpha * d_eta
        acc = val_acc(prompts)
        if acc >= best_acc:
            best = prompts.copy()
        if acc > best_acc:
            best_acc = acc
            stale = 0
        else:
            stale += 1
            if cfg.patience > 0 and stale >= cfg.patience:
                break
    return best


def save_prompts(prompts, path):
    num_layers = len(prompts.beta) - 1
    classes = prompts.beta[0].shape[0]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"layers={num_layers}\n")
        fh.write(f"classes={classes}\n")
        for l, b in enumerate(prompts.beta):
            fh.write(f"beta{l}\n")
            for row in b:
                fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
        fh.write("eta\n")
        fh.write(" ".join(format(x, ".17g") for x in prompts.eta) + "\n")


def load_prompts(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    try:
        num_layers = int(lines[0].split("=", 1)[1])
        classes = int(lines[1].split("=", 1)[1])
    except (IndexError, ValueError):
        raise DataError(f"{path}: bad header")
    pos = 2
    beta = []
    for l in range(num_layers + 1):
        if pos >= len(lines) or lines[pos] != f"beta{l}":
            raise DataError(f"{path}: expected beta{l} marker")
        pos += 1
        rows = []
        for _ in range(classes):
            rows.append([float(x) for x in lines[pos].split()])
            pos += 1
        beta.append(np.asarray(rows, dtype=np.float64))
    if pos >= len(lines) or lines[pos] != "eta":
        raise DataError(f"{path}: expected eta marker")
    eta = np.asarray([float(x) for x in lines[pos + 1].split()], dtype=np.float64)
    if eta.shape != (num_layers + 1,):
        raise DataError(f"{path}: eta length mismatch")
    return PromptState(beta=beta, eta=eta)
