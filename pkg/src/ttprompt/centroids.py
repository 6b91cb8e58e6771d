"""Class centroids, layer-wise entropy scoring, augmentation, complementary labels.

Per layer l, class probabilities for a node are the softmax over classes of
cosine similarities to the class centroids (no temperature at this stage).
The pivot layer minimizes mean prediction entropy over test nodes; it drives
both the entropy-based augmentation of the few-shot set and the
complementary labels (least similar class) used for test-time learning.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError

COSINE_EPS = 1e-12


def cosine_sim(a, b):
    """Cosine similarity with an epsilon norm guard, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"vector length mismatch: {a.shape} vs {b.shape}")
    denom = max(np.linalg.norm(a), COSINE_EPS) * max(np.linalg.norm(b), COSINE_EPS)
    return float(np.clip(a @ b / denom, -1.0, 1.0))


def cosine_matrix(h, e):
    """Pairwise cosine of rows of h (n x d) against rows of e (C x d)."""
    with np.errstate(over="ignore", invalid="ignore"):
        hn = np.maximum(np.linalg.norm(h, axis=1), COSINE_EPS)
        en = np.maximum(np.linalg.norm(e, axis=1), COSINE_EPS)
        sims = (h @ e.T) / np.outer(hn, en)
    if not np.all(np.isfinite(sims)):
        raise NumericalError("non-finite cosine similarity (norm overflow?)")
    return np.clip(sims, -1.0, 1.0)


def softmax_rows(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def entropy_rows(probs):
    """Shannon entropy per row with 0 log 0 := 0."""
    plogp = np.where(probs > 0.0, probs * np.log(np.maximum(probs, 1e-300)), 0.0)
    return -plogp.sum(axis=1)


@dataclass
class Centroids:
    """Per-layer C x d_l class centroid matrices."""

    per_layer: list

    @property
    def num_classes(self):
        return self.per_layer[0].shape[0]

    @property
    def num_layers(self):
        return len(self.per_layer) - 1

    def copy(self):
        return Centroids([e.copy() for e in self.per_layer])


def init_centroids(emb, split):
    """Per-class, per-layer mean embedding of the few-shot nodes."""
    if split.fs_nodes.size == 0:
        raise DataError("few-shot set is empty")
    classes = int(split.fs_labels.max()) + 1
    per_layer = []
    for h in emb.layers:
        e = np.empty((classes, h.shape[1]))
        for c in range(classes):
            members = split.fs_nodes[split.fs_labels == c]
            if members.size == 0:
                raise DataError(f"class {c} has no few-shot nodes")
            e[c] = h[members].mean(axis=0)
        per_layer.append(e)
    return Centroids(per_layer)


@dataclass
class EntropyReport:
    """Per-layer probabilities/entropies over test nodes plus the pivot layer."""

    test_nodes: np.ndarray
    probs: list           # per layer, (n_test x C)
    entropy: np.ndarray   # (L+1, n_test)
    mean_entropy: np.ndarray
    pivot_layer: int
    layerwise_preds: np.ndarray  # argmax at the pivot layer


def entropy_report(emb, cents, test_nodes):
    test_nodes = np.asarray(test_nodes, dtype=np.int64)
    if test_nodes.size == 0:
        raise DataError("entropy report needs a non-empty test set")
    probs = []
    entropy = np.empty((len(emb.layers), test_nodes.size))
    for l, (h, e) in enumerate(zip(emb.layers, cents.per_layer)):
        p = softmax_rows(cosine_matrix(h[test_nodes], e))
        probs.append(p)
        entropy[l] = entropy_rows(p)
    mean_entropy = entropy.mean(axis=1)
    pivot = int(np.argmin(mean_entropy))  # ties resolve to the lowest layer
    preds = np.argmax(probs[pivot], axis=1).astype(np.int64)
    return EntropyReport(
        test_nodes=test_nodes,
        probs=probs,
        entropy=entropy,
        mean_entropy=mean_entropy,
        pivot_layer=pivot,
        layerwise_preds=preds,
    )


@dataclass
class AugmentedSplit:
    """Few-shot set enriched with low-entropy pseudo-labelled test nodes."""

    aug_nodes: np.ndarray
    aug_labels: np.ndarray
    combined_nodes: np.ndarray
    combined_labels: np.ndarray
    n_aug: int


def augment(report, split, n_aug):
    """Per class, the n_aug lowest-entropy test nodes predicted as that class.

    Ties break by (entropy ascending, node id ascending).
    """
    if n_aug < 0:
        raise ValueError("n_aug must be >= 0")
    ent = report.entropy[report.pivot_layer]
    picked_nodes = []
    picked_labels = []
    classes = report.probs[0].shape[1]
    if n_aug > 0:
        for c in range(classes):
            mask = report.layerwise_preds == c
            if not np.any(mask):
                continue
            cand_nodes = report.test_nodes[mask]
            cand_ent = ent[mask]
            order = np.lexsort((cand_nodes, cand_ent))[:n_aug]
            picked_nodes.append(cand_nodes[order])
            picked_labels.append(np.full(order.size, c, dtype=np.int64))
    aug_nodes = (
        np.concatenate(picked_nodes) if picked_nodes else np.empty(0, np.int64)
    )
    aug_labels = (
        np.concatenate(picked_labels) if picked_labels else np.empty(0, np.int64)
    )
    return AugmentedSplit(
        aug_nodes=aug_nodes,
        aug_labels=aug_labels,
        combined_nodes=np.concatenate([split.fs_nodes, aug_nodes]),
        combined_labels=np.concatenate([split.fs_labels, aug_labels]),
        n_aug=int(n_aug),
    )


def complementary_labels(emb, cents, pivot, test_nodes):
    """Least similar class per test node at the pivot layer (ties: lowest).

    Computed once against the initial centroids and kept fixed afterwards.
    """
    if not 0 <= pivot < len(emb.layers):
        raise ValueError(f"pivot layer {pivot} out of range")
    test_nodes = np.asarray(test_nodes, dtype=np.int64)
    sims = cosine_matrix(emb.layers[pivot][test_nodes], cents.per_layer[pivot])
    return np.argmin(sims, axis=1).astype(np.int64)
