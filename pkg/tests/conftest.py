import os

# acceptance runs single-threaded; must be set before numpy loads BLAS
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import numpy as np
import pytest

from ttprompt.centroids import Centroids
from ttprompt.encoder import LayerEmbeddings
from ttprompt.prompts import TuningTask


def max_rel_err(loss_fn, arr, grad, step=1e-6, floor=1e-4):
    """Worst relative error of grad vs central differences of loss_fn.

    loss_fn re-reads arr, which is perturbed in place entry by entry.
    Central differences of an O(1) loss at step 1e-6 carry ~1e-10 absolute
    noise, so entries below `floor` are measured against the floor instead:
    rel = |a - fd| / max(|a|, |fd|, floor). At floor 1e-4 a 1e-5 relative
    verdict still certifies |a - fd| <= 1e-9 for near-zero entries.
    """
    worst = 0.0
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + step
        up = loss_fn()
        arr[idx] = orig - step
        dn = loss_fn()
        arr[idx] = orig
        fd = (up - dn) / (2.0 * step)
        a = grad[idx]
        worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), floor))
    return worst


def random_embedding_instance(rng, n_nodes, classes, num_layers, dim,
                              n_test=None, n_fs=None):
    """Random embeddings + centroids + task, the shared prompt-test fixture."""
    layers = [rng.standard_normal((n_nodes, dim)) for _ in range(num_layers + 1)]
    emb = LayerEmbeddings(layers=layers)
    cents = Centroids(
        [rng.standard_normal((classes, dim)) for _ in range(num_layers + 1)]
    )
    n_test = n_test if n_test is not None else max(2, n_nodes // 2)
    n_fs = n_fs if n_fs is not None else max(1, n_nodes // 5)
    n_test = min(n_test, n_nodes - 1)
    n_fs = min(n_fs, n_nodes - n_test)
    nodes = rng.permutation(n_nodes)
    task = TuningTask(
        fs_nodes=nodes[n_test:n_test + n_fs],
        fs_labels=rng.integers(0, classes, n_fs),
        test_nodes=nodes[:n_test],
        comp_labels=rng.integers(0, classes, n_test),
    )
    return emb, cents, task


def write_collection(root, graphs, labels, feature_dim):
    """Write a graph-classification dataset directory (graphs.tsv layout)."""
    root.mkdir(parents=True, exist_ok=True)
    (root / "meta.txt").write_text(
        f"num_graphs={len(graphs)}\nnum_classes={int(max(labels)) + 1}\n"
        f"feature_dim={feature_dim}\n"
    )
    lines = []
    for i, (g, y) in enumerate(zip(graphs, labels)):
        lines.append(f"{i}\t{g.num_nodes}\t{y}")
        sub = root / f"g{i}"
        sub.mkdir()
        with open(sub / "edges.tsv", "w") as fh:
            for u, v in g.undirected_edges():
                fh.write(f"{u}\t{v}\n")
        with open(sub / "features.tsv", "w") as fh:
            for row in g.features:
                fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
    (root / "graphs.tsv").write_text("\n".join(lines) + "\n")
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(0)
