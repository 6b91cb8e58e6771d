"""Graph container, dataset directory I/O, splits, and synthetic generators.

Graphs are undirected, stored as sorted CSR without self-loops. Directed edge
lists are symmetrized on construction. All randomness goes through numpy's
PCG64 (np.random.default_rng), so every seeded operation reproduces exactly.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError

META_FILE = "meta.txt"
EDGES_FILE = "edges.tsv"
FEATURES_FILE = "features.tsv"
LABELS_FILE = "labels.tsv"

SPLIT_ROLES = ("fs", "val", "test")


@dataclass(eq=False)
class Graph:
    """Undirected graph: CSR adjacency, dense features, integer labels.

    labels[i] is -1 for unlabeled nodes, otherwise in [0, num_classes).
    """

    num_nodes: int
    csr_row_offsets: np.ndarray
    csr_col_indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.csr_row_offsets = np.asarray(self.csr_row_offsets, dtype=np.int64)
        self.csr_col_indices = np.asarray(self.csr_col_indices, dtype=np.int64)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.validate()

    def validate(self):
        n = self.num_nodes
        off, col = self.csr_row_offsets, self.csr_col_indices
        if off.shape != (n + 1,) or off[0] != 0 or off[-1] != col.shape[0]:
            raise DataError("row offsets inconsistent with column indices")
        if np.any(np.diff(off) < 0):
            raise DataError("row offsets must be non-decreasing")
        if col.size and (col.min() < 0 or col.max() >= n):
            raise DataError("column index out of range")
        for i in range(n):
            row = col[off[i]:off[i + 1]]
            if row.size and np.any(np.diff(row) <= 0):
                raise DataError(f"row {i}: columns not strictly increasing")
            if np.any(row == i):
                raise DataError(f"row {i}: stored self-loop")
        if self.features.shape[0] != n:
            raise DataError("feature row count != num_nodes")
        if self.labels.shape != (n,):
            raise DataError("label count != num_nodes")
        bad = (self.labels < -1) | (self.labels >= self.num_classes)
        if np.any(bad):
            raise DataError("label out of range")
        if not self._symmetric():
            raise DataError("adjacency not symmetric")

    def _symmetric(self):
        off, col = self.csr_row_offsets, self.csr_col_indices
        src = np.repeat(np.arange(self.num_nodes), np.diff(off))
        fwd = src * self.num_nodes + col
        rev = col * self.num_nodes + src
        return np.array_equal(np.sort(fwd), np.sort(rev))

    @property
    def num_edges(self):
        """Directed entry count (2x the undirected edge count)."""
        return int(self.csr_col_indices.shape[0])

    @property
    def feature_dim(self):
        return int(self.features.shape[1])

    def neighbors(self, i):
        off = self.csr_row_offsets
        return self.csr_col_indices[off[i]:off[i + 1]]

    def undirected_edges(self):
        """(m, 2) array of edges with u < v, lexicographically sorted."""
        off, col = self.csr_row_offsets, self.csr_col_indices
        src = np.repeat(np.arange(self.num_nodes), np.diff(off))
        keep = src < col
        return np.stack([src[keep], col[keep]], axis=1)

    def has_edge(self, u, v):
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return k < row.size and row[k] == v

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.num_nodes == other.num_nodes
            and self.num_classes == other.num_classes
            and np.array_equal(self.csr_row_offsets, other.csr_row_offsets)
            and np.array_equal(self.csr_col_indices, other.csr_col_indices)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


def build_graph(num_nodes, edge_list, features, labels, num_classes):
    """Graph from a possibly directed/duplicated edge list.

    Symmetrizes, removes duplicates and self-loops, sorts into CSR.
    """
    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if edges.size:
        if edges.min() < 0 or edges.max() >= num_nodes:
            raise DataError("edge endpoint out of range")
        both = np.concatenate([edges, edges[:, ::-1]], axis=0)
        both = both[both[:, 0] != both[:, 1]]
        keys = both[:, 0] * num_nodes + both[:, 1]
        keys = np.unique(keys)
        src = keys // num_nodes
        col = keys % num_nodes
    else:
        src = np.empty(0, dtype=np.int64)
        col = np.empty(0, dtype=np.int64)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(offsets, src + 1, 1)
    offsets = np.cumsum(offsets)
    return Graph(num_nodes, offsets, col, features, labels, num_classes)


def _read_meta(path):
    want = ("num_nodes", "num_classes", "feature_dim")
    got = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}: bad meta line {line!r}")
            key, val = line.split("=", 1)
            try:
                got[key.strip()] = int(val)
            except ValueError:
                raise DataError(f"{path}: unparsable value in {line!r}")
    missing = [k for k in want if k not in got]
    if missing:
        raise DataError(f"{path}: missing meta keys {missing}")
    return got["num_nodes"], got["num_classes"], got["feature_dim"]


def load_graph(dir_path):
    """Load a dataset directory (meta.txt, edges.tsv, features.tsv, labels.tsv)."""
    for name in (META_FILE, EDGES_FILE, FEATURES_FILE, LABELS_FILE):
        if not os.path.isfile(os.path.join(dir_path, name)):
            raise DataError(f"missing {name} in {dir_path}")
    n, c, d = _read_meta(os.path.join(dir_path, META_FILE))

    edges = []
    with open(os.path.join(dir_path, EDGES_FILE), encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"edges.tsv line {ln}: expected src<TAB>dst")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DataError(f"edges.tsv line {ln}: unparsable node id")

    try:
        features = np.loadtxt(
            os.path.join(dir_path, FEATURES_FILE), dtype=np.float64, ndmin=2
        )
    except ValueError as exc:
        raise DataError(f"features.tsv: {exc}")
    if n > 0 and features.size == 0:
        raise DataError("features.tsv: empty")
    if features.shape != (n, d):
        raise DataError(
            f"features.tsv shape {features.shape} != meta ({n}, {d})"
        )

    try:
        labels = np.loadtxt(
            os.path.join(dir_path, LABELS_FILE), dtype=np.int64, ndmin=1
        )
    except ValueError as exc:
        raise DataError(f"labels.tsv: {exc}")
    if labels.shape != (n,):
        raise DataError(f"labels.tsv has {labels.shape[0]} lines, expected {n}")

    return build_graph(n, edges, features, labels, c)


def save_graph(g, dir_path):
    """Write a dataset directory; edges stored once with u < v."""
    os.makedirs(dir_path, exist_ok=True)
    with open(os.path.join(dir_path, META_FILE), "w", encoding="utf-8") as fh:
        fh.write(f"num_nodes={g.num_nodes}\n")
        fh.write(f"num_classes={g.num_classes}\n")
        fh.write(f"feature_dim={g.feature_dim}\n")
    with open(os.path.join(dir_path, EDGES_FILE), "w", encoding="utf-8") as fh:
        for u, v in g.undirected_edges():
            fh.write(f"{u}\t{v}\n")
    with open(os.path.join(dir_path, FEATURES_FILE), "w", encoding="utf-8") as fh:
        for row in g.features:
            fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
    with open(os.path.join(dir_path, LABELS_FILE), "w", encoding="utf-8") as fh:
        for y in g.labels:
            fh.write(f"{y}\n")


@dataclass
class FewShotSplit:
    """Few-shot / validation / test node partition of the labelled nodes."""

    shots_per_class: int
    fs_nodes: np.ndarray
    fs_labels: np.ndarray
    val_nodes: np.ndarray
    test_nodes: np.ndarray


def split_labels(labels, num_classes, m, seed):
    """m labelled items per class for few-shot, remainder split 1:9 val:test.

    val gets floor(remaining / 10) items. Deterministic per seed.
    """
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    fs_nodes = []
    fs_labels = []
    for c in range(num_classes):
        pool = np.flatnonzero(labels == c)
        if pool.size < m:
            raise DataError(
                f"class {c} has {pool.size} labelled nodes, need {m}"
            )
        pick = rng.choice(pool, size=m, replace=False)
        fs_nodes.append(pick)
        fs_labels.append(np.full(m, c, dtype=np.int64))
    fs_nodes = np.concatenate(fs_nodes)
    fs_labels = np.concatenate(fs_labels)

    labelled = np.flatnonzero(labels >= 0)
    remaining = np.setdiff1d(labelled, fs_nodes)
    if remaining.size < 10:
        raise DataError(
            f"only {remaining.size} labelled nodes left after few-shot, need >= 10"
        )
    perm = rng.permutation(remaining)
    n_val = remaining.size // 10
    return FewShotSplit(
        shots_per_class=m,
        fs_nodes=fs_nodes,
        fs_labels=fs_labels,
        val_nodes=np.sort(perm[:n_val]),
        test_nodes=np.sort(perm[n_val:]),
    )


def make_split(g, m, seed):
    """Few-shot/val/test split over a graph's labelled nodes."""
    return split_labels(g.labels, g.num_classes, m, seed)


def save_split(split, path):
    with open(path, "w", encoding="utf-8") as fh:
        for i in split.fs_nodes:
            fh.write(f"{i}\tfs\n")
        for i in split.val_nodes:
            fh.write(f"{i}\tval\n")
        for i in split.test_nodes:
            fh.write(f"{i}\ttest\n")


def load_split(path, g):
    """Read split.tsv (node_id<TAB>role); fs labels come from the graph."""
    buckets = {role: [] for role in SPLIT_ROLES}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in SPLIT_ROLES:
                raise DataError(f"{path} line {ln}: expected node_id<TAB>role")
            try:
                node = int(parts[0])
            except ValueError:
                raise DataError(f"{path} line {ln}: unparsable node id")
            if node < 0 or node >= g.num_nodes:
                raise DataError(f"{path} line {ln}: node id out of range")
            buckets[parts[1]].append(node)
    fs = np.asarray(buckets["fs"], dtype=np.int64)
    fs_labels = g.labels[fs] if fs.size else np.empty(0, dtype=np.int64)
    if fs.size and np.any(fs_labels < 0):
        raise DataError(f"{path}: few-shot node without label")
    counts = np.bincount(fs_labels, minlength=g.num_classes) if fs.size else []
    m = int(counts[0]) if len(counts) else 0
    if len(counts) and np.any(counts != m):
        raise DataError(f"{path}: unequal shots per class {list(counts)}")
    return FewShotSplit(
        shots_per_class=m,
        fs_nodes=fs,
        fs_labels=fs_labels,
        val_nodes=np.asarray(sorted(buckets["val"]), dtype=np.int64),
        test_nodes=np.asarray(sorted(buckets["test"]), dtype=np.int64),
    )


def generate_sbm(block_sizes, p_in, p_out, d_in, feature_shift, seed):
    """Stochastic block model with gaussian features and block-mean offsets.

    Block b's features are standard normal plus feature_shift on axis
    b % d_in. Labels are block ids.
    """
    if not block_sizes:
        raise DataError("block_sizes must be non-empty")
    for p in (p_in, p_out):
        if not 0.0 <= p <= 1.0:
            raise DataError(f"edge probability {p} outside [0, 1]")
    sizes = [int(s) for s in block_sizes]
    n = int(np.sum(sizes))
    starts = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)

    src_parts = []
    dst_parts = []
    nb = len(sizes)
    for a in range(nb):
        for b in range(a, nb):
            if a == b:
                iu, ju = np.triu_indices(sizes[a], k=1)
                iu = iu + starts[a]
                ju = ju + starts[a]
                p = p_in
            else:
                iu, ju = np.meshgrid(
                    np.arange(sizes[a]) + starts[a],
                    np.arange(sizes[b]) + starts[b],
                    indexing="ij",
                )
                iu = iu.ravel()
                ju = ju.ravel()
                p = p_out
            mask = rng.random(iu.shape[0]) < p
            src_parts.append(iu[mask])
            dst_parts.append(ju[mask])
    src = np.concatenate(src_parts) if src_parts else np.empty(0, np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, np.int64)
    edges = np.stack([src, dst], axis=1) if src.size else np.empty((0, 2), np.int64)

    features = rng.standard_normal((n, int(d_in)))
    labels = np.empty(n, dtype=np.int64)
    for b in range(nb):
        sl = slice(starts[b], starts[b + 1])
        features[sl, b % int(d_in)] += feature_shift
        labels[sl] = b
    return build_graph(n, edges, features, labels, nb)


def perturb_graph(g, edge_drop_rate, feature_shuffle_rate, protected, seed):
    """Drop edges and shuffle feature rows touching non-protected nodes.

    Each undirected edge with at least one non-protected endpoint is dropped
    with prob edge_drop_rate. A round(rate * count) subset of non-protected
    nodes has its feature rows permuted uniformly (identity allowed).
    """
    for r in (edge_drop_rate, feature_shuffle_rate):
        if not 0.0 <= r <= 1.0:
            raise DataError(f"perturbation rate {r} outside [0, 1]")
    rng = np.random.default_rng(seed)
    prot = np.zeros(g.num_nodes, dtype=bool)
    prot[np.asarray(sorted(protected), dtype=np.int64)] = True

    edges = g.undirected_edges()
    if edges.shape[0]:
        eligible = ~(prot[edges[:, 0]] & prot[edges[:, 1]])
        draws = rng.random(edges.shape[0])
        keep = ~(eligible & (draws < edge_drop_rate))
        edges = edges[keep]

    features = g.features.copy()
    unprot = np.flatnonzero(~prot)
    k = int(round(feature_shuffle_rate * unprot.size))
    if k > 1:
        chosen = rng.choice(unprot, size=k, replace=False)
        perm = rng.permutation(k)
        features[chosen] = g.features[chosen[perm]]

    return build_graph(
        g.num_nodes, edges, features, g.labels.copy(), g.num_classes
    )
