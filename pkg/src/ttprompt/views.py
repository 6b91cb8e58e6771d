"""Embedding views unifying node and graph classification as subgraph tasks.

Node tasks can swap raw per-node rows for the mean over each node's <=hops
neighbourhood; graph tasks collapse each graph to the mean of its node rows.
The resulting view exposes .layers like LayerEmbeddings, so the centroid and
prompt machinery runs on it unchanged.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError

MODES = ("raw-node", "subgraph-mean", "graph-mean")


@dataclass
class EmbeddingView:
    mode: str
    hops: int
    layers: list

    @property
    def num_layers(self):
        return len(self.layers) - 1


def raw_view(emb):
    return EmbeddingView("raw-node", 0, [h.copy() for h in emb.layers])


def subgraph_view(g, emb, hops):
    """Per-node mean of each layer over the node's <=hops neighbourhood."""
    if hops < 0:
        raise ValueError("hops must be >= 0")
    if hops == 0:
        return EmbeddingView("subgraph-mean", 0, [h.copy() for h in emb.layers])
    layers = [
        kernels.khop_mean(
            g.csr_row_offsets,
            g.csr_col_indices,
            np.ascontiguousarray(h),
            hops,
        )
        for h in emb.layers
    ]
    return EmbeddingView("subgraph-mean", int(hops), layers)


def graph_view(graphs, embs):
    """One row per graph per layer: the mean of that graph's node rows."""
    if len(graphs) != len(embs):
        raise ValueError("graphs and embeddings lists differ in length")
    if not graphs:
        raise DataError("graph view needs at least one graph")
    num_layers = len(embs[0].layers)
    layers = []
    for l in range(num_layers):
        rows = []
        for g, e in zip(graphs, embs):
            if g.num_nodes == 0:
                raise DataError("cannot average an empty graph")
            rows.append(e.layers[l].mean(axis=0))
        layers.append(np.stack(rows, axis=0))
    return EmbeddingView("graph-mean", 0, layers)


def load_graph_collection(dir_path):
    """Graph-classification dataset: graphs.tsv index + per-graph subdirs.

    Layout: meta.txt (num_graphs, num_classes, feature_dim), graphs.tsv with
    graph_id<TAB>node_count<TAB>label lines, and g<id>/ holding edges.tsv and
    features.tsv per graph. Returns (graphs, labels, num_classes); node
    labels inside each graph are unset (-1).
    """
    import os

    from .graph import build_graph

    meta_path = os.path.join(dir_path, "meta.txt")
    index_path = os.path.join(dir_path, "graphs.tsv")
    for p in (meta_path, index_path):
        if not os.path.isfile(p):
            raise DataError(f"missing {os.path.basename(p)} in {dir_path}")
    meta = {}
    with open(meta_path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                key, _, val = line.partition("=")
                meta[key.strip()] = int(val)
    for key in ("num_graphs", "num_classes", "feature_dim"):
        if key not in meta:
            raise DataError(f"{meta_path}: missing {key}")

    graphs = []
    labels = []
    with open(index_path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(
                    f"graphs.tsv line {ln}: expected graph_id<TAB>node_count<TAB>label"
                )
            gid, n_nodes, label = (int(x) for x in parts)
            sub = os.path.join(dir_path, f"g{gid}")
            edges = []
            with open(os.path.join(sub, "edges.tsv"), encoding="utf-8") as efh:
                for eline in efh:
                    eline = eline.strip()
                    if eline:
                        u, v = eline.split("\t")
                        edges.append((int(u), int(v)))
            feats = np.loadtxt(
                os.path.join(sub, "features.tsv"), dtype=np.float64, ndmin=2
            )
            if feats.shape != (n_nodes, meta["feature_dim"]):
                raise DataError(f"graph {gid}: feature shape mismatch")
            node_labels = np.full(n_nodes, -1, dtype=np.int64)
            graphs.append(
                build_graph(n_nodes, edges, feats, node_labels, meta["num_classes"])
            )
            labels.append(label)
    if len(graphs) != meta["num_graphs"]:
        raise DataError(
            f"graphs.tsv lists {len(graphs)} graphs, meta says {meta['num_graphs']}"
        )
    labels = np.asarray(labels, dtype=np.int64)
    if np.any((labels < 0) | (labels >= meta["num_classes"])):
        raise DataError("graph label out of range")
    return graphs, labels, meta["num_classes"]
