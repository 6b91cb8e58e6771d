"""Frozen multi-layer GCN forward pass over symmetric-normalized adjacency.

Layer rule: H(0) = aligned features, H(l) = leaky(A_hat @ H(l-1) @ W(l) + b(l))
with A_hat = D~^{-1/2} (A + I) D~^{-1/2}. The leaky slope is a fixed constant,
not a trained parameter.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError, NumericalError

DEFAULT_SLOPE = 0.25


@dataclass
class NormalizedAdjacency:
    """CSR of D~^{-1/2} (A + I) D~^{-1/2}; every row holds its diagonal."""

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def matmul(self, dense):
        return kernels.spmm(
            self.row_offsets, self.col_indices, self.values, np.ascontiguousarray(dense)
        )

    def dense(self):
        out = np.zeros((self.num_nodes, self.num_nodes))
        src = np.repeat(np.arange(self.num_nodes), np.diff(self.row_offsets))
        out[src, self.col_indices] = self.values
        return out


def normalize_adjacency(g):
    """Self-loop augmented symmetric normalization of a Graph's adjacency."""
    n = g.num_nodes
    deg = np.diff(g.csr_row_offsets) + 1  # degree of A + I
    inv_sqrt = 1.0 / np.sqrt(deg.astype(np.float64))

    # splice the diagonal into each sorted CSR row; graphs never store
    # self-loops, so the merged (row, col) keys stay unique
    src = np.repeat(np.arange(n), np.diff(g.csr_row_offsets))
    all_src = np.concatenate([src, np.arange(n)])
    all_col = np.concatenate([g.csr_col_indices, np.arange(n)])
    order = np.lexsort((all_col, all_src))
    cols = all_col[order]
    vals = inv_sqrt[all_src[order]] * inv_sqrt[cols]
    offsets = np.zeros(n + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(deg)
    return NormalizedAdjacency(n, offsets, cols, vals)


@dataclass
class GcnParams:
    """Frozen per-layer weights/biases plus the fixed leaky slope."""

    weights: list
    biases: list
    activation_slope: float = DEFAULT_SLOPE

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise DataError("weights/biases length mismatch")
        for l, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            if w.shape[1] != b.shape[0]:
                raise DataError(f"layer {l}: bias length != weight columns")
            if l > 1 and self.weights[l - 2].shape[1] != w.shape[0]:
                raise DataError(f"layer {l}: input dim mismatch with layer {l-1}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericalError(f"non-finite parameter in layer {l}")

    @property
    def num_layers(self):
        return len(self.weights)

    @property
    def dims(self):
        """(d_0, d_1, ..., d_L)."""
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    def copy(self):
        return GcnParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation_slope,
        )


@dataclass
class LayerEmbeddings:
    """Per-layer node representations H(0)..H(L)."""

    layers: list = field(default_factory=list)

    @property
    def num_layers(self):
        return len(self.layers) - 1


def leaky(x, slope):
    return np.where(x >= 0.0, x, slope * x)


def encode(g, aligned, params):
    """Forward pass; returns H(0)..H(L). Inputs are never mutated."""
    if aligned.target_dim != params.dims[0]:
        raise DataError(
            f"aligned dim {aligned.target_dim} != encoder input dim {params.dims[0]}"
        )
    if aligned.matrix.shape[0] != g.num_nodes:
        raise DataError("aligned feature rows != num_nodes")
    a_hat = normalize_adjacency(g)
    h = aligned.matrix
    layers = [h.copy()]
    for l, (w, b) in enumerate(zip(params.weights, params.biases), start=1):
        with np.errstate(over="ignore", invalid="ignore"):
            h = leaky(a_hat.matmul(h) @ w + b, params.activation_slope)
        if not np.all(np.isfinite(h)):
            raise NumericalError(f"non-finite embedding at layer {l}")
        layers.append(h)
    return LayerEmbeddings(layers=layers)


def save_gcn_params(params, path):
    dims = params.dims
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"layers={params.num_layers}\n")
        fh.write("dims=" + ",".join(str(d) for d in dims) + "\n")
        fh.write(f"slope={format(params.activation_slope, '.17g')}\n")
        for l, (w, b) in enumerate(zip(params.weights, params.biases), start=1):
            fh.write(f"W{l}\n")
            for row in w:
                fh.write(" ".join(format(x, ".17g") for x in row) + "\n")
            fh.write(f"b{l}\n")
            fh.write(" ".join(format(x, ".17g") for x in b) + "\n")


def load_gcn_params(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    try:
        num_layers = int(lines[0].split("=", 1)[1])
        dims = [int(x) for x in lines[1].split("=", 1)[1].split(",")]
        slope = float(lines[2].split("=", 1)[1])
    except (IndexError, ValueError):
        raise DataError(f"{path}: bad header")
    if len(dims) != num_layers + 1:
        raise DataError(f"{path}: dims length != layers + 1")
    pos = 3
    weights, biases = [], []
    for l in range(1, num_layers + 1):
        if pos >= len(lines) or lines[pos] != f"W{l}":
            raise DataError(f"{path}: expected W{l} marker")
        pos += 1
        rows = []
        for _ in range(dims[l - 1]):
            rows.append([float(x) for x in lines[pos].split()])
            pos += 1
        w = np.asarray(rows, dtype=np.float64)
        if w.shape != (dims[l - 1], dims[l]):
            raise DataError(f"{path}: W{l} shape mismatch")
        if pos >= len(lines) or lines[pos] != f"b{l}":
            raise DataError(f"{path}: expected b{l} marker")
        pos += 1
        b = np.asarray([float(x) for x in lines[pos].split()], dtype=np.float64)
        pos += 1
        if b.shape != (dims[l],):
            raise DataError(f"{path}: b{l} length mismatch")
        weights.append(w)
        biases.append(b)
    return GcnParams(weights, biases, slope)
