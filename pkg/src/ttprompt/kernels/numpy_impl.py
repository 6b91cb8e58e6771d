"""Pure-numpy fallback kernels. Same contracts as numba_impl."""

import numpy as np


def spmm(row_offsets, col_indices, values, dense):
    """CSR sparse (N x N) @ dense (N x d) -> (N x d).

    reduceat needs a sentinel row so that trailing empty CSR rows keep the
    segment indices in range; empty rows are zeroed afterwards.
    """
    n = row_offsets.shape[0] - 1
    d = dense.shape[1]
    if col_indices.shape[0] == 0:
        return np.zeros((n, d))
    contrib = values[:, None] * dense[col_indices]
    contrib = np.vstack([contrib, np.zeros((1, d))])
    out = np.add.reduceat(contrib, row_offsets[:-1], axis=0)
    out[np.diff(row_offsets) == 0] = 0.0
    return out


def khop_mean(row_offsets, col_indices, mat, hops):
    """Mean of mat rows over each node's <=hops undirected neighbourhood.

    Fallback expands reachability with dense boolean products, O(N^2) memory;
    fine at test scale, the numba path is the one meant for large graphs.
    """
    n = row_offsets.shape[0] - 1
    if hops == 0:
        return mat.copy()
    adj = np.zeros((n, n), dtype=bool)
    src = np.repeat(np.arange(n), np.diff(row_offsets))
    adj[src, col_indices] = True
    reach = np.eye(n, dtype=bool)
    for _ in range(hops):
        grown = (reach.astype(np.float64) @ adj.astype(np.float64)) > 0
        new_reach = reach | grown
        if np.array_equal(new_reach, reach):
            break
        reach = new_reach
    counts = reach.sum(axis=1).astype(np.float64)
    return (reach.astype(np.float64) @ mat) / counts[:, None]
