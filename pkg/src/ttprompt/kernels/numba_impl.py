"""Numba builds of the hot kernels. Import only when numba is available."""

import numpy as np
from numba import njit


@njit(cache=True)
def spmm(row_offsets, col_indices, values, dense):
    """CSR sparse (N x N) @ dense (N x d) -> (N x d)."""
    n = row_offsets.shape[0] - 1
    d = dense.shape[1]
    out = np.zeros((n, d))
    for i in range(n):
        for k in range(row_offsets[i], row_offsets[i + 1]):
            j = col_indices[k]
            v = values[k]
            for c in range(d):
                out[i, c] += v * dense[j, c]
    return out


@njit(cache=True)
def khop_mean(row_offsets, col_indices, mat, hops):
    """Mean of mat rows over each node's <=hops undirected neighbourhood.

    Stamp-based BFS per node; O(N * (N + E)) worst case, linear on sparse
    graphs with bounded neighbourhood growth.
    """
    n = row_offsets.shape[0] - 1
    d = mat.shape[1]
    out = np.zeros((n, d))
    stamp = np.full(n, -1, dtype=np.int64)
    dist = np.zeros(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for s in range(n):
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        stamp[s] = s
        dist[s] = 0
        cnt = 0
        while head < tail:
            u = queue[head]
            head += 1
            for c in range(d):
                out[s, c] += mat[u, c]
            cnt += 1
            if dist[u] < hops:
                for k in range(row_offsets[u], row_offsets[u + 1]):
                    v = col_indices[k]
                    if stamp[v] != s:
                        stamp[v] = s
                        dist[v] = dist[u] + 1
                        queue[tail] = v
                        tail += 1
        for c in range(d):
            out[s, c] /= cnt
    return out
