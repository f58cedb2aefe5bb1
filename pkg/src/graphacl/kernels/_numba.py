"""Numba-compiled hot loops.

Every kernel walks its data in a fixed order (ascending row, then ascending
stored position), so results are bitwise reproducible run to run.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def spmm(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    d = x.shape[1]
    out = np.zeros((n, d))
    for r in range(n):
        for e in range(indptr[r], indptr[r + 1]):
            c = indices[e]
            w = data[e]
            for k in range(d):
                out[r, k] += w * x[c, k]
    return out


@njit(cache=True)
def spmm_t(indptr, indices, data, x, n_cols):
    n = indptr.shape[0] - 1
    d = x.shape[1]
    out = np.zeros((n_cols, d))
    for r in range(n):
        for e in range(indptr[r], indptr[r + 1]):
            c = indices[e]
            w = data[e]
            for k in range(d):
                out[c, k] += w * x[r, k]
    return out


@njit(cache=True)
def edge_dots(indptr, indices, a, b):
    n = indptr.shape[0] - 1
    d = a.shape[1]
    out = np.empty(indices.shape[0])
    for r in range(n):
        for e in range(indptr[r], indptr[r + 1]):
            c = indices[e]
            s = 0.0
            for k in range(d):
                s += a[r, k] * b[c, k]
            out[e] = s
    return out


@njit(cache=True)
def gather_dots(a, b, idx):
    n, m = idx.shape
    d = a.shape[1]
    out = np.empty((n, m))
    for v in range(n):
        for j in range(m):
            c = idx[v, j]
            s = 0.0
            for k in range(d):
                s += a[v, k] * b[c, k]
            out[v, j] = s
    return out


@njit(cache=True)
def gather_backward(x, idx, coef):
    # d/dx of sum_vj coef[v, j] * <x[v], x[idx[v, j]]>
    n, m = idx.shape
    d = x.shape[1]
    own = np.zeros((n, d))
    other = np.zeros((n, d))
    for v in range(n):
        for j in range(m):
            c = idx[v, j]
            w = coef[v, j]
            for k in range(d):
                own[v, k] += w * x[c, k]
                other[c, k] += w * x[v, k]
    return own + other


@njit(cache=True)
def two_hop(indptr, indices):
    n = indptr.shape[0] - 1
    mark = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        mark[i] = i
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            for f in range(indptr[j], indptr[j + 1]):
                k = indices[f]
                if mark[k] != i:
                    mark[k] = i
                    counts[i + 1] += 1
    out_ptr = np.cumsum(counts)
    out_idx = np.empty(out_ptr[n], dtype=np.int64)
    mark[:] = -1
    for i in range(n):
        mark[i] = i
        pos = out_ptr[i]
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            for f in range(indptr[j], indptr[j + 1]):
                k = indices[f]
                if mark[k] != i:
                    mark[k] = i
                    out_idx[pos] = k
                    pos += 1
        out_idx[out_ptr[i]:pos] = np.sort(out_idx[out_ptr[i]:pos])
    return out_ptr, out_idx
