"""Pure-numpy implementations of the hot loops.

Same signatures and the same results (to rounding) as the numba kernels.
Scatter-adds go through ``np.add.at`` so that accumulation order is fixed.
"""
import numpy as np


def _row_ids(indptr):
    return np.repeat(np.arange(indptr.shape[0] - 1), np.diff(indptr))


def spmm(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    out = np.zeros((n, x.shape[1]))
    if indices.shape[0] == 0:
        return out
    contrib = data[:, None] * x[indices]
    nonempty = np.flatnonzero(np.diff(indptr))
    out[nonempty] = np.add.reduceat(contrib, indptr[nonempty], axis=0)
    return out


def spmm_t(indptr, indices, data, x, n_cols):
    out = np.zeros((n_cols, x.shape[1]))
    rows = _row_ids(indptr)
    np.add.at(out, indices, data[:, None] * x[rows])
    return out


def edge_dots(indptr, indices, a, b):
    rows = _row_ids(indptr)
    return np.einsum("ij,ij->i", a[rows], b[indices])


def gather_dots(a, b, idx):
    return np.einsum("vd,vkd->vk", a, b[idx])


def gather_backward(x, idx, coef):
    own = np.einsum("vk,vkd->vd", coef, x[idx])
    other = np.zeros_like(x)
    src = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
    np.add.at(other, idx.ravel(), coef.ravel()[:, None] * x[src])
    return own + other


def two_hop(indptr, indices, chunk=4096):
    n = indptr.shape[0] - 1
    deg = np.diff(indptr)
    pieces = []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        lo, hi = indptr[start], indptr[stop]
        mids = indices[lo:hi]
        src = np.repeat(np.arange(start, stop), deg[start:stop])
        # expand every (i, j) edge into (i, k) for k in N(j)
        reps = deg[mids]
        i_rep = np.repeat(src, reps)
        if reps.sum() == 0:
            continue
        offs = np.repeat(indptr[mids] - np.cumsum(reps) + reps, reps)
        k = indices[offs + np.arange(reps.sum())]
        keep = i_rep != k
        pieces.append(np.unique(i_rep[keep] * n + k[keep]))
    codes = np.concatenate(pieces) if pieces else np.empty(0, dtype=np.int64)
    rows = codes // n
    out_idx = (codes % n).astype(np.int64)
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=out_ptr[1:])
    return out_ptr, out_idx
