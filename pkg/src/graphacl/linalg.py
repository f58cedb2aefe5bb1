"""Dense/sparse kernels with hand-written backward passes.

Dense matrices are plain C-contiguous float64 ``np.ndarray`` objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .graph import SparseMatrix

NORM_EPS = 1e-12


@dataclass
class ParamTensor:
    value: np.ndarray
    grad: np.ndarray = field(default=None)

    def __post_init__(self):
        self.value = np.ascontiguousarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad.fill(0.0)

    def copy(self) -> "ParamTensor":
        return ParamTensor(self.value.copy())


def _as_dense(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)


def spmm(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """``a @ x`` with ascending-column accumulation per row."""
    x = _as_dense(x)
    if a.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: sparse {a.shape} @ dense {x.shape}")
    return kernels.spmm(a.row_offsets, a.col_indices, a.values, x)


def spmm_t(a: SparseMatrix, x: np.ndarray) -> np.ndarray:
    """``a.T @ x`` without materializing the transpose."""
    x = _as_dense(x)
    if a.shape[0] != x.shape[0]:
        raise ValueError(f"shape mismatch: sparse.T {a.shape[::-1]} @ dense {x.shape}")
    return kernels.spmm_t(a.row_offsets, a.col_indices, a.values, x, a.shape[1])


def matmul(x, w: np.ndarray) -> np.ndarray:
    """``x @ w`` where ``x`` may be dense or a (sparse) feature matrix."""
    if isinstance(x, SparseMatrix):
        return spmm(x, w)
    return x @ w


def matmul_t(x, g: np.ndarray) -> np.ndarray:
    """``x.T @ g`` for dense or sparse ``x``."""
    if isinstance(x, SparseMatrix):
        return spmm_t(x, g)
    return x.T @ g


def l2_normalize_rows(x: np.ndarray):
    """Return ``(y, norms)`` with ``y = x / max(||x||, eps)`` row-wise.

    ``norms`` holds the clamped norms and is what the backward needs.
    """
    x = _as_dense(x)
    norms = np.maximum(np.sqrt(np.einsum("ij,ij->i", x, x)), NORM_EPS)
    return x / norms[:, None], norms


def l2_normalize_rows_backward(y: np.ndarray, norms: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Apply ``(I - y y^T) / ||x||`` to each upstream row."""
    proj = np.einsum("ij,ij->i", y, grad)
    return (grad - y * proj[:, None]) / norms[:, None]


def affine(x, w: ParamTensor, b: ParamTensor) -> np.ndarray:
    if b.shape[0] != 1 or w.shape[1] != b.shape[1]:
        raise ValueError(f"bias shape {b.shape} incompatible with weight {w.shape}")
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"shape mismatch: {x.shape} @ {w.shape}")
    return matmul(x, w.value) + b.value


def affine_backward(x, w: ParamTensor, b: ParamTensor, grad: np.ndarray, need_input_grad=True):
    """Accumulate into ``w.grad``/``b.grad``; return dL/dx (or None)."""
    w.grad += matmul_t(x, grad)
    b.grad += grad.sum(axis=0, keepdims=True)
    if need_input_grad:
        return grad @ w.value.T
    return None


def elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    return grad * np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def finite_diff_check(
    loss_fn: Callable[[], float],
    params: Sequence[ParamTensor],
    h: float = 1e-6,
    coords_per_tensor: int = 64,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn()`` must zero and then fill ``.grad`` of every tensor in
    ``params`` and return the loss. Up to ``coords_per_tensor`` coordinates
    per tensor are checked (all of them when the tensor is smaller).
    """
    if not 1e-7 <= h <= 1e-4:
        raise ValueError(f"step h={h} outside [1e-7, 1e-4]")
    base = loss_fn()
    if not np.isfinite(base):
        raise FloatingPointError("non-finite loss at the unperturbed point")
    analytic = [p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, g in zip(params, analytic):
        flat = p.value.reshape(-1)
        size = flat.shape[0]
        coords = np.arange(size) if size <= coords_per_tensor else rng.choice(size, coords_per_tensor, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            up = loss_fn()
            flat[c] = orig - h
            down = loss_fn()
            flat[c] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError("non-finite loss during finite differences")
            numeric = (up - down) / (2 * h)
            a = g.reshape(-1)[c]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    loss_fn()  # leave grads consistent with the unperturbed point
    return float(worst)
