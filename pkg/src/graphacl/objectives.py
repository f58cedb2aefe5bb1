"""Contrastive, prediction and uniformity objectives with analytic gradients.

Every loss takes row-aligned representation matrices plus the graph and
returns a :class:`LossOutput` whose ``grads`` are dL/d(input) for the
inputs that receive gradient. Target representations ``U`` never do.

``negatives`` is either ``None`` (every node is a negative of every anchor)
or an ``(n, K)`` index array from :func:`sample_negatives`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from . import kernels
from .graph import Graph

VARIANTS = ("graphacl", "smoothing", "pre", "uni", "com")
_BLOCK = 1024


class DivergenceError(FloatingPointError):
    """A loss or gradient became non-finite."""

    def __init__(self, msg, epoch=None):
        super().__init__(msg)
        self.epoch = epoch


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.75
    neg_k: int = 0
    include_self_as_negative: bool = True
    variant: str = "graphacl"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if self.neg_k < 0:
            raise ValueError(f"negatives per anchor must be >= 0, got {self.neg_k}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant!r}")


@dataclass
class LossOutput:
    value: float
    grads: Dict[str, np.ndarray] = field(default_factory=dict)


def sample_negatives(num_nodes: int, k: int, anchors: int, seed: int, step: int = 0,
                     exclude_self: bool = False) -> np.ndarray:
    """Uniform draws with replacement, reproducible per ``(seed, step)``.

    With ``exclude_self`` anchor ``i`` never draws node ``i`` (anchors are
    taken to be nodes ``0..anchors-1``).
    """
    if k < 1 or num_nodes < 1:
        raise ValueError("need k >= 1 and num_nodes >= 1")
    rng = np.random.default_rng([seed, step])
    if not exclude_self:
        return rng.integers(0, num_nodes, size=(anchors, k), dtype=np.int64)
    if num_nodes < 2:
        raise ValueError("cannot exclude self with a single node")
    idx = rng.integers(0, num_nodes - 1, size=(anchors, k), dtype=np.int64)
    return idx + (idx >= np.arange(anchors)[:, None])


def _anchor_weights(g: Graph) -> np.ndarray:
    """1 / (|V'| * d_v) for non-isolated v, 0 otherwise."""
    deg = g.degrees
    active = deg > 0
    w = np.zeros(g.num_nodes)
    if active.any():
        w[active] = 1.0 / (active.sum() * deg[active])
    return w


def _check_finite(value, *arrays):
    if not np.isfinite(value) or any(not np.all(np.isfinite(a)) for a in arrays):
        raise DivergenceError("non-finite value in loss computation")


def _log_sum_exp(logits, axis=-1):
    m = np.max(logits, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis) + np.log(np.sum(np.exp(logits - m), axis=axis))


def negative_log_partition(v: np.ndarray, negatives: Optional[np.ndarray], tau: float,
                           include_self: bool = True) -> np.ndarray:
    """log sum_{w in negatives(v)} exp(v.w / tau) for every row v."""
    n = v.shape[0]
    if negatives is not None:
        return _log_sum_exp(kernels.gather_dots(v, v, negatives) / tau)
    out = np.empty(n)
    for s in range(0, n, _BLOCK):
        logits = v[s:s + _BLOCK] @ v.T / tau
        if not include_self:
            rows = np.arange(logits.shape[0])
            logits[rows, s + rows] = -np.inf
        out[s:s + _BLOCK] = _log_sum_exp(logits)
    return out


def _log_partition_backward(v, negatives, tau, log_z, upstream, include_self=True):
    """dL/dV given dL/d(log_z) = ``upstream`` (one scalar per row)."""
    if negatives is not None:
        probs = np.exp(kernels.gather_dots(v, v, negatives) / tau - log_z[:, None])
        return kernels.gather_backward(v, negatives, upstream[:, None] * probs / tau)
    n = v.shape[0]
    grad = np.zeros_like(v)
    for s in range(0, n, _BLOCK):
        logits = v[s:s + _BLOCK] @ v.T / tau
        if not include_self:
            rows = np.arange(logits.shape[0])
            logits[rows, s + rows] = -np.inf
        coef = np.exp(logits - log_z[s:s + _BLOCK, None]) * (upstream[s:s + _BLOCK, None] / tau)
        grad[s:s + _BLOCK] += coef @ v
        grad += coef.T @ v[s:s + _BLOCK]
    return grad


def _contrastive_core(p, u, v, g: Graph, negatives, tau, include_self=True):
    """Shared body of the asymmetric and smoothing losses.

    Returns the value and dL/dP, dL/dU, dL/dV.
    """
    n = g.num_nodes
    for name, m in (("P", p), ("U", u), ("V", v)):
        if m.shape[0] != n:
            raise ValueError(f"{name} has {m.shape[0]} rows, graph has {n} nodes")
    if tau <= 0:
        raise ValueError("temperature must be positive")
    ptr, cols = g.row_offsets, g.col_indices
    rows = g.row_ids()
    weights = _anchor_weights(g)

    pos = kernels.edge_dots(ptr, cols, p, u) / tau
    log_z = negative_log_partition(v, negatives, tau, include_self)
    z_e = log_z[rows]
    denom = np.logaddexp(pos, z_e)
    value = float(np.sum(weights[rows] * (denom - pos)))

    # d loss_e / d pos = -r, d loss_e / d log_z = r
    r = np.exp(z_e - denom)
    coef = weights[rows] * r
    d_p = kernels.spmm(ptr, cols, -coef / tau, u)
    d_u = kernels.spmm_t(ptr, cols, -coef / tau, p, n)
    upstream = np.bincount(rows, weights=coef, minlength=n)
    d_v = _log_partition_backward(v, negatives, tau, log_z, upstream, include_self)
    _check_finite(value, d_p, d_v)
    return value, d_p, d_u, d_v


def loss_graphacl(p, u, v, g: Graph, negatives=None, tau: float = 0.75,
                  include_self: bool = True) -> LossOutput:
    """Asymmetric contrastive loss.

    Positive logit ``p_v . u_u / tau`` for each neighbor ``u`` of ``v``;
    negatives contrast the online ``v`` against other online rows. ``U`` is
    treated as a constant.
    """
    value, d_p, _, d_v = _contrastive_core(p, u, v, g, negatives, tau, include_self)
    return LossOutput(value, {"P": d_p, "V": d_v})


def loss_smoothing(v_anchor, v_other, g: Graph, negatives=None, tau: float = 0.75,
                   include_self: bool = True) -> LossOutput:
    """Symmetric neighbor-smoothing contrastive loss (single shared encoder)."""
    value, d_p, d_u, d_v = _contrastive_core(v_anchor, v_other, v_anchor, g, negatives, tau, include_self)
    return LossOutput(value, {"anchor": d_p + d_v, "other": d_u})


def loss_pre(p, u, g: Graph) -> LossOutput:
    """Mean squared distance between each prediction and its neighbors' targets."""
    ptr, cols = g.row_offsets, g.col_indices
    rows = g.row_ids()
    weights = _anchor_weights(g)
    diff = p[rows] - u[cols]
    value = float(np.sum(weights[rows] * np.einsum("ij,ij->i", diff, diff)))
    d_p = 2.0 * (weights * g.degrees)[:, None] * p - 2.0 * kernels.spmm(ptr, cols, weights[rows], u)
    _check_finite(value, d_p)
    return LossOutput(value, {"P": d_p})


def loss_uni(v, negatives=None) -> LossOutput:
    """Negative mean pairwise squared distance.

    With sampled negatives the K-sample sum is rescaled by n/K so the value
    is an unbiased estimate of the full double sum.
    """
    n = v.shape[0]
    if negatives is None:
        total = v.sum(axis=0)
        sq = np.einsum("ij,ij->", v, v)
        value = -(2.0 * n * sq - 2.0 * total @ total) / n**2
        d_v = -(4.0 * n * v - 4.0 * total[None, :]) / n**2
    else:
        k = negatives.shape[1]
        diff = v[:, None, :] - v[negatives]
        value = -float(np.einsum("ijk,ijk->", diff, diff)) / (n * k)
        coef = -2.0 / (n * k)
        d_v = coef * diff.sum(axis=1)
        np.add.at(d_v, negatives.ravel(), -coef * diff.reshape(-1, v.shape[1]))
    value = float(value)
    _check_finite(value, d_v)
    return LossOutput(value, {"V": d_v})


def loss_com(p, u, v, g: Graph, negatives=None) -> LossOutput:
    """Prediction loss plus uniformity loss."""
    pre = loss_pre(p, u, g)
    uni = loss_uni(v, negatives)
    return LossOutput(pre.value + uni.value, {"P": pre.grads["P"], "V": uni.grads["V"]})
