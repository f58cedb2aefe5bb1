"""Numerical checks of the loss bounds and the two-hop alignment claims."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .encoder import PredictorParams
from .graph import Graph, two_hop_graph
from .objectives import _anchor_weights, loss_graphacl, negative_log_partition, sample_negatives

SLACK = 1e-9


@dataclass
class TheoryReport:
    loss_value: Optional[float] = None
    bound_a1: Optional[float] = None
    bound_jensen: Optional[float] = None
    two_hop_alignment: Optional[float] = None
    bilipschitz_L: Optional[float] = None
    error_bound_terms: dict = field(default_factory=dict)
    trials: int = 0
    violations: List[str] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _mean_negative_logit(v, negatives, tau, include_self=True):
    if negatives is not None:
        return kernels.gather_dots(v, v, negatives).mean(axis=1) / tau
    n = v.shape[0]
    total = v @ v.sum(axis=0)
    if include_self:
        return total / (n * tau)
    return (total - np.einsum("ij,ij->i", v, v)) / ((n - 1) * tau)


def _num_negatives(n, negatives, include_self=True):
    if negatives is not None:
        return negatives.shape[1]
    return n if include_self else n - 1


def logsum_bound(p, u, v, g: Graph, negatives=None, tau: float = 0.75, include_self=True) -> float:
    """The loss with the positive term dropped from each log-denominator."""
    rows = g.row_ids()
    w = _anchor_weights(g)
    pos = kernels.edge_dots(g.row_offsets, g.col_indices, p, u) / tau
    log_z = negative_log_partition(v, negatives, tau, include_self)
    return float(np.sum(w[rows] * (log_z[rows] - pos)))


def jensen_bound(p, u, v, g: Graph, negatives=None, tau: float = 0.75, include_self=True) -> float:
    """``logsum_bound`` with log-mean-exp replaced by the mean logit."""
    rows = g.row_ids()
    w = _anchor_weights(g)
    pos = kernels.edge_dots(g.row_offsets, g.col_indices, p, u) / tau
    k = _num_negatives(v.shape[0], negatives, include_self)
    lower = np.log(k) + _mean_negative_logit(v, negatives, tau, include_self)
    return float(np.sum(w[rows] * (lower[rows] - pos)))


def check_logsum_bound(p, u, v, g: Graph, negatives=None, tau: float = 0.75, include_self=True):
    """Return ``(loss, bound, passed)``; passes iff loss >= bound - 1e-9."""
    loss = loss_graphacl(p, u, v, g, negatives, tau, include_self).value
    bound = logsum_bound(p, u, v, g, negatives, tau, include_self)
    return loss, bound, bool(loss >= bound - SLACK)


def check_jensen_bound(v, negatives=None, tau: float = 0.75, include_self=True):
    """Per-anchor check of log(mean exp x) >= mean x over negative logits.

    Returns ``(lhs, rhs, passed)`` with per-row arrays.
    """
    n = v.shape[0]
    k = _num_negatives(n, negatives, include_self)
    lhs = negative_log_partition(v, negatives, tau, include_self) - np.log(k)
    rhs = _mean_negative_logit(v, negatives, tau, include_self)
    return lhs, rhs, bool(np.all(lhs >= rhs - SLACK))


def check_chain(p, u, v, g: Graph, negatives=None, tau: float = 0.75, include_self=True):
    """loss >= log-sum bound >= Jensen bound; returns values and violations."""
    loss, a1, ok1 = check_logsum_bound(p, u, v, g, negatives, tau, include_self)
    jb = jensen_bound(p, u, v, g, negatives, tau, include_self)
    _, _, ok_rows = check_jensen_bound(v, negatives, tau, include_self)
    violations = []
    if not ok1:
        violations.append(f"loss {loss!r} < log-sum bound {a1!r}")
    if not (a1 >= jb - SLACK and ok_rows):
        violations.append(f"log-sum bound {a1!r} < Jensen bound {jb!r}")
    return loss, a1, jb, violations


def two_hop_alignment(embeddings, g: Graph, g2: Optional[Graph] = None) -> float:
    """Mean over nodes with two-hop neighbors of the mean squared distance
    to those neighbors (no 1/(2L) prefactor)."""
    x = np.asarray(embeddings, dtype=np.float64)
    g2 = two_hop_graph(g) if g2 is None else g2
    deg = g2.degrees
    active = deg > 0
    if not active.any():
        return 0.0
    rows = g2.row_ids()
    diff = x[rows] - x[g2.col_indices]
    sq = np.einsum("ij,ij->i", diff, diff)
    per_node = np.bincount(rows, weights=sq, minlength=g.num_nodes)
    return float(np.mean(per_node[active] / deg[active]))


def estimate_bilipschitz(predictor, iters: int = 10_000, tol: float = 1e-14) -> float:
    """L = 1 / sigma_min(W)^2 for a linear predictor, via inverse power
    iteration on W^T W. Accepts a linear ``PredictorParams`` or a matrix."""
    if isinstance(predictor, PredictorParams):
        if predictor.kind != "linear":
            raise ValueError(f"bi-Lipschitz constant only computable for linear predictors, got {predictor.kind!r}")
        w = predictor.layers[0][0].value
    else:
        w = np.asarray(predictor, dtype=np.float64)
    gram = w.T @ w
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("predictor weight is singular; the alignment bound is vacuous") from None

    def inv_gram(b):
        return np.linalg.solve(chol.T, np.linalg.solve(chol, b))

    x = np.ones(gram.shape[0]) + 1e-3 * np.arange(gram.shape[0])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = inv_gram(x)
        new = float(x @ y)
        x = y / np.linalg.norm(y)
        done = abs(new - lam) <= tol * abs(new)
        lam = new
        if done:
            break
    lam = float(x @ inv_gram(x))
    if 1.0 / np.sqrt(lam) < 1e-10:
        raise np.linalg.LinAlgError("sigma_min below 1e-10; the alignment bound is vacuous")
    return float(lam)


def error_bound_report(loss: float, lipschitz: Optional[float], h2: float, num_classes: int) -> dict:
    """Components of 4 M^2 (4 L loss + (1 - h2)), additive constant omitted."""
    if not 0.0 <= h2 <= 1.0:
        raise ValueError(f"two-hop homophily {h2} outside [0, 1]")
    m2 = 4.0 * num_classes**2
    loss_term = None if lipschitz is None else 4.0 * lipschitz * loss
    bound = None if loss_term is None else m2 * (loss_term + (1.0 - h2))
    return {
        "loss_term": loss_term,
        "monophily_term": 1.0 - h2,
        "M": int(num_classes),
        "bound_without_constant": bound,
    }


def mean_classifier_error(embeddings, labels, train_idx=None, test_idx=None) -> float:
    """Error of the classifier whose class rows are class-mean embeddings."""
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    tr = np.arange(len(y)) if train_idx is None else np.asarray(train_idx)
    te = np.arange(len(y)) if test_idx is None else np.asarray(test_idx)
    m = int(y.max()) + 1
    means = np.zeros((m, x.shape[1]))
    np.add.at(means, y[tr], x[tr])
    counts = np.bincount(y[tr], minlength=m)
    means[counts > 0] /= counts[counts > 0, None]
    pred = np.argmax(x[te] @ means.T, axis=1)
    return float(np.mean(pred != y[te]))


def random_unit(rng, n, d):
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_trials(g: Graph, trials: int, seed: int = 0, dim: int = 16) -> TheoryReport:
    """Run the bound chain on random unit tensors over ``g``."""
    rng = np.random.default_rng(seed)
    report = TheoryReport(trials=trials)
    for t in range(trials):
        p, u, v = (random_unit(rng, g.num_nodes, dim) for _ in range(3))
        tau = float(rng.choice([0.25, 0.5, 0.75, 0.99, 1.0]))
        negatives = None
        if t % 2:
            negatives = sample_negatives(g.num_nodes, int(rng.integers(1, 11)), g.num_nodes, seed, t)
        loss, a1, jb, bad = check_chain(p, u, v, g, negatives, tau)
        report.violations.extend(f"trial {t}: {msg}" for msg in bad)
        if t == 0:
            report.loss_value, report.bound_a1, report.bound_jensen = loss, a1, jb
    return report
