"""Graph statistics and downstream evaluation of frozen embeddings."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .graph import Graph, two_hop_graph

HISTOGRAM_PAIR_CAP = 1_000_000


def _labels(g: Graph) -> np.ndarray:
    if g.labels is None:
        raise ValueError("graph has no labels")
    return g.labels


@dataclass
class GraphStats:
    homophily: float
    two_hop_monophily: float
    neighborhood_similarity: float
    num_nodes: int
    num_edges: int
    num_classes: int

    def to_dict(self):
        return asdict(self)


def homophily_ratio(g: Graph) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    y = _labels(g)
    if g.col_indices.size == 0:
        return 0.0
    same = y[g.row_ids()] == y[g.col_indices]
    # both directions are stored, so the ratio over stored entries is the
    # ratio over undirected edges
    return float(same.mean())


def _per_node_same_fraction(g: Graph, y: np.ndarray) -> np.ndarray:
    deg = g.degrees
    same = (y[g.row_ids()] == y[g.col_indices]).astype(np.float64)
    hits = np.bincount(g.row_ids(), weights=same, minlength=g.num_nodes)
    frac = np.full(g.num_nodes, np.nan)
    frac[deg > 0] = hits[deg > 0] / deg[deg > 0]
    return frac


def two_hop_monophily(g: Graph, g2: Optional[Graph] = None) -> float:
    """Per-node share of same-label two-hop neighbors, averaged over nodes
    that have any two-hop neighbor."""
    y = _labels(g)
    g2 = two_hop_graph(g) if g2 is None else g2
    frac = _per_node_same_fraction(g2, y)
    valid = ~np.isnan(frac)
    return float(frac[valid].mean()) if valid.any() else 0.0


def neighbor_label_histograms(g: Graph) -> np.ndarray:
    y = _labels(g)
    m = g.num_classes
    hist = np.zeros((g.num_nodes, m))
    np.add.at(hist, (g.row_ids(), y[g.col_indices]), 1.0)
    return hist


def class_neighborhood_similarity(g: Graph):
    """Return ``(S, s)``: the mean intra-class similarity and the full
    class-by-class matrix of mean cosine similarity between neighbor-label
    histograms. Isolated nodes have cosine 0 with everything."""
    y = _labels(g)
    m = g.num_classes
    hist = neighbor_label_histograms(g)
    norms = np.linalg.norm(hist, axis=1)
    unit = np.zeros_like(hist)
    nz = norms > 0
    unit[nz] = hist[nz] / norms[nz, None]
    class_sum = np.zeros((m, m))
    np.add.at(class_sum, y, unit)
    sizes = np.bincount(y, minlength=m).astype(np.float64)
    sim = class_sum @ class_sum.T
    denom = np.outer(sizes, sizes)
    sim = np.divide(sim, denom, out=np.zeros_like(sim), where=denom > 0)
    present = sizes > 0
    return float(np.clip(np.diag(sim)[present].mean(), 0.0, 1.0)), sim


def graph_stats(g: Graph) -> GraphStats:
    g2 = two_hop_graph(g)
    s, _ = class_neighborhood_similarity(g)
    return GraphStats(
        homophily=homophily_ratio(g),
        two_hop_monophily=two_hop_monophily(g, g2),
        neighborhood_similarity=s,
        num_nodes=g.num_nodes,
        num_edges=g.num_edges,
        num_classes=int(g.num_classes),
    )


# ---------------------------------------------------------------------------
# linear probe


@dataclass(frozen=True)
class ProbeConfig:
    epochs: int = 300
    lr: float = 0.01
    weight_decay: float = 1e-5
    seeds: tuple = (0, 1, 2, 3, 4)
    init_scale: float = 1e-3


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _probe_once(x, y, splits, num_classes, config: ProbeConfig, seed: int) -> float:
    rng = np.random.default_rng(seed)
    tr, va, te = splits["train"], splits["val"], splits["test"]
    # drawn in the row space of the training rows so the probe is
    # equivariant to orthogonal transforms of the embeddings
    w = config.init_scale * (x[tr].T @ rng.standard_normal((len(tr), num_classes))) / np.sqrt(len(tr))
    b = np.zeros(num_classes)
    onehot = np.eye(num_classes)[y[tr]]
    xt = x[tr]
    best_val, best_test = -1.0, 0.0
    for _ in range(config.epochs):
        probs = _softmax(xt @ w + b)
        g = (probs - onehot) / len(tr)
        w -= config.lr * (xt.T @ g + config.weight_decay * w)
        b -= config.lr * g.sum(axis=0)
        val_acc = float(np.mean(np.argmax(x[va] @ w + b, axis=1) == y[va]))
        if val_acc > best_val:
            best_val = val_acc
            best_test = float(np.mean(np.argmax(x[te] @ w + b, axis=1) == y[te]))
    return best_test


def linear_probe(embeddings, labels, splits, config: ProbeConfig = ProbeConfig(), num_classes=None):
    """Softmax regression by full-batch gradient descent on frozen embeddings.

    The test accuracy is read at the epoch with the best validation
    accuracy. Returns ``(mean, std)`` over ``config.seeds``.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    for name in ("train", "val", "test"):
        if len(splits.get(name, ())) == 0:
            raise ValueError(f"empty {name} split")
    splits = {k: np.asarray(splits[k], dtype=np.int64) for k in ("train", "val", "test")}
    m = int(num_classes or y.max() + 1)
    accs = [_probe_once(x, y, splits, m, config, s) for s in config.seeds]
    return float(np.mean(accs)), float(np.std(accs))


# ---------------------------------------------------------------------------
# clustering


def _kmeans_pp(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[i] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[i]) ** 2, axis=1))
    return centers


def _sq_dists(x, centers):
    return (np.sum(x * x, axis=1)[:, None] - 2.0 * x @ centers.T + np.sum(centers * centers, axis=1)[None, :])


def kmeans(x, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 300, tol: float = 1e-8):
    """Lloyd's algorithm with k-means++ seeding; best inertia over restarts.

    Returns ``(assignments, inertia)``.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    best = (None, np.inf)
    for _ in range(restarts):
        centers = _kmeans_pp(x, k, rng)
        for _ in range(max_iter):
            assign = np.argmin(_sq_dists(x, centers), axis=1)
            new = centers.copy()
            for c in range(k):
                members = x[assign == c]
                if len(members):
                    new[c] = members.mean(axis=0)
            shift = np.sum((new - centers) ** 2)
            centers = new
            if shift <= tol:
                break
        assign = np.argmin(_sq_dists(x, centers), axis=1)
        inertia = float(np.sum((x - centers[assign]) ** 2))
        if inertia < best[1]:
            best = (assign, inertia)
    return best


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def normalized_mutual_info(a, b) -> float:
    """NMI with the arithmetic mean of the two entropies as normalizer."""
    a = np.unique(np.asarray(a), return_inverse=True)[1]
    b = np.unique(np.asarray(b), return_inverse=True)[1]
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    ha, hb = _entropy(joint.sum(axis=1)), _entropy(joint.sum(axis=0))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    n = joint.sum()
    nz = joint > 0
    pij = joint[nz] / n
    outer = np.outer(joint.sum(axis=1), joint.sum(axis=0))[nz] / n**2
    mi = float(np.sum(pij * np.log(pij / outer)))
    return float(np.clip(mi / ((ha + hb) / 2.0), 0.0, 1.0))


def kmeans_nmi(embeddings, labels, num_classes: int, seed: int = 0) -> float:
    if num_classes < 2:
        raise ValueError("need at least two clusters")
    assign, _ = kmeans(embeddings, num_classes, seed)
    return normalized_mutual_info(labels, assign)


# ---------------------------------------------------------------------------
# similarity histograms


def _row_cosine(a, b):
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.maximum(na * nb, 1e-12)
    return np.clip(np.einsum("ij,ij->i", a, b) / denom, -1.0, 1.0)


def _capped(pairs, rng):
    if len(pairs) > HISTOGRAM_PAIR_CAP:
        pairs = pairs[np.sort(rng.choice(len(pairs), HISTOGRAM_PAIR_CAP, replace=False))]
    return pairs


def similarity_histograms(embeddings, g: Graph, num_random_pairs: int = 10_000, seed: int = 0,
                          predictions=None) -> dict:
    """Cosine similarities for random node pairs, one-hop edges and two-hop
    pairs, plus cos(v, p) per node when predictor outputs are given."""
    x = np.asarray(embeddings, dtype=np.float64)
    rng = np.random.default_rng(seed)
    n = g.num_nodes
    a = rng.integers(0, n, num_random_pairs)
    b = rng.integers(0, max(n - 1, 1), num_random_pairs)
    if n > 1:
        b = b + (b >= a)
    one = _capped(g.edge_array(), rng)
    two = _capped(two_hop_graph(g).edge_array(), rng)
    out = {
        "random": _row_cosine(x[a], x[b]),
        "one_hop": _row_cosine(x[one[:, 0]], x[one[:, 1]]),
        "two_hop": _row_cosine(x[two[:, 0]], x[two[:, 1]]),
    }
    if predictions is not None:
        out["predictor"] = _row_cosine(x, np.asarray(predictions, dtype=np.float64))
    return out


@dataclass
class EvalReport:
    probe_accuracy: float
    probe_accuracy_std: float
    nmi: float
    histograms: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "probe_accuracy": self.probe_accuracy,
            "probe_accuracy_std": self.probe_accuracy_std,
            "nmi": self.nmi,
            "histograms": {k: [float(v) for v in arr] for k, arr in self.histograms.items()},
        }


def evaluate(embeddings, g: Graph, splits, seed: int = 0, probe: ProbeConfig = ProbeConfig(),
             num_random_pairs: int = 10_000, predictions=None) -> EvalReport:
    y = _labels(g)
    acc, std = linear_probe(embeddings, y, splits, probe, g.num_classes)
    nmi = kmeans_nmi(embeddings, y, int(g.num_classes), seed)
    hist = similarity_histograms(embeddings, g, num_random_pairs, seed, predictions)
    return EvalReport(acc, std, nmi, hist)
