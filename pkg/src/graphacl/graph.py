"""Graph data model, structural transforms and synthetic fixtures."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels


def _frozen(arr, dtype):
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out is arr:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in CSR form.

    ``col_indices`` are sorted within each row and every edge is stored in
    both directions. ``labels`` is optional; when present ``num_classes``
    is the declared class count.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    labels: Optional[np.ndarray] = None
    num_classes: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _frozen(self.row_offsets, np.int64))
        object.__setattr__(self, "col_indices", _frozen(self.col_indices, np.int64))
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(self.labels, np.int64))
            if self.num_classes is None:
                k = int(self.labels.max()) + 1 if self.labels.size else 0
                object.__setattr__(self, "num_classes", k)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    @property
    def num_edges(self) -> int:
        """Undirected edge count (each stored pair counted once)."""
        return int(self.col_indices.shape[0] // 2)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def row_ids(self) -> np.ndarray:
        """Source node of every stored entry, aligned with ``col_indices``."""
        return np.repeat(np.arange(self.num_nodes), self.degrees)

    def edge_array(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with u < v."""
        rows = self.row_ids()
        keep = rows < self.col_indices
        return np.stack([rows[keep], self.col_indices[keep]], axis=1)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        a[self.row_ids(), self.col_indices] = 1.0
        return a

    def with_labels(self, labels, num_classes=None) -> "Graph":
        return build_graph(self.edge_array(), self.num_nodes, labels, num_classes)


@dataclass(frozen=True)
class SparseMatrix:
    """CSR matrix with float64 values. ``shape`` defaults to square."""

    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    shape: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _frozen(self.row_offsets, np.int64))
        object.__setattr__(self, "col_indices", _frozen(self.col_indices, np.int64))
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        n = self.row_offsets.shape[0] - 1
        if self.shape is None:
            object.__setattr__(self, "shape", (n, n))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sparse values must be finite")

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        offsets = np.zeros(dense.shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=dense.shape[0]), out=offsets[1:])
        return cls(offsets, cols, dense[rows, cols], shape=dense.shape)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.row_offsets))
        out[rows, self.col_indices] = self.values
        return out


def build_graph(edge_list, num_nodes: int, labels=None, num_classes: Optional[int] = None) -> Graph:
    """Symmetrize, drop self-loops and merge duplicates.

    Raises ValueError on out-of-range node ids or labels.
    """
    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        bad = edges[(edges < 0) | (edges >= num_nodes)][0]
        raise ValueError(f"node id {bad} out of range for {num_nodes} nodes")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (num_nodes,):
            raise ValueError(f"expected {num_nodes} labels, got {labels.shape[0]}")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        if num_classes is not None and labels.size and labels.max() >= num_classes:
            raise ValueError(f"label id {labels.max()} >= declared class count {num_classes}")
    edges = edges[edges[:, 0] != edges[:, 1]]
    both = np.concatenate([edges, edges[:, ::-1]])
    codes = np.unique(both[:, 0] * num_nodes + both[:, 1])
    rows, cols = codes // num_nodes, codes % num_nodes
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
    return Graph(num_nodes, offsets, cols, labels, num_classes)


def normalized_adjacency(g: Graph) -> SparseMatrix:
    """D^-1/2 A D^-1/2 on the stored pattern; isolated rows stay empty."""
    deg = g.degrees.astype(np.float64)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    values = inv_sqrt[g.row_ids()] * inv_sqrt[g.col_indices]
    return SparseMatrix(g.row_offsets, g.col_indices, values)


def two_hop_graph(g: Graph) -> Graph:
    """Pairs joined by some length-2 walk, excluding i == k."""
    ptr, idx = kernels.two_hop(g.row_offsets, g.col_indices)
    return Graph(g.num_nodes, ptr, idx, g.labels, g.num_classes)


KINDS = ("homophilic-sbm", "heterophilic-bipartite-monophily")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for :func:`generate_synthetic`.

    For ``homophilic-sbm`` nodes of the same class connect with ``p_in`` and
    of different classes with ``p_out``. For
    ``heterophilic-bipartite-monophily`` classes are paired (0-1, 2-3, ...);
    paired classes connect with ``p_out``, same-class nodes with ``p_in`` and
    every other class pair with ``p_cross``.
    """

    kind: str
    num_nodes: int
    num_classes: int
    p_in: float
    p_out: float
    feature_dim: int = 16
    feature_noise: float = 1.0
    p_cross: float = 0.0

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        for name in ("p_in", "p_out", "p_cross"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.num_nodes < self.num_classes:
            raise ValueError("num_nodes must be >= num_classes")
        if self.feature_dim < 1 or self.feature_noise < 0:
            raise ValueError("feature_dim must be >= 1 and feature_noise >= 0")
        if self.kind == KINDS[1] and self.num_classes % 2:
            raise ValueError("bipartite monophily graphs need an even class count")


def _edge_probability(spec: SyntheticSpec) -> np.ndarray:
    m = spec.num_classes
    cls = np.arange(m)
    same = cls[:, None] == cls[None, :]
    if spec.kind == "homophilic-sbm":
        return np.where(same, spec.p_in, spec.p_out)
    partner = (cls[:, None] ^ 1) == cls[None, :]
    return np.where(same, spec.p_in, np.where(partner, spec.p_out, spec.p_cross))


def generate_synthetic(spec: SyntheticSpec, seed: int):
    """Sample a labelled graph and features for ``spec``.

    Classes are assigned round-robin so every class has n/M nodes (+-1).
    Features are the one-hot class vector padded to ``feature_dim`` (or
    projected when ``feature_dim`` is smaller) plus Gaussian noise.
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    n, m = spec.num_nodes, spec.num_classes
    labels = rng.permutation(np.arange(n) % m)
    probs = _edge_probability(spec)
    iu, ju = np.triu_indices(n, k=1)
    draw = rng.random(iu.shape[0]) < probs[labels[iu], labels[ju]]
    g = build_graph(np.stack([iu[draw], ju[draw]], axis=1), n, labels, m)

    onehot = np.eye(m)[labels]
    if spec.feature_dim >= m:
        base = np.zeros((n, spec.feature_dim))
        base[:, :m] = onehot
    else:
        proj = rng.standard_normal((m, spec.feature_dim)) / np.sqrt(spec.feature_dim)
        base = onehot @ proj
    features = base + spec.feature_noise * rng.standard_normal((n, spec.feature_dim))
    return g, features


def random_splits(num_nodes: int, seed: int, fractions: Sequence[float] = (0.6, 0.2, 0.2)):
    """Seeded disjoint train/val/test index arrays."""
    perm = np.random.default_rng(seed).permutation(num_nodes)
    a = int(round(fractions[0] * num_nodes))
    b = a + int(round(fractions[1] * num_nodes))
    return {"train": np.sort(perm[:a]), "val": np.sort(perm[a:b]), "test": np.sort(perm[b:])}
