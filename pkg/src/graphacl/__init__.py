"""Asymmetric contrastive learning of node representations for homophilic
and heterophilic graphs, in numpy with optional numba kernels."""

__version__ = "0.1.0"

from .graph import (Graph, SparseMatrix, SyntheticSpec, build_graph, generate_synthetic, normalized_adjacency,
                    random_splits, two_hop_graph)
from .trainer import TrainConfig, TrainResult, train

__all__ = [
    "Graph",
    "SparseMatrix",
    "SyntheticSpec",
    "TrainConfig",
    "TrainResult",
    "build_graph",
    "generate_synthetic",
    "normalized_adjacency",
    "random_splits",
    "train",
    "two_hop_graph",
]
