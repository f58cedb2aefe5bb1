"""Adam and the full-graph training loop."""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .encoder import (
    PREDICTOR_KINDS,
    ModelState,
    ema_update,
    gcn_backward,
    gcn_forward,
    predictor_backward,
    predictor_forward,
    target_forward,
)
from .graph import Graph, SparseMatrix, normalized_adjacency
from .objectives import (
    VARIANTS,
    DivergenceError,
    loss_com,
    loss_graphacl,
    loss_pre,
    loss_smoothing,
    loss_uni,
    sample_negatives,
)

# above this many nodes neg_k=0 switches to sampling 10 negatives
FULL_NEGATIVES_MAX_NODES = 20_000
SPARSE_FEATURE_DENSITY = 0.1


@dataclass
class TrainConfig:
    epochs: int = 500
    lr: float = 0.001
    weight_decay: float = 0.0
    ema_decay: float = 0.99
    tau: float = 0.75
    neg_k: int = 0
    dim: int = 512
    hidden_dim: int = 512
    encoder_layers: int = 2
    predictor: str = "mlp"
    loss: str = "graphacl"
    include_self_negative: bool = True
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ValueError(f"epochs must be an integer >= 1, got {self.epochs!r}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ValueError(f"ema_decay must lie in [0, 1], got {self.ema_decay}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.neg_k < 0:
            raise ValueError("neg_k must be >= 0")
        if min(self.dim, self.hidden_dim, self.encoder_layers) < 1:
            raise ValueError("dim, hidden_dim and encoder_layers must be >= 1")
        if self.predictor not in PREDICTOR_KINDS:
            raise ValueError(f"predictor must be one of {PREDICTOR_KINDS}, got {self.predictor!r}")
        if self.loss not in VARIANTS:
            raise ValueError(f"loss must be one of {VARIANTS}, got {self.loss!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    embeddings: np.ndarray
    loss_curve: List[float]
    state: ModelState
    seconds: float
    config: TrainConfig = field(default=None)


def adam_step(params, moments, config: TrainConfig, step: int):
    """Classic Adam with L2 weight decay folded into the gradient.

    ``step`` is 1-based. Raises DivergenceError on a non-finite gradient.
    """
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    c1 = 1.0 - b1**step
    c2 = 1.0 - b2**step
    for p, (m, v) in zip(params, moments):
        g = p.grad
        if config.weight_decay:
            g = g + config.weight_decay * p.value
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= config.lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


def prepare_features(features):
    """Store mostly-zero feature matrices in CSR form for cheaper products."""
    if isinstance(features, SparseMatrix):
        return features
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.size and np.count_nonzero(features) <= SPARSE_FEATURE_DENSITY * features.size:
        return SparseMatrix.from_dense(features)
    return features


def effective_neg_k(config: TrainConfig, num_nodes: int) -> int:
    if config.neg_k == 0 and num_nodes > FULL_NEGATIVES_MAX_NODES:
        return 10
    return config.neg_k


def training_step(state: ModelState, graph: Graph, a_hat: SparseMatrix, x, config: TrainConfig,
                  negatives: Optional[np.ndarray]) -> float:
    """One forward/backward pass. Fills grads of the trainable tensors and
    returns the loss; the parameters themselves are not touched."""
    state.zero_grad()
    v, enc_cache = gcn_forward(a_hat, x, state.online, return_cache=True)
    tau, self_neg = config.tau, config.include_self_negative

    if config.loss == "smoothing":
        out = loss_smoothing(v, v, graph, negatives, tau, self_neg)
        d_v = out.grads["anchor"] + out.grads["other"]
    elif config.loss == "uni":
        out = loss_uni(v, negatives)
        d_v = out.grads["V"]
    else:
        p, pred_cache = predictor_forward(v, state.predictor, return_cache=True)
        u = target_forward(a_hat, x, state)
        if config.loss == "graphacl":
            out = loss_graphacl(p, u, v, graph, negatives, tau, self_neg)
        elif config.loss == "pre":
            out = loss_pre(p, u, graph)
        else:
            out = loss_com(p, u, v, graph, negatives)
        d_v = predictor_backward(state.predictor, pred_cache, out.grads["P"])
        if "V" in out.grads:
            d_v = d_v + out.grads["V"]
    gcn_backward(a_hat, state.online, enc_cache, d_v)
    return out.value


def embed(state: ModelState, a_hat: SparseMatrix, x) -> np.ndarray:
    return gcn_forward(a_hat, x, state.online)


def train(graph: Graph, features, config: TrainConfig,
          callback: Optional[Callable[[int, float, ModelState], None]] = None) -> TrainResult:
    """Full-graph training.

    Per epoch: online and target forward, fresh negatives seeded by
    ``(config.seed, epoch)``, loss and backward into the online encoder and
    predictor, Adam, then the EMA update of the target. ``callback`` is
    invoked after every epoch with ``(epoch, loss, state)``, epochs 1-based.
    """
    config.validate()
    if features.shape[0] != graph.num_nodes:
        raise ValueError(f"features have {features.shape[0]} rows, graph has {graph.num_nodes} nodes")
    if not isinstance(features, SparseMatrix) and not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    start = time.perf_counter()
    a_hat = normalized_adjacency(graph)
    x = prepare_features(features)
    state = ModelState.init(config.seed, x.shape[1], config.hidden_dim, config.dim,
                            config.encoder_layers, config.predictor)
    neg_k = effective_neg_k(config, graph.num_nodes)
    curve = []
    for epoch in range(1, config.epochs + 1):
        negatives = None
        if neg_k > 0:
            negatives = sample_negatives(graph.num_nodes, neg_k, graph.num_nodes, config.seed, epoch,
                                         exclude_self=not config.include_self_negative)
        try:
            value = training_step(state, graph, a_hat, x, config, negatives)
            state.step += 1
            adam_step(state.trainable(), state.moments, config, state.step)
        except DivergenceError as err:
            raise DivergenceError(f"training diverged at epoch {epoch}: {err}", epoch) from err
        ema_update(state, config.ema_decay)
        curve.append(value)
        if callback is not None:
            callback(epoch, value, state)
    emb = embed(state, a_hat, x)
    return TrainResult(emb, curve, state, time.perf_counter() - start, config)
