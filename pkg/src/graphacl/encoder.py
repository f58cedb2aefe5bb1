"""Online/target GCN encoders, the predictor head and their EMA coupling."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .graph import SparseMatrix
from .linalg import (
    ParamTensor,
    affine,
    affine_backward,
    elu,
    elu_backward,
    l2_normalize_rows,
    l2_normalize_rows_backward,
    matmul,
    matmul_t,
    spmm,
)

CHECKPOINT_MAGIC = b"GACLCKPT"
CHECKPOINT_VERSION = 1
PREDICTOR_KINDS = ("mlp", "linear", "identity")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class EncoderParams:
    """GCN weights; ``layers`` holds ``(W, b)`` pairs, input layer first."""

    layers: List[tuple]
    activation: Optional[str] = "elu"

    @classmethod
    def init(cls, rng, in_dim: int, hidden_dim: int, out_dim: int, num_layers: int = 2) -> "EncoderParams":
        if num_layers < 1:
            raise ValueError("encoder needs at least one layer")
        dims = [in_dim] + [hidden_dim] * (num_layers - 1) + [out_dim]
        layers = [
            (ParamTensor(glorot(rng, a, b)), ParamTensor(np.zeros((1, b))))
            for a, b in zip(dims[:-1], dims[1:])
        ]
        return cls(layers)

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].shape[1]

    def tensors(self) -> List[ParamTensor]:
        return [t for pair in self.layers for t in pair]

    def copy(self) -> "EncoderParams":
        return EncoderParams([(w.copy(), b.copy()) for w, b in self.layers], self.activation)


@dataclass
class PredictorParams:
    """``mlp``: D->D->D with ELU; ``linear``: one affine map; ``identity``: none."""

    kind: str
    layers: List[tuple] = field(default_factory=list)

    @classmethod
    def init(cls, rng, dim: int, kind: str = "mlp", hidden_dim: Optional[int] = None) -> "PredictorParams":
        if kind not in PREDICTOR_KINDS:
            raise ValueError(f"unknown predictor kind {kind!r}")
        hidden_dim = hidden_dim or dim
        if kind == "identity":
            dims = []
        elif kind == "linear":
            dims = [(dim, dim)]
        else:
            dims = [(dim, hidden_dim), (hidden_dim, dim)]
        layers = [(ParamTensor(glorot(rng, a, b)), ParamTensor(np.zeros((1, b)))) for a, b in dims]
        return cls(kind, layers)

    def tensors(self) -> List[ParamTensor]:
        return [t for pair in self.layers for t in pair]


@dataclass
class ModelState:
    online: EncoderParams
    target: EncoderParams
    predictor: PredictorParams
    moments: list = field(default_factory=list)
    step: int = 0

    @classmethod
    def init(cls, seed: int, in_dim: int, hidden_dim: int, out_dim: int,
             num_layers: int = 2, predictor_kind: str = "mlp") -> "ModelState":
        rng = np.random.default_rng(seed)
        online = EncoderParams.init(rng, in_dim, hidden_dim, out_dim, num_layers)
        predictor = PredictorParams.init(rng, out_dim, predictor_kind)
        state = cls(online, online.copy(), predictor)
        state.moments = [(np.zeros(p.shape), np.zeros(p.shape)) for p in state.trainable()]
        return state

    def trainable(self) -> List[ParamTensor]:
        """Online encoder then predictor tensors; the target is never optimized."""
        return self.online.tensors() + self.predictor.tensors()

    def tensors(self) -> List[ParamTensor]:
        """All tensors in checkpoint declaration order."""
        return self.online.tensors() + self.target.tensors() + self.predictor.tensors()

    def zero_grad(self):
        for p in self.tensors():
            p.zero_grad()


def gcn_forward(a_hat: SparseMatrix, x, params: EncoderParams, return_cache: bool = False):
    """H <- act(A_hat H W + b) per layer, no activation on the last layer,
    rows of the final output l2-normalized."""
    if x.shape[0] != a_hat.shape[0]:
        raise ValueError(f"features have {x.shape[0]} rows, graph has {a_hat.shape[0]} nodes")
    cache = []
    h = x
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        if h.shape[1] != w.shape[0]:
            raise ValueError(f"layer {i}: input dim {h.shape[1]} != weight rows {w.shape[0]}")
        z = spmm(a_hat, matmul(h, w.value)) + b.value
        cache.append((h, z))
        if i < last and params.activation == "elu":
            h = elu(z)
        else:
            h = z
    out, norms = l2_normalize_rows(h)
    if return_cache:
        return out, (cache, out, norms)
    return out


def gcn_backward(a_hat: SparseMatrix, params: EncoderParams, cache, grad_out: np.ndarray):
    """Accumulate parameter grads for upstream ``grad_out`` (dL/d output)."""
    layers_cache, out, norms = cache
    g = l2_normalize_rows_backward(out, norms, grad_out)
    last = len(params.layers) - 1
    for i in range(last, -1, -1):
        w, b = params.layers[i]
        h, z = layers_cache[i]
        if i < last and params.activation == "elu":
            g = elu_backward(z, g)
        b.grad += g.sum(axis=0, keepdims=True)
        # A_hat is symmetric, so A_hat^T g == A_hat g
        gm = spmm(a_hat, g)
        w.grad += matmul_t(h, gm)
        if i > 0:
            g = gm @ w.value.T


def predictor_forward(v: np.ndarray, params: PredictorParams, return_cache: bool = False):
    """P = normalize(g(V))."""
    if params.layers and v.shape[1] != params.layers[0][0].shape[0]:
        raise ValueError(f"predictor expects dim {params.layers[0][0].shape[0]}, got {v.shape[1]}")
    cache = []
    h = v
    for i, (w, b) in enumerate(params.layers):
        z = affine(h, w, b)
        cache.append((h, z))
        h = elu(z) if i < len(params.layers) - 1 else z
    out, norms = l2_normalize_rows(h)
    if return_cache:
        return out, (cache, out, norms)
    return out


def predictor_backward(params: PredictorParams, cache, grad_out: np.ndarray) -> np.ndarray:
    """Accumulate predictor grads; return dL/dV."""
    layers_cache, out, norms = cache
    g = l2_normalize_rows_backward(out, norms, grad_out)
    for i in range(len(params.layers) - 1, -1, -1):
        w, b = params.layers[i]
        h, z = layers_cache[i]
        if i < len(params.layers) - 1:
            g = elu_backward(z, g)
        g = affine_backward(h, w, b, g)
    return g


def target_forward(a_hat: SparseMatrix, x, state: ModelState) -> np.ndarray:
    """Target encoder output. No cache is kept, so nothing flows back into it."""
    u = gcn_forward(a_hat, x, state.target)
    u.setflags(write=False)
    return u


def ema_update(state: ModelState, decay: float) -> ModelState:
    """target <- decay * target + (1 - decay) * online, tensor by tensor."""
    if not 0.0 <= decay <= 1.0:
        raise ValueError(f"EMA decay {decay} outside [0, 1]")
    for t, o in zip(state.target.tensors(), state.online.tensors()):
        t.value = decay * t.value + (1.0 - decay) * o.value
    return state


def save_checkpoint(path, state: ModelState):
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        for p in state.tensors():
            rows, cols = p.shape
            fh.write(struct.pack("<II", rows, cols))
            fh.write(np.ascontiguousarray(p.value, dtype="<f8").tobytes())


def read_checkpoint(path) -> List[np.ndarray]:
    """Return the stored tensors in file order."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos, out = 12, []
    while pos < len(blob):
        rows, cols = struct.unpack_from("<II", blob, pos)
        pos += 8
        n = rows * cols
        out.append(np.frombuffer(blob, dtype="<f8", count=n, offset=pos).reshape(rows, cols).astype(np.float64))
        pos += 8 * n
    return out


def load_checkpoint(path, template: ModelState) -> ModelState:
    """Fill a freshly initialized ``template`` with the tensors from ``path``."""
    arrays = read_checkpoint(path)
    tensors = template.tensors()
    if len(arrays) != len(tensors):
        raise ValueError(f"{path}: {len(arrays)} tensors, model expects {len(tensors)}")
    for p, a in zip(tensors, arrays):
        if a.shape != p.shape:
            raise ValueError(f"{path}: tensor shape {a.shape} != expected {p.shape}")
        p.value = a
        p.grad = np.zeros_like(a)
    return template
