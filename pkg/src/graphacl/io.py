"""On-disk formats: dataset directories, embeddings.bin and JSON configs.

A dataset directory holds

* ``graph.txt``    first line ``N M``, then M lines ``u v`` (0-indexed)
* ``features.txt`` N lines of whitespace-separated floats
* ``labels.txt``   N lines, one non-negative integer each
* ``splits.json``  ``{"train": [...], "val": [...], "test": [...]}``
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, build_graph

EMBEDDINGS_MAGIC = b"GACL"
EMBEDDINGS_VERSION = 1


class DatasetError(ValueError):
    """Malformed or inconsistent dataset files."""


@dataclass
class Dataset:
    graph: Graph
    features: np.ndarray
    splits: dict
    name: str


def _read_graph(path: Path):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DatasetError(f"{path}:1: expected 'N M', got {' '.join(header)!r}")
        try:
            n, m = int(header[0]), int(header[1])
        except ValueError:
            raise DatasetError(f"{path}:1: header is not two integers") from None
        edges = np.empty((m, 2), dtype=np.int64)
        count = 0
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 'u v', got {line.strip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: node ids must be integers") from None
            if not (0 <= u < n and 0 <= v < n):
                raise DatasetError(f"{path}:{lineno}: node id out of range for N={n}")
            if count >= m:
                raise DatasetError(f"{path}:{lineno}: more edge lines than declared M={m}")
            edges[count] = (u, v)
            count += 1
    if count != m:
        raise DatasetError(f"{path}: header declares M={m} edges, found {count}")
    return n, edges


def _read_features(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                row = [float(t) for t in parts]
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: non-numeric feature value") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(f"{path}:{lineno}: expected {width} values, got {len(row)}")
            if not all(math.isfinite(x) for x in row):
                raise DatasetError(f"{path}:{lineno}: non-finite feature value")
            rows.append(row)
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), width or 0)


def _read_labels(path: Path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                y = int(tok)
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: label {tok!r} is not an integer") from None
            if y < 0:
                raise DatasetError(f"{path}:{lineno}: negative label {y}")
            out.append(y)
    return np.asarray(out, dtype=np.int64)


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    for fname in ("graph.txt", "features.txt", "labels.txt", "splits.json"):
        if not (d / fname).is_file():
            raise DatasetError(f"{d}: missing {fname}")
    n, edges = _read_graph(d / "graph.txt")
    features = _read_features(d / "features.txt")
    labels = _read_labels(d / "labels.txt")
    if features.shape[0] != n:
        raise DatasetError(f"features.txt has {features.shape[0]} rows but graph.txt declares N={n}")
    if labels.shape[0] != n:
        raise DatasetError(f"labels.txt has {labels.shape[0]} rows but graph.txt declares N={n}")
    try:
        splits_raw = json.loads((d / "splits.json").read_text())
    except json.JSONDecodeError as err:
        raise DatasetError(f"{d / 'splits.json'}: {err}") from None
    splits = {}
    seen = np.zeros(n, dtype=bool)
    for key in ("train", "val", "test"):
        if key not in splits_raw:
            raise DatasetError(f"splits.json: missing {key!r}")
        idx = np.asarray(splits_raw[key], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DatasetError(f"splits.json: {key} index out of range for N={n}")
        if seen[idx].any() or len(np.unique(idx)) != len(idx):
            raise DatasetError(f"splits.json: {key} overlaps another split or repeats an index")
        seen[idx] = True
        splits[key] = idx
    graph = build_graph(edges, n, labels)
    return Dataset(graph, features, splits, d.name)


def write_dataset(directory, graph: Graph, features: np.ndarray, splits: dict):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    edges = graph.edge_array()
    with open(d / "graph.txt", "w") as fh:
        fh.write(f"{graph.num_nodes} {len(edges)}\n")
        for u, v in edges:
            fh.write(f"{u} {v}\n")
    with open(d / "features.txt", "w") as fh:
        for row in features:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
    with open(d / "labels.txt", "w") as fh:
        for y in graph.labels:
            fh.write(f"{int(y)}\n")
    (d / "splits.json").write_text(json.dumps({k: [int(i) for i in splits[k]] for k in ("train", "val", "test")}))


def save_embeddings(path, emb: np.ndarray):
    n, dim = emb.shape
    with open(path, "wb") as fh:
        fh.write(EMBEDDINGS_MAGIC)
        fh.write(struct.pack("<III", EMBEDDINGS_VERSION, n, dim))
        fh.write(np.ascontiguousarray(emb, dtype="<f4").tobytes())


def load_embeddings(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if blob[:4] != EMBEDDINGS_MAGIC:
        raise DatasetError(f"{path}: not an embeddings file (bad magic)")
    version, n, dim = struct.unpack_from("<III", blob, 4)
    if version != EMBEDDINGS_VERSION:
        raise DatasetError(f"{path}: unsupported embeddings version {version}")
    if len(blob) != 16 + 4 * n * dim:
        raise DatasetError(f"{path}: expected {n}x{dim} floats, file size disagrees")
    return np.frombuffer(blob, dtype="<f4", offset=16).reshape(n, dim).astype(np.float64)


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: {err}") from None
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return cfg


def dump_json(obj) -> str:
    """Deterministic JSON; refuses NaN/inf."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
