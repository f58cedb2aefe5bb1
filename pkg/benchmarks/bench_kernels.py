"""Time the numba and numpy kernel backends on a random sparse graph.

    python benchmarks/bench_kernels.py [--nodes 20000] [--degree 10] [--dim 64]
"""
import argparse
import time

import numpy as np

from graphacl import kernels
from graphacl.graph import build_graph, normalized_adjacency


def best_of(fn, repeat):
    fn()  # warm-up (triggers JIT compilation)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=20_000)
    ap.add_argument("--degree", type=int, default=10)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--neg-k", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    n = args.nodes
    m = n * args.degree // 2
    g = build_graph(rng.integers(0, n, (m, 2)), n)
    a = normalized_adjacency(g)
    x = rng.standard_normal((n, args.dim))
    y = rng.standard_normal((n, args.dim))
    idx = rng.integers(0, n, (n, args.neg_k))
    coef = rng.standard_normal((n, args.neg_k))

    cases = {
        "spmm": lambda b: b.spmm(a.row_offsets, a.col_indices, a.values, x),
        "spmm_t": lambda b: b.spmm_t(a.row_offsets, a.col_indices, a.values, x, n),
        "edge_dots": lambda b: b.edge_dots(g.row_offsets, g.col_indices, x, y),
        "gather_dots": lambda b: b.gather_dots(x, y, idx),
        "gather_backward": lambda b: b.gather_backward(x, idx, coef),
        "two_hop": lambda b: b.two_hop(g.row_offsets, g.col_indices),
    }
    backends = [("numpy", kernels.numpy_backend)]
    if kernels.numba_backend is not None:
        backends.append(("numba", kernels.numba_backend))

    print(f"nodes={n} edges={g.num_edges} dim={args.dim} neg_k={args.neg_k}")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name, _ in backends) + f"{'speedup':>10}")
    for case, fn in cases.items():
        secs = [best_of(lambda: fn(b), args.repeat) for _, b in backends]
        speedup = f"{secs[0] / secs[-1]:>9.1f}x" if len(secs) > 1 else ""
        print(f"{case:<16}" + "".join(f"{1e3 * s:>10.2f}ms" for s in secs) + speedup)


if __name__ == "__main__":
    main()
