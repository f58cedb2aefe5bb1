"""``graphacl`` command line entry point.

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 training
divergence, 4 theory-check violation. Stdout carries JSON only.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, kernels
from .encoder import save_checkpoint
from .graph import SyntheticSpec, generate_synthetic, random_splits
from .io import (
    DatasetError,
    dump_json,
    load_config,
    load_dataset,
    load_embeddings,
    save_embeddings,
    write_dataset,
)
from .metrics import evaluate, graph_stats
from .objectives import VARIANTS, DivergenceError
from .theory import random_trials, two_hop_alignment
from .trainer import TrainConfig, train

log = logging.getLogger("graphacl")

EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED, EXIT_THEORY = 1, 2, 3, 4

# CLI flag dest -> TrainConfig field
_OVERRIDES = {
    "seed": "seed",
    "epochs": "epochs",
    "dim": "dim",
    "hidden_dim": "hidden_dim",
    "tau": "tau",
    "ema_decay": "ema_decay",
    "neg_k": "neg_k",
    "lr": "lr",
    "weight_decay": "weight_decay",
    "loss": "loss",
    "predictor": "predictor",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graphacl", description="Asymmetric contrastive node representation learning.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("stats", help="print graph statistics as JSON")
    s.add_argument("dataset")

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--kind", required=True, choices=["homophilic-sbm", "heterophilic-bipartite-monophily"])
    s.add_argument("--nodes", type=int, required=True)
    s.add_argument("--classes", type=int, required=True)
    s.add_argument("--p-in", type=float, required=True)
    s.add_argument("--p-out", type=float, required=True)
    s.add_argument("--p-cross", type=float, default=0.0)
    s.add_argument("--feature-dim", type=int, default=16)
    s.add_argument("--feature-noise", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train", help="train and write embeddings, checkpoint and metrics")
    s.add_argument("dataset")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--dim", type=int)
    s.add_argument("--hidden-dim", type=int)
    s.add_argument("--tau", type=float)
    s.add_argument("--lambda", dest="ema_decay", type=float)
    s.add_argument("--neg-k", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--weight-decay", type=float)
    s.add_argument("--loss", choices=VARIANTS)
    s.add_argument("--predictor", choices=["mlp", "linear", "identity"])
    s.add_argument("--out", required=True)

    s = sub.add_parser("eval", help="linear probe, k-means NMI and similarity histograms")
    s.add_argument("dataset")
    s.add_argument("--embeddings", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--random-pairs", type=int, default=10_000)
    s.add_argument("--out", help="directory holding metrics.json (default: next to the embeddings)")

    s = sub.add_parser("check", help="numerical checks of the loss bounds")
    s.add_argument("dataset")
    s.add_argument("--embeddings")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="merge the report into <out>/metrics.json")
    return p


def _emit(obj):
    sys.stdout.write(dump_json(obj) + "\n")


def _merge_metrics(directory: Path, key: str, value):
    path = directory / "metrics.json"
    metrics = json.loads(path.read_text()) if path.is_file() else {}
    metrics[key] = value
    directory.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(metrics) + "\n")


def effective_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else {}
    for dest, key in _OVERRIDES.items():
        val = getattr(args, dest, None)
        if val is not None:
            cfg[key] = val
    return TrainConfig.from_dict(cfg)


def cmd_stats(args):
    ds = load_dataset(args.dataset)
    _emit(graph_stats(ds.graph).to_dict())
    return 0


def cmd_synth(args):
    spec = SyntheticSpec(args.kind, args.nodes, args.classes, args.p_in, args.p_out,
                         args.feature_dim, args.feature_noise, args.p_cross)
    g, x = generate_synthetic(spec, args.seed)
    write_dataset(args.out, g, x, random_splits(g.num_nodes, args.seed))
    _emit({"out": str(args.out), "num_nodes": g.num_nodes, "num_edges": g.num_edges})
    return 0


def cmd_train(args):
    config = effective_config(args)
    ds = load_dataset(args.dataset)
    out = Path(args.out)
    log.info("training %s on %s (%d nodes)", config.loss, ds.name, ds.graph.num_nodes)
    res = train(ds.graph, ds.features, config)
    out.mkdir(parents=True, exist_ok=True)
    save_embeddings(out / "embeddings.bin", res.embeddings)
    save_checkpoint(out / "checkpoint.bin", res.state)
    metrics = {
        "version": __version__,
        "backend": kernels.BACKEND,
        "seed": config.seed,
        "config": config.to_dict(),
        "dataset": ds.name,
        "graph_stats": graph_stats(ds.graph).to_dict(),
        "loss_curve": res.loss_curve,
        "theory": {"two_hop_alignment": two_hop_alignment(res.embeddings, ds.graph)},
        "timings": {"train_seconds": res.seconds},
    }
    (out / "metrics.json").write_text(dump_json(metrics) + "\n")
    _emit({"out": str(out), "final_loss": res.loss_curve[-1], "epochs": config.epochs})
    return 0


def cmd_eval(args):
    ds = load_dataset(args.dataset)
    emb = load_embeddings(args.embeddings)
    if emb.shape[0] != ds.graph.num_nodes:
        raise DatasetError(f"embeddings have {emb.shape[0]} rows, dataset has {ds.graph.num_nodes} nodes")
    report = evaluate(emb, ds.graph, ds.splits, args.seed, num_random_pairs=args.random_pairs)
    out = Path(args.out) if args.out else Path(args.embeddings).parent
    _merge_metrics(out, "eval", report.to_dict())
    _emit({
        "probe_accuracy": report.probe_accuracy,
        "probe_accuracy_std": report.probe_accuracy_std,
        "nmi": report.nmi,
    })
    return 0


def cmd_check(args):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    ds = load_dataset(args.dataset)
    report = random_trials(ds.graph, args.trials, args.seed)
    if args.embeddings:
        emb = load_embeddings(args.embeddings)
        if emb.shape[0] != ds.graph.num_nodes:
            raise DatasetError(f"embeddings have {emb.shape[0]} rows, dataset has {ds.graph.num_nodes} nodes")
        report.two_hop_alignment = two_hop_alignment(emb, ds.graph)
    body = report.to_dict()
    if args.out:
        _merge_metrics(Path(args.out), "theory", body)
    _emit({"theory": body})
    return EXIT_THEORY if report.violations else 0


COMMANDS = {"stats": cmd_stats, "synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "check": cmd_check}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        print(f"graphacl: {err}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"graphacl: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetError as err:
        print(f"graphacl: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as err:
        print(f"graphacl: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValueError, TypeError) as err:
        print(f"graphacl: invalid configuration: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"graphacl: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
