"""Command-line surface for the distillation pipeline.

Subcommands: gen-fixture, ingest, graph, detect, select, train, eval,
pipeline, baseline. A config file of ``key = value`` lines may supply any
pipeline option; explicit flags override file values.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .community import OptimizerConfig, detect_communities
from .embedding_io import (EmbeddingSet, FixtureSpec, generate_fixture,
                           read_csv_embeddings, read_embeddings, write_embeddings)
from .graph_builder import GraphConfig, build_class_graph, dump_graph
from .map_equation import FlowConfig
from .metrics import evaluate_probabilities
from .pipeline import (PipelineConfig, run_paired, run_pipeline, summary_json)
from .selection import (SelectionMetric, distill, read_selection,
                        write_selection, write_selection_summary)
from .trainer import LossConfig, load_classifier, save_classifier, train

METRIC_NAMES = {"modular": "modular", "enter": "enter", "exit": "exit"}
HINGE_NAMES = {"as-printed": "as_printed", "against-bn": "against_bn"}

# file-configurable pipeline options and their defaults
PIPELINE_DEFAULTS = {
    "embeddings": None,
    "eta": None,
    "knn": None,
    "epsilon": 1e-12,
    "normalize": False,
    "teleport": 0.15,
    "metric": "modular",
    "scalarization": "l2",
    "per_class": 100,
    "rho": 0.75,
    "tau": 0.1,
    "lr": 0.1,
    "epochs": 100,
    "batch_size": 64,
    "neg_hinge": "as-printed",
    "runs": 5,
    "parallel": 1,
    "seed": 0,
    "test_fraction": 0.2,
    "max_passes": 100,
    "out_dir": "out",
    "fixture_seed": 0,
    "fixture_classes": 9,
    "fixture_clusters": 2,
    "fixture_dim": 16,
    "fixture_count": 1000,
    "fixture_separation": 3.0,
    "fixture_noise": 1.0,
}

_BOOL_KEYS = {"normalize"}
_INT_KEYS = {"knn", "per_class", "epochs", "batch_size", "runs", "parallel", "seed",
             "max_passes", "fixture_seed", "fixture_classes", "fixture_clusters",
             "fixture_dim", "fixture_count"}
_FLOAT_KEYS = {"eta", "epsilon", "teleport", "rho", "tau", "lr", "test_fraction",
               "fixture_separation", "fixture_noise"}


def _parse_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in PIPELINE_DEFAULTS:
            raise ValueError(f"{path}:{lineno}: unknown option {key!r}")
        if key in _BOOL_KEYS:
            values[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    return values


def _resolve(args, file_values: dict) -> dict:
    """flag > config file > default, per option."""
    merged = dict(PIPELINE_DEFAULTS)
    merged.update(file_values)
    for key in PIPELINE_DEFAULTS:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            merged[key] = cli_value
    return merged


def _add_pipeline_flags(parser: argparse.ArgumentParser, with_fixture: bool = True):
    parser.add_argument("--config", help="key = value options file")
    parser.add_argument("--embeddings", help="binary embedding pool to operate on")
    parser.add_argument("--eta", type=float, help="softmax weight threshold (threshold mode)")
    parser.add_argument("--knn", type=int, help="neighbor count (knn mode)")
    parser.add_argument("--epsilon", type=float, help="distance regularizer")
    parser.add_argument("--normalize", action="store_const", const=True, default=None,
                        help="L2-normalize embeddings before distances")
    parser.add_argument("--teleport", type=float, help="teleport probability of the walk")
    parser.add_argument("--metric", choices=sorted(METRIC_NAMES), help="selection metric")
    parser.add_argument("--scalarization", choices=("l2", "sum"),
                        help="modular centrality scalarization")
    parser.add_argument("--per-class", dest="per_class", type=int,
                        help="items to select per class")
    parser.add_argument("--rho", type=float, help="fraction of positives kept above the boundary")
    parser.add_argument("--tau", type=float, help="boundary margin")
    parser.add_argument("--lr", type=float, help="SGD learning rate")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--neg-hinge", dest="neg_hinge", choices=sorted(HINGE_NAMES),
                        help="negative hinge form")
    parser.add_argument("--runs", type=int, help="number of seeded runs")
    parser.add_argument("--parallel", type=int,
                        help="worker processes for runs (default sequential)")
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--test-fraction", dest="test_fraction", type=float)
    parser.add_argument("--max-passes", dest="max_passes", type=int,
                        help="optimizer sweep limit")
    parser.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    if with_fixture:
        parser.add_argument("--fixture-seed", dest="fixture_seed", type=int)
        parser.add_argument("--fixture-classes", dest="fixture_classes", type=int)
        parser.add_argument("--fixture-clusters", dest="fixture_clusters", type=int)
        parser.add_argument("--fixture-dim", dest="fixture_dim", type=int)
        parser.add_argument("--fixture-count", dest="fixture_count", type=int)
        parser.add_argument("--fixture-separation", dest="fixture_separation", type=float)
        parser.add_argument("--fixture-noise", dest="fixture_noise", type=float)


def _graph_config(options: dict) -> GraphConfig:
    if options["eta"] is not None and options["knn"] is not None:
        raise SystemExit("choose one graph mode: --eta or --knn")
    if options["knn"] is not None:
        return GraphConfig(mode="knn", k=options["knn"], epsilon=options["epsilon"],
                           normalize=options["normalize"])
    eta = options["eta"] if options["eta"] is not None else 0.004
    return GraphConfig(mode="threshold", eta=eta, epsilon=options["epsilon"],
                       normalize=options["normalize"])


def _pipeline_config(options: dict) -> PipelineConfig:
    fixture = None
    if options["embeddings"] is None:
        fixture = FixtureSpec(
            seed=options["fixture_seed"],
            num_classes=options["fixture_classes"],
            clusters_per_class=options["fixture_clusters"],
            dim=options["fixture_dim"],
            count_per_class=options["fixture_count"],
            separation=options["fixture_separation"],
            noise_sigma=options["fixture_noise"],
        )
    return PipelineConfig(
        embeddings_path=options["embeddings"],
        fixture=fixture,
        graph=_graph_config(options),
        flow=FlowConfig(teleport=options["teleport"]),
        optimizer=OptimizerConfig(seed=options["seed"], max_passes=options["max_passes"]),
        metric=SelectionMetric(variant=METRIC_NAMES[options["metric"]],
                               scalarization=options["scalarization"]),
        loss=LossConfig(rho=options["rho"], tau=options["tau"],
                        learning_rate=options["lr"], epochs=options["epochs"],
                        batch_size=options["batch_size"], seed=options["seed"],
                        negative_hinge=HINGE_NAMES[options["neg_hinge"]]),
        per_class=options["per_class"],
        runs=options["runs"],
        test_fraction=options["test_fraction"],
        seed=options["seed"],
        out_dir=options["out_dir"],
        parallel_runs=options["parallel"],
    )


def _load_options(args) -> dict:
    file_values = _parse_config_file(args.config) if getattr(args, "config", None) else {}
    return _resolve(args, file_values)


def _print_summary_table(summary: dict) -> None:
    print(f"mode: {summary['mode']}")
    print(f"{'run':>4} {'seed':>12} {'accuracy':>10} {'macro_f1':>10} {'macro_auc':>10}")
    for row in summary["runs"]:
        print(f"{row['run']:>4} {row['seed']:>12} {row['accuracy']:>10.6f} "
              f"{row['macro_f1']:>10.6f} {row['macro_auc']:>10.6f}")
    mean, std = summary["mean"], summary["std"]
    print(f"{'mean':>17} {mean['accuracy']:>10.6f} {mean['macro_f1']:>10.6f} "
          f"{mean['macro_auc']:>10.6f}")
    print(f"{'std':>17} {std['accuracy']:>10.6f} {std['macro_f1']:>10.6f} "
          f"{std['macro_auc']:>10.6f}")


def cmd_gen_fixture(args) -> int:
    spec = FixtureSpec(seed=args.seed, num_classes=args.classes,
                       clusters_per_class=args.clusters, dim=args.dim,
                       count_per_class=args.count, separation=args.separation,
                       noise_sigma=args.noise)
    dataset = generate_fixture(spec)
    write_embeddings(dataset, args.out)
    print(f"wrote {len(dataset)} items (dim={dataset.dim}, classes={dataset.num_classes}) to {args.out}")
    return 0


def cmd_ingest(args) -> int:
    dataset = read_csv_embeddings(args.csv, num_classes=args.classes)
    write_embeddings(dataset, args.out)
    print(f"ingested {len(dataset)} items (dim={dataset.dim}, classes={dataset.num_classes}) to {args.out}")
    return 0


def cmd_graph(args) -> int:
    options = _load_options(args)
    dataset = read_embeddings(_require(options, "embeddings"))
    graph = build_class_graph(dataset, args.class_label, _graph_config(options))
    dump_graph(graph, args.out)
    print(f"class {args.class_label}: {graph.num_nodes} nodes, {graph.num_edges} edges -> {args.out}")
    return 0


def cmd_detect(args) -> int:
    logging.getLogger("infodist").setLevel(logging.INFO)
    options = _load_options(args)
    dataset = read_embeddings(_require(options, "embeddings"))
    graph = build_class_graph(dataset, args.class_label, _graph_config(options))
    flow = FlowConfig(teleport=options["teleport"])
    opt = OptimizerConfig(seed=options["seed"] ^ args.class_label,
                          max_passes=options["max_passes"])
    partition, final = detect_communities(graph, flow, opt)
    sizes = partition.module_sizes()
    print(f"class {args.class_label}: {partition.num_modules} communities, "
          f"codelength {final:.12g}")
    print("sizes: " + ",".join(str(int(s)) for s in np.sort(sizes)[::-1]))
    return 0


def cmd_select(args) -> int:
    options = _load_options(args)
    dataset = read_embeddings(_require(options, "embeddings"))
    selection = distill(dataset, _graph_config(options),
                        FlowConfig(teleport=options["teleport"]),
                        OptimizerConfig(seed=options["seed"], max_passes=options["max_passes"]),
                        SelectionMetric(variant=METRIC_NAMES[options["metric"]],
                                        scalarization=options["scalarization"]),
                        options["per_class"])
    write_selection(selection, args.out)
    if args.summary_out:
        write_selection_summary(selection, args.summary_out)
    print(f"selected {selection.all_ids().size} items -> {args.out}")
    return 0


def cmd_train(args) -> int:
    options = _load_options(args)
    dataset = read_embeddings(_require(options, "embeddings"))
    selection = read_selection(args.selection)
    loss = LossConfig(rho=options["rho"], tau=options["tau"],
                      learning_rate=options["lr"], epochs=options["epochs"],
                      batch_size=options["batch_size"], seed=options["seed"],
                      negative_hinge=HINGE_NAMES[options["neg_hinge"]])
    model = train(dataset, selection, loss)
    save_classifier(model, args.out)
    print(f"trained on {selection.all_ids().size} items -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    dataset = read_embeddings(args.embeddings)
    model = load_classifier(args.model)
    report = evaluate_probabilities(model.predict_proba(dataset.vectors),
                                    dataset.labels, dataset.num_classes)
    sys.stdout.write(report.to_text())
    if args.json_out:
        Path(args.json_out).write_text(report.to_json(), encoding="utf-8")
    return 0


def cmd_pipeline(args) -> int:
    config = _pipeline_config(_load_options(args))
    summary = run_pipeline(config)
    _print_summary_table(summary)
    print(f"summary JSON under {config.out_dir}")
    return 0


def cmd_baseline(args) -> int:
    config = _pipeline_config(_load_options(args))
    paired = run_paired(config)
    _print_summary_table(paired["infodist"])
    print()
    _print_summary_table(paired["random"])
    print()
    deltas = paired["delta"]["accuracy"]["per_run"]
    print("accuracy delta per run (selected - random): "
          + ", ".join(f"{d:+.6f}" for d in deltas))
    print(f"mean accuracy delta: {paired['delta']['accuracy']['mean']:+.6f}")
    return 0


def _require(options: dict, key: str):
    if options[key] is None:
        raise SystemExit(f"missing required option --{key.replace('_', '-')}")
    return options[key]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infodist",
                                     description="community-aware dataset distillation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-fixture", help="write a seeded synthetic pool")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=9)
    p.add_argument("--clusters", type=int, default=2)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--count", type=int, default=1000, help="items per class")
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.set_defaults(func=cmd_gen_fixture)

    p = sub.add_parser("ingest", help="convert CSV embeddings to the binary format")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("graph", help="build and dump one class graph")
    p.add_argument("--class-label", dest="class_label", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p, with_fixture=False)
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("detect", help="community detection for one class")
    p.add_argument("--class-label", dest="class_label", type=int, required=True)
    _add_pipeline_flags(p, with_fixture=False)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("select", help="distill the full pool")
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out", dest="summary_out", default=None)
    _add_pipeline_flags(p, with_fixture=False)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train on a selection file")
    p.add_argument("--selection", required=True)
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p, with_fixture=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a pool")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--json-out", dest="json_out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="full distillation pipeline over seeded runs")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("baseline", help="paired run against random selection")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
