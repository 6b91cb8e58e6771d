"""Command-line interface.

Subcommands: pretrain, align, split, tune, predict, eval, run, grid,
inspect-entropy, export-centroids, perturb. Exit codes: 0 ok, 1 usage,
2 data error, 3 numerical error.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from .align import svd_align
from .backend import active_backend
from .centroids import augment, complementary_labels, entropy_report, init_centroids
from .encoder import encode, load_gcn_params, save_gcn_params
from .errors import DataError, NumericalError, UsageError
from .graph import (
    Graph,
    load_graph,
    load_split,
    make_split,
    perturb_graph,
    save_graph,
    save_split,
)
from .harness import (
    ExperimentConfig,
    accuracy,
    format_report,
    grid_search,
    run_experiment,
)
from .prompts import (
    TuneConfig,
    TuningTask,
    load_prompts,
    predict,
    prompted_centroids,
    save_prompts,
    tune,
)
from .pretrain import PretrainConfig, pretrain
from .views import subgraph_view

_BOOL_KEYS = {"use_augmentation", "use_centroid_prompt", "use_layer_prompt"}
_INT_KEYS = {
    "d_a", "hidden_dim", "num_layers", "epochs", "neg_ratio",
    "steps", "patience", "n_aug", "shots", "hops",
}
_FLOAT_KEYS = {
    "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
    "edge_holdout_fraction", "tau", "gamma", "alpha", "beta_init_std",
}
_STR_KEYS = {"task", "view"}
_LIST_KEYS = {"seeds"}
KNOWN_KEYS = _BOOL_KEYS | _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _LIST_KEYS


def parse_config_file(path):
    """key=value lines; blank lines and # comments allowed; unknown keys error."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path} line {ln}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in KNOWN_KEYS:
                raise UsageError(f"{path} line {ln}: unknown config key {key!r}")
            try:
                if key in _BOOL_KEYS:
                    if raw.lower() not in ("true", "false", "1", "0"):
                        raise ValueError(raw)
                    values[key] = raw.lower() in ("true", "1")
                elif key in _INT_KEYS:
                    values[key] = int(raw)
                elif key in _FLOAT_KEYS:
                    values[key] = float(raw)
                elif key in _LIST_KEYS:
                    values[key] = [int(x) for x in raw.split(",") if x]
                else:
                    values[key] = raw
            except ValueError:
                raise UsageError(f"{path} line {ln}: bad value for {key}: {raw!r}")
    return values


def build_experiment_config(values):
    tune_kwargs = {
        k: values[k]
        for k in ("tau", "gamma", "alpha", "steps", "beta_init_std", "patience")
        if k in values
    }
    pre_kwargs = {
        k: values[k]
        for k in (
            "learning_rate", "epochs", "neg_ratio", "adam_beta1", "adam_beta2",
            "adam_eps", "hidden_dim", "num_layers", "edge_holdout_fraction",
        )
        if k in values
    }
    top_kwargs = {
        k: values[k]
        for k in (
            "use_augmentation", "use_centroid_prompt", "use_layer_prompt",
            "task", "view", "hops", "n_aug", "shots", "d_a", "seeds",
        )
        if k in values
    }
    return ExperimentConfig(
        tune=TuneConfig(**tune_kwargs),
        pretrain=PretrainConfig(**pre_kwargs),
        **top_kwargs,
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def _float_list(text):
    return [float(x) for x in text.split(",") if x]


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="override seed")
    parser.add_argument("--config", default=default, help="key=value config file")
    parser.add_argument("--threads", type=int, default=default,
                        help="numba thread count (kernels are single-threaded)")


def build_parser():
    parser = _Parser(prog="ttprompt", description=__doc__)
    _global_flags(parser, suppress=False)
    # global flags are also accepted after the subcommand
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(
        dest="command", required=True, parser_class=lambda **kw: _Parser(
            parents=[common], **kw
        )
    )

    p = sub.add_parser("pretrain", help="link-prediction pre-training")
    p.add_argument("--sources", required=True, help="comma-separated source dirs")
    p.add_argument("--out", required=True)

    p = sub.add_parser("align", help="SVD-align a dataset's features")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=None)

    p = sub.add_parser("split", help="write a few-shot split")
    p.add_argument("--graph", required=True)
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("tune", help="tune prompts on a target graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="write test-node predictions")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="accuracy of a predictions file")
    p.add_argument("--preds", required=True)
    p.add_argument("--graph", required=True)

    p = sub.add_parser("run", help="end-to-end multi-seed experiment")
    p.add_argument("--target", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--sources", default=None)
    p.add_argument("--task", choices=("node", "graph"), default=None)
    p.add_argument("--out", default=None, help="report TSV path")

    p = sub.add_parser("grid", help="grid search over gamma/n_aug/alpha")
    p.add_argument("--target", required=True)
    p.add_argument("--model", default=None)
    p.add_argument("--sources", default=None)
    p.add_argument("--task", choices=("node", "graph"), default=None)
    p.add_argument("--grid-gamma", type=_float_list, default=None)
    p.add_argument("--grid-n-aug", type=_int_list, default=None)
    p.add_argument("--grid-alpha", type=_float_list, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("inspect-entropy", help="per-layer mean entropy TSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", required=True)

    p = sub.add_parser("export-centroids", help="centroids as TSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--prompts", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("perturb", help="edge-drop / feature-shuffle a dataset")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--edge-drop", type=float, default=0.0)
    p.add_argument("--feature-shuffle", type=float, default=0.0)
    p.add_argument("--split", default=None,
                   help="protect fs/val nodes listed in this split file")
    return parser


def _load_pipeline(args, cfg):
    """Shared loader for tune/predict/inspect/export."""
    g = load_graph(args.graph)
    params = load_gcn_params(args.model)
    split = load_split(args.split, g)
    aligned = svd_align(g.features, params.dims[0])
    emb = encode(g, aligned, params)
    view = subgraph_view(g, emb, cfg.hops) if cfg.view == "subgraph" else emb
    cents = init_centroids(view, split)
    return g, split, view, cents


def _cmd_pretrain(args, cfg):
    dirs = [d for d in args.sources.split(",") if d]
    graphs = [load_graph(d) for d in dirs]
    d_a = cfg.d_a or 100
    aligned = [svd_align(g.features, d_a) for g in graphs]
    params = pretrain(graphs, aligned, cfg.pretrain)
    save_gcn_params(params, args.out)
    print(f"wrote {args.out} (layers={params.num_layers}, dims={params.dims})")
    return 0


def _cmd_align(args, cfg):
    g = load_graph(args.graph)
    dim = args.dim if args.dim is not None else (cfg.d_a or 100)
    aligned = svd_align(g.features, dim)
    out = Graph(
        g.num_nodes,
        g.csr_row_offsets,
        g.csr_col_indices,
        aligned.matrix,
        g.labels,
        g.num_classes,
    )
    save_graph(out, args.out)
    print(f"wrote {args.out} (feature_dim={dim})")
    return 0


def _cmd_split(args, cfg):
    g = load_graph(args.graph)
    seed = cfg.seeds[0]
    split = make_split(g, args.shots, seed)
    save_split(split, args.out)
    print(
        f"wrote {args.out} (fs={split.fs_nodes.size}, val={split.val_nodes.size},"
        f" test={split.test_nodes.size})"
    )
    return 0


def _cmd_tune(args, cfg):
    g, split, view, cents = _load_pipeline(args, cfg)
    report = entropy_report(view, cents, split.test_nodes)
    n_aug = cfg.n_aug if cfg.use_augmentation else 0
    aug = augment(report, split, n_aug)
    comp = complementary_labels(view, cents, report.pivot_layer, split.test_nodes)
    task = TuningTask(aug.combined_nodes, aug.combined_labels,
                      split.test_nodes, comp)
    prompts = tune(
        view, task, cents,
        replace(cfg.tune, seed=cfg.seeds[0]),
        split.val_nodes, g.labels[split.val_nodes],
        freeze_beta=not cfg.use_centroid_prompt,
        freeze_eta=not cfg.use_layer_prompt,
    )
    save_prompts(prompts, args.out)
    print(f"wrote {args.out} (pivot layer {report.pivot_layer})")
    return 0


def _cmd_predict(args, cfg):
    g, split, view, cents = _load_pipeline(args, cfg)
    prompts = load_prompts(args.prompts)
    preds = predict(view, cents, prompts, split.test_nodes)
    with open(args.out, "w", encoding="utf-8") as fh:
        for node, label in zip(split.test_nodes, preds):
            fh.write(f"{node}\t{label}\n")
    print(f"wrote {args.out} ({preds.size} predictions)")
    return 0


def _cmd_eval(args, cfg):
    g = load_graph(args.graph)
    nodes, preds = [], []
    with open(args.preds, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{args.preds} line {ln}: expected node_id<TAB>label")
            nodes.append(int(parts[0]))
            preds.append(int(parts[1]))
    nodes = np.asarray(nodes, dtype=np.int64)
    acc = accuracy(np.asarray(preds, dtype=np.int64), g.labels[nodes])
    print(f"accuracy\t{acc:.4f}")
    return 0


def _experiment_from_args(args, cfg):
    cfg = replace(cfg, target_dir=args.target)
    if args.model:
        cfg = replace(cfg, model_path=args.model)
    if args.sources:
        cfg = replace(cfg, source_dirs=[d for d in args.sources.split(",") if d])
    if args.task:
        cfg = replace(cfg, task=args.task)
    return cfg


def _print_report(report, out_path):
    print(format_report(report), end="")
    if report.mean_accuracy is not None:
        print(
            f"test accuracy {100 * report.mean_accuracy:.2f}%"
            f" +- {100 * report.std_accuracy:.2f} over {len(report.seeds)} seeds"
        )
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(format_report(report))


def _cmd_run(args, cfg):
    _print_report(run_experiment(_experiment_from_args(args, cfg)), args.out)
    return 0


def _cmd_grid(args, cfg):
    cfg = _experiment_from_args(args, cfg)
    grid = {}
    if args.grid_gamma:
        grid["gamma"] = args.grid_gamma
    if args.grid_n_aug:
        grid["n_aug"] = args.grid_n_aug
    if args.grid_alpha:
        grid["alpha"] = args.grid_alpha
    if not grid:
        raise UsageError("grid needs at least one of --grid-gamma/--grid-n-aug/--grid-alpha")
    best_cfg, report = grid_search(cfg, grid)
    print(
        f"best\tgamma={best_cfg.tune.gamma}\tn_aug={best_cfg.n_aug}"
        f"\talpha={best_cfg.tune.alpha}"
    )
    _print_report(report, args.out)
    return 0


def _cmd_inspect_entropy(args, cfg):
    _, split, view, cents = _load_pipeline(args, cfg)
    report = entropy_report(view, cents, split.test_nodes)
    print("layer\tmean_entropy\tis_pivot")
    for l, h in enumerate(report.mean_entropy):
        print(f"{l}\t{h:.6f}\t{int(l == report.pivot_layer)}")
    return 0


def _cmd_export_centroids(args, cfg):
    _, _, _, cents = _load_pipeline(args, cfg)
    if args.prompts:
        cents = prompted_centroids(cents, load_prompts(args.prompts))
    with open(args.out, "w", encoding="utf-8") as fh:
        for l, e in enumerate(cents.per_layer):
            for c, row in enumerate(e):
                vals = "\t".join(format(x, ".10g") for x in row)
                fh.write(f"{l}\t{c}\t{vals}\n")
    print(f"wrote {args.out}")
    return 0


def _cmd_perturb(args, cfg):
    g = load_graph(args.graph)
    protected = set()
    if args.split:
        split = load_split(args.split, g)
        protected = set(split.fs_nodes.tolist()) | set(split.val_nodes.tolist())
    out = perturb_graph(
        g, args.edge_drop, args.feature_shuffle, protected, cfg.seeds[0]
    )
    save_graph(out, args.out)
    print(
        f"wrote {args.out} (edges {g.num_edges // 2} -> {out.num_edges // 2})"
    )
    return 0


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "align": _cmd_align,
    "split": _cmd_split,
    "tune": _cmd_tune,
    "predict": _cmd_predict,
    "eval": _cmd_eval,
    "run": _cmd_run,
    "grid": _cmd_grid,
    "inspect-entropy": _cmd_inspect_entropy,
    "export-centroids": _cmd_export_centroids,
    "perturb": _cmd_perturb,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        values = parse_config_file(args.config) if args.config else {}
        cfg = build_experiment_config(values)
        if args.seed is not None:
            cfg = replace(
                cfg, seeds=[args.seed], pretrain=replace(cfg.pretrain, seed=args.seed)
            )
        if args.threads is not None:
            if args.threads < 1:
                raise UsageError("--threads must be >= 1")
            if active_backend() == "numba":
                import numba

                numba.set_num_threads(args.threads)
        return _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
