"""End-to-end experiment orchestration: multi-seed runs, ablation toggles,
grid search over tuning hyper-parameters, and report aggregation.

The pipeline per seed: split -> align -> encode -> (optional subgraph view)
-> centroids -> entropy report -> (optional) augmentation -> complementary
labels -> prompt tuning -> ensemble prediction -> scoring. The tuning phase
never sees test labels; the complementary-label disagreement rate in the
report is diagnostic, computed at scoring time.
"""

import itertools
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .align import svd_align
from .centroids import augment, complementary_labels, entropy_report, init_centroids
from .encoder import encode, load_gcn_params
from .errors import DataError, NumericalError
from .graph import load_graph, split_labels
from .prompts import TuneConfig, TuningTask, predict, tune
from .pretrain import PretrainConfig, pretrain
from .views import graph_view, load_graph_collection, subgraph_view


def accuracy(preds, truth):
    """Fraction of matching labels."""
    preds = np.asarray(preds)
    truth = np.asarray(truth)
    if preds.shape != truth.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {truth.shape}")
    if preds.size == 0:
        raise ValueError("accuracy of empty prediction vector")
    return float(np.mean(preds == truth))


@dataclass
class ExperimentConfig:
    # data/model sources; in-memory fields win over paths
    target_dir: str = ""
    source_dirs: list = field(default_factory=list)
    model_path: str = ""
    graph: object = None
    params: object = None
    # pipeline toggles (the ablation lattice) and task mode
    use_augmentation: bool = True
    use_centroid_prompt: bool = True
    use_layer_prompt: bool = True
    task: str = "node"
    view: str = "raw"  # raw | subgraph (node task only)
    hops: int = 1
    # hyper-parameters; d_a = 0 inherits the model's input dim (100 when
    # pre-training from scratch)
    tune: TuneConfig = field(default_factory=TuneConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    n_aug: int = 10
    shots: int = 1
    d_a: int = 0
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])


@dataclass
class SeedResult:
    seed: int
    test_accuracy: float  # None when test scoring is suppressed
    val_accuracy: float
    pivot_layer: int
    comp_disagreement: float
    phase_seconds: dict
    predictions: np.ndarray
    test_nodes: np.ndarray


@dataclass
class RunReport:
    seeds: list
    per_seed: list

    @property
    def test_accuracies(self):
        return [r.test_accuracy for r in self.per_seed]

    @property
    def mean_accuracy(self):
        vals = [a for a in self.test_accuracies if a is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def std_accuracy(self):
        vals = [a for a in self.test_accuracies if a is not None]
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1))

    @property
    def mean_val_accuracy(self):
        return float(np.mean([r.val_accuracy for r in self.per_seed]))


def _resolve_params(cfg):
    if cfg.params is not None:
        return cfg.params
    if cfg.model_path:
        return load_gcn_params(cfg.model_path)
    if cfg.source_dirs:
        graphs = [load_graph(d) for d in cfg.source_dirs]
        d_a = cfg.d_a or 100
        aligned = [svd_align(g.features, d_a) for g in graphs]
        return pretrain(graphs, aligned, cfg.pretrain)
    raise DataError("no model: provide params, a model path, or source dirs")


def _node_embedding_view(g, params, cfg):
    # the target must align into the dimension the encoder was trained on
    if cfg.d_a and cfg.d_a != params.dims[0]:
        raise DataError(
            f"alignment dim {cfg.d_a} != encoder input dim {params.dims[0]}"
        )
    aligned = svd_align(g.features, params.dims[0])
    emb = encode(g, aligned, params)
    if cfg.view == "subgraph":
        return subgraph_view(g, emb, cfg.hops)
    return emb


def _graph_embedding_view(graphs, params):
    # one SVD over the collection's stacked features, sliced back per graph
    from .align import AlignedFeatures

    stacked = np.concatenate([g.features for g in graphs], axis=0)
    aligned_all = svd_align(stacked, params.dims[0]).matrix
    embs = []
    pos = 0
    for g in graphs:
        part = AlignedFeatures(
            matrix=aligned_all[pos:pos + g.num_nodes], target_dim=params.dims[0]
        )
        pos += g.num_nodes
        embs.append(encode(g, part, params))
    return graph_view(graphs, embs)


def run_seed(view, labels, num_classes, cfg, seed, score_test=True):
    """One pipeline pass over an already-encoded embedding view."""
    times = {}
    t0 = time.perf_counter()
    split = split_labels(labels, num_classes, cfg.shots, seed)
    cents = init_centroids(view, split)
    report = entropy_report(view, cents, split.test_nodes)
    n_aug = cfg.n_aug if cfg.use_augmentation else 0
    aug = augment(report, split, n_aug)
    comp = complementary_labels(view, cents, report.pivot_layer, split.test_nodes)
    times["adapt"] = time.perf_counter() - t0

    task = TuningTask(
        fs_nodes=aug.combined_nodes,
        fs_labels=aug.combined_labels,
        test_nodes=split.test_nodes,
        comp_labels=comp,
    )
    t0 = time.perf_counter()
    prompts = tune(
        view,
        task,
        cents,
        replace(cfg.tune, seed=seed),
        split.val_nodes,
        labels[split.val_nodes],
        freeze_beta=not cfg.use_centroid_prompt,
        freeze_eta=not cfg.use_layer_prompt,
    )
    times["tune"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    val_acc = accuracy(
        predict(view, cents, prompts, split.val_nodes), labels[split.val_nodes]
    ) if split.val_nodes.size else 0.0
    preds = predict(view, cents, prompts, split.test_nodes)
    times["predict"] = time.perf_counter() - t0

    test_acc = None
    disagreement = float("nan")
    if score_test:
        truth = labels[split.test_nodes]
        test_acc = accuracy(preds, truth)
        disagreement = float(np.mean(comp != truth))
    return SeedResult(
        seed=seed,
        test_accuracy=test_acc,
        val_accuracy=val_acc,
        pivot_layer=report.pivot_layer,
        comp_disagreement=disagreement,
        phase_seconds=times,
        predictions=preds,
        test_nodes=split.test_nodes,
    )


def _with_phase(phase, exc):
    """Re-raise the same error type with the failing phase prepended."""
    raise type(exc)(f"[{phase}] {exc}") from exc


def run_experiment(cfg, score_test=True):
    """Full multi-seed run; returns an aggregated RunReport.

    Errors carry the failing phase in their message.
    """
    try:
        params = _resolve_params(cfg)
    except (DataError, NumericalError, ValueError, OSError) as exc:
        _with_phase("pretrain", exc)
    t0 = time.perf_counter()
    try:
        if cfg.task == "graph":
            if cfg.graph is not None:
                raise DataError("graph task requires a collection directory")
            graphs, labels, num_classes = load_graph_collection(cfg.target_dir)
            view = _graph_embedding_view(graphs, params)
        else:
            g = cfg.graph if cfg.graph is not None else load_graph(cfg.target_dir)
            view = _node_embedding_view(g, params, cfg)
            labels, num_classes = g.labels, g.num_classes
    except (DataError, NumericalError, ValueError, OSError) as exc:
        _with_phase("encode", exc)
    encode_seconds = time.perf_counter() - t0

    per_seed = []
    for seed in cfg.seeds:
        try:
            result = run_seed(view, labels, num_classes, cfg, seed, score_test)
        except (DataError, NumericalError, ValueError, OSError) as exc:
            _with_phase(f"seed {seed}", exc)
        result.phase_seconds["encode"] = encode_seconds / len(cfg.seeds)
        per_seed.append(result)
    return RunReport(seeds=list(cfg.seeds), per_seed=per_seed)


def grid_search(cfg, grid):
    """Pick the config with the best mean validation accuracy.

    grid maps any of {gamma, n_aug, alpha} to candidate lists; candidates are
    visited in itertools.product order (gamma outer, alpha inner) and ties go
    to the first. Test accuracy is only computed for the winner.
    """
    gammas = grid.get("gamma", [cfg.tune.gamma])
    n_augs = grid.get("n_aug", [cfg.n_aug])
    alphas = grid.get("alpha", [cfg.tune.alpha])
    if not (gammas and n_augs and alphas):
        raise ValueError("grid axes must be non-empty")

    best_cfg = None
    best_val = -1.0
    for gamma, n_aug, alpha in itertools.product(gammas, n_augs, alphas):
        cand = replace(
            cfg, tune=replace(cfg.tune, gamma=gamma, alpha=alpha), n_aug=n_aug
        )
        report = run_experiment(cand, score_test=False)
        if report.mean_val_accuracy > best_val:
            best_val = report.mean_val_accuracy
            best_cfg = cand
    return best_cfg, run_experiment(best_cfg, score_test=True)


def format_report(report):
    lines = ["seed\ttest_acc\tval_acc\tpivot\tcomp_disagreement"]
    for r in report.per_seed:
        acc = "-" if r.test_accuracy is None else f"{r.test_accuracy:.4f}"
        lines.append(
            f"{r.seed}\t{acc}\t{r.val_accuracy:.4f}\t{r.pivot_layer}"
            f"\t{r.comp_disagreement:.4f}"
        )
    if report.mean_accuracy is not None:
        lines.append(
            f"mean\t{report.mean_accuracy:.4f}\tstd\t{report.std_accuracy:.4f}"
        )
    return "\n".join(lines) + "\n"
