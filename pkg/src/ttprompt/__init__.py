"""ttprompt: test-time prompt tuning for frozen graph encoders."""

from .align import AlignedFeatures, svd_align
from .backend import active_backend
from .centroids import (
    AugmentedSplit,
    Centroids,
    EntropyReport,
    augment,
    complementary_labels,
    cosine_sim,
    entropy_report,
    init_centroids,
)
from .encoder import (
    GcnParams,
    LayerEmbeddings,
    NormalizedAdjacency,
    encode,
    load_gcn_params,
    normalize_adjacency,
    save_gcn_params,
)
from .errors import DataError, NumericalError, UsageError
from .graph import (
    FewShotSplit,
    Graph,
    build_graph,
    generate_sbm,
    load_graph,
    load_split,
    make_split,
    perturb_graph,
    save_graph,
    save_split,
    split_labels,
)
from .harness import (
    ExperimentConfig,
    RunReport,
    accuracy,
    grid_search,
    run_experiment,
    run_seed,
)
from .prompts import (
    PromptState,
    TuneConfig,
    TuningTask,
    class_prob,
    init_prompts,
    load_prompts,
    predict,
    prompted_centroids,
    save_prompts,
    tgcl_grads,
    tgcl_loss,
    tune,
)
from .pretrain import (
    PretrainConfig,
    init_gcn_params,
    lp_loss_and_grads,
    mann_whitney_auc,
    pretrain,
    sample_negative_edges,
)
from .views import EmbeddingView, graph_view, load_graph_collection, subgraph_view

__version__ = "0.1.0"
