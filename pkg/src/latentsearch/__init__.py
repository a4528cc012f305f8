"""Entropic latent variable discovery for pairs of discrete variables."""
__version__ = "0.1.0"

from .prob import (
    DistributionError,
    Joint2,
    MarginalSet,
    conditional_mutual_information,
    entropy,
    joint_from_posterior,
    marginal_entropies,
    marginal_set,
    mutual_information,
    random_posterior,
    sample_simplex,
)
from .search import (
    SearchConfig,
    SearchTrace,
    TradeoffPoint,
    best_point,
    frontier_sweep,
    latent_search,
    latent_search_step,
    loss,
    lower_envelope,
    projected_fd_gradient,
    run_search_grid,
    stationarity_residual,
)
from .baselines import (
    BaselineConfig,
    PlsaFactors,
    em_plsa,
    gradient_descent_search,
    loss_gradient,
    nmf_factorize,
    nmf_latent_diagnostics,
)
from .causal import (
    Graph,
    GraphVerdict,
    InferGraphConfig,
    ThresholdRule,
    apply_threshold_rule,
    infer_graph,
    rank_test,
)
from .synth import (
    CausalModel,
    ExperimentRecord,
    run_accuracy_experiment,
    run_scatter_experiment,
    sample_latent_model,
    sample_triangle_model,
)
from .skeleton import (
    CategoricalTable,
    PairDiagnostics,
    Skeleton,
    estimate_joint,
    load_table,
    pairwise_hmin,
    recover_skeleton,
)
