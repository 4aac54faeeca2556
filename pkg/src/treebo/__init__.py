"""Tree-structured additive GP-UCB Bayesian optimization."""

from .acquisition import (
    CostCounter,
    DiscretizedAxis,
    UCBAcquisition,
    beta,
    component_ucb,
    maximize_on_grid,
    msg_passing_continuous,
    msg_passing_discrete,
    zoom_strategy,
)
from .domain import (
    BoxDomain,
    ConfigError,
    Dataset,
    DependencyForest,
    HyperParams,
    InvalidForestError,
    RunConfig,
    components_of,
    validate_config,
)
from .gp import (
    PosteriorState,
    component_posterior,
    fit_hyperparameters,
    lml_gradient,
    log_marginal_likelihood,
)
from .kernel import (
    NumericalDegeneracyError,
    additive_gram,
    component_scale,
    kernel_eval,
    kernel_grad,
)
from .optimizer import RunTrace, run_oracle, run_random, run_tree_gp_ucb
from .structure import (
    StructureScorer,
    UnionFind,
    cycle_check,
    edge_posterior_logits,
    gibbs_sweep,
    mutate,
    tree_learning,
)

__version__ = "0.1.0"
