"""Fast-mixing parameter sets for discrete pairwise MRFs.

Bounds the Gibbs-sampling dependency matrix of a pairwise model, projects
parameters onto a norm-constrained fast-mixing set (Euclidean distance via a
smoothed Lagrangian dual, or any divergence via projected gradient descent),
and benchmarks the marginals of the projected models against exact inference
and variational baselines.
"""

from .mrf import (
    PairwiseMRF,
    gen_ising_grid,
    gen_potts_grid,
    gen_random_graph,
    load_model,
    save_model,
    unnormalized_log_prob,
)
from .exact import brute_force, exact_kl, gibbs_transition_operator, tree_marginals
from .dependency import (
    DependencyBound,
    MixingBudget,
    bound_edge,
    bound_matrix,
    exact_dependency,
    matrix_norm,
    mixing_time_bound,
)
from .normball import NormBall, project_inf_ball, project_l1, project_spectral_ball
from .projection import (
    ProjectionProblem,
    ProjectionResult,
    project_exact,
    project_smoothed,
)
from .gibbs import GibbsChain, SamplePool, conditional, estimate_marginals
from .errors import CapacityError, NumericError

__version__ = "0.1.0"
