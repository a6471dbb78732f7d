"""Finite-sample Bayesian inference for two-community stochastic block models.

Exact posterior enumeration over all canonical labelings, a Metropolis
sampler for larger graphs, and the conversion of credible sets into
frequentist confidence sets via non-asymptotic concentration bounds.
"""

from .core import (
    CHERNOFF_HELLINGER,
    KESTEN_STIGUM,
    Assignment,
    Graph,
    PhaseParams,
    SbmParams,
    SuffStats,
    balanced_assignment,
    canonicalize,
    edge_change_counts,
    hamming_and_k,
    hellinger_affinity,
    log_likelihood,
    min_edge_changes,
    random_assignment,
    read_assignment,
    read_graph,
    sample_graph,
    suff_stats,
    write_assignment,
    write_graph,
)
from .credconf import (
    ALMOST,
    EXACT,
    BoundDivergenceError,
    ConfidenceReport,
    CredibleSet,
    EnlargedSet,
    binomial_sum_bounds,
    compound_exp_bounds,
    condition_value,
    confidence_floor,
    credible_set,
    critical_n,
    enlarge,
    enlargement_radius,
    plan_strategy,
    recovery_bound_almost,
    recovery_bound_exact,
    required_level,
)
from .experiments import (
    BoundCheckResult,
    CoverageResult,
    EarlyStoppingRow,
    concentration_experiment,
    coverage_experiment,
    early_stopping_study,
    lr_test_experiment,
)
from .mcmc import (
    ChainConfig,
    EmpiricalPosterior,
    ReducibleChainError,
    iter_chain,
    run_chain,
    tv_distance,
)
from .posterior import (
    Ball,
    CapacityError,
    Complement,
    DegeneratePosteriorError,
    PosteriorTable,
    Singleton,
    SizeClass,
    assignment_from_index,
    assignment_index,
    enumerate_posterior,
    query_mass,
    top_assignments,
)

__version__ = "0.1.0"
