"""Self-consistency error estimation for repeated LLM calls.

Estimate how often fresh samples disagree with a model's majority label,
plan how a fixed call budget should split into prompts x repeats, and
verify the estimator's mean-squared-error bound exactly and by
simulation.
"""

__version__ = "0.1.0"

from .binomial import (
    BiasDecomposition,
    LogFactorialBounds,
    NUMERIC,
    bias_exact,
    bias_tail_identity,
    bias_upper_bound,
    binom_log_pmf,
    binom_pmf_vector,
    central_binom_ratio,
    expected_plugin_error,
    log_factorial,
    plugin_variance_exact,
    robbins_bounds,
    robbins_sandwich_slack,
    stirling_residual,
)
from .estimator import (
    DomainEstimate,
    PromptDomain,
    PromptSpec,
    ResponseCounts,
    domain_estimate,
    domain_true_error,
    per_prompt_estimate,
    true_error,
)
from .planner import (
    BoundBreakdown,
    BudgetPlan,
    bound_value,
    continuous_optimum,
    integer_plan,
)
from .simulate import (
    CorrelationModel,
    DecompositionTerms,
    ExperimentConfig,
    ExperimentReport,
    exact_mse_oracle,
    mse_sweep,
    replicate_rng,
    run_experiment,
    run_trial,
    sample_counts_correlated,
    sample_counts_iid,
    sample_prompt,
)
from .sources import (
    ExternalSource,
    ReplayRecord,
    counts_from_record,
    open_replay,
    record_from_counts,
    write_replay,
)

__all__ = [name for name in dir() if not name.startswith("_")]
