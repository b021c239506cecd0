"""Spectral regularization for statistical inverse learning.

Estimate a Hilbert-space element f from noisy point evaluations of its
image under a forward operator at random design points.  The package
ships the model-problem machinery (closed-form eigensystems, source
conditions), three spectral filter families, the representer-based
estimator with its a-priori level rule, effective-dimension and
packing-based lower-bound diagnostics, Monte Carlo checks for the
finite-sample concentration bounds, and a CLI harness that reproduces
the theoretical convergence-rate slopes.
"""

from .cli import main
from .concentration import (
    CoverageReport,
    PerturbationReport,
    PreconditionError,
    check_neumann_inverse,
    check_noise_term,
    check_operator_hs_deviation,
    check_power_perturbation,
    check_weighted_operator_deviation,
    coverage_threshold,
    neumann_min_n,
    power_bound_constant,
    power_series_abs_sum,
)
from .effdim import (
    PriorClassReport,
    admissible_n,
    classify_priors,
    effdim_power_law_bound,
    effective_dimension,
    effective_dimension_tail,
    empirical_effective_dimension,
    strong_ratio_params,
)
from .estimator import (
    Estimate,
    check_qualification,
    error_norm,
    estimate_coefficients,
    fit,
    fit_spectral,
    lambda_rule,
    predict,
    rate_exponent,
    theoretical_rate,
    truncation_floor,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    RatePoint,
    RateReport,
    build_problem,
    config_template,
    fit_loglog_slope,
    parse_config,
    parse_config_file,
    run_rates,
    write_report,
)
from .minimax import (
    Codebook,
    EpsilonOutOfRange,
    FanoBudget,
    PackingSet,
    SearchExhausted,
    build_codebook,
    build_packing,
    fano_budget,
    kl_divergence,
    lower_rate,
    recipe_n,
)
from .problem import (
    ProblemModel,
    RadiusViolation,
    SourceFunction,
    eigensystem_consistency_check,
    forward_value,
    interpolation_norm,
    make_differentiation_problem,
    problem_from_table,
    problem_to_table,
    synthesize_source,
    verify_source_membership,
    with_reconstructed_kernel,
)
from .sampling import (
    Dataset,
    EmpiricalOperator,
    NonPositiveSemidefiniteError,
    build_empirical_operator,
    dataset_from_csv,
    dataset_to_csv,
    draw_dataset,
    noise_moment_scale,
)
from .spectral import (
    QualificationError,
    Regularizer,
    SpectrumError,
    UnknownMethodError,
    apply_matrix_function,
    intermediate_gamma,
    landweber_iterate,
    make_regularizer,
    qualification_sup,
)

__version__ = "0.1.0"
