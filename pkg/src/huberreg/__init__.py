"""Huber-loss penalized estimators robust to adversarial response corruption.

Vector regression with an l1 penalty, trace regression with a nuclear
norm penalty, and matrix completion with an additional entrywise
constraint, plus the simulation, tuning, and diagnostic machinery used
to study their error rates.
"""

from .problems import (
    DimensionMismatchError,
    InfeasibleError,
    InternalInvariantError,
    MaskCovariates,
    ProblemValidationError,
    RegressionProblem,
    SolverResult,
    TraceProblem,
    TuningParams,
    design_adjoint,
    design_apply,
    trace_inner,
    validate_problem,
)
from .penalties import (
    HuberScale,
    grad_smooth_lasso,
    grad_smooth_trace,
    huber_deriv,
    huber_value,
    nuclear_norm,
    objective_lasso,
    objective_trace,
    project_inf_ball,
    singular_value_threshold,
    soft_threshold,
)
from .solvers import (
    JointResult,
    SolverConfig,
    directional_curvature,
    solve_adversarial_lasso,
    solve_joint_oracle,
    solve_matrix_completion,
    solve_matrix_cs,
)
from .datagen import (
    ContaminationSpec,
    CovariateSpec,
    NoiseSpec,
    child_rng,
    gen_low_rank,
    gen_problem,
    gen_sparse_beta,
    spikiness,
)
from .diagnostics import (
    DiagnosticsReport,
    TheoremInputs,
    empirical_mre,
    empirical_re,
    error_metrics,
    matrix_weight_apply,
    tuning_completion,
    tuning_lasso,
    tuning_matrix_cs,
)
from .experiments import (
    DEFAULT_ORACLE_MULTIPLIERS,
    ExperimentRecord,
    SlopeFit,
    SweepSpec,
    aggregate_medians,
    fit_rate_slope,
    read_results,
    run_sweep,
    run_trial,
    write_results,
)
from .bundles import read_meta, read_problem_bundle, write_problem_bundle

__version__ = "0.1.0"

__all__ = [
    "ContaminationSpec",
    "CovariateSpec",
    "DiagnosticsReport",
    "DimensionMismatchError",
    "ExperimentRecord",
    "HuberScale",
    "InfeasibleError",
    "InternalInvariantError",
    "JointResult",
    "MaskCovariates",
    "NoiseSpec",
    "ProblemValidationError",
    "RegressionProblem",
    "SlopeFit",
    "SolverConfig",
    "SolverResult",
    "DEFAULT_ORACLE_MULTIPLIERS",
    "SweepSpec",
    "TheoremInputs",
    "TraceProblem",
    "TuningParams",
    "aggregate_medians",
    "child_rng",
    "design_adjoint",
    "design_apply",
    "directional_curvature",
    "empirical_mre",
    "empirical_re",
    "error_metrics",
    "fit_rate_slope",
    "gen_low_rank",
    "gen_problem",
    "gen_sparse_beta",
    "grad_smooth_lasso",
    "grad_smooth_trace",
    "huber_deriv",
    "huber_value",
    "matrix_weight_apply",
    "nuclear_norm",
    "objective_lasso",
    "objective_trace",
    "project_inf_ball",
    "read_meta",
    "read_problem_bundle",
    "read_results",
    "run_sweep",
    "run_trial",
    "singular_value_threshold",
    "soft_threshold",
    "solve_adversarial_lasso",
    "solve_joint_oracle",
    "solve_matrix_completion",
    "solve_matrix_cs",
    "spikiness",
    "tuning_completion",
    "tuning_lasso",
    "tuning_matrix_cs",
    "trace_inner",
    "validate_problem",
    "write_problem_bundle",
    "write_results",
]
