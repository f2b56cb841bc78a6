"""Joint covariance-precision estimation by divergence-ball spectral shrinkage.

The estimator pulls every eigenvalue of a nominal covariance matrix toward
a scalar target 1/sqrt(tau), with intensity controlled by the radius rho of
a convex spectral-divergence ball around the nominal.  The shrunk
covariance and its exact inverse share the nominal's eigenbasis.
"""

__version__ = "0.1.0"

from .applications import (
    BacktestReport,
    RegressionFit,
    ab_learn_weights,
    ab_synthetic_experiment,
    ab_zscore,
    auc,
    loglog_regress,
    min_variance_portfolio,
    performance_metrics,
    radius_scaling_experiment,
    rolling_backtest,
    rx_scores,
    simplex_project,
)
from .divergences import (
    DivergenceKind,
    GeneratorEval,
    domain_check,
    generator_deriv,
    generator_eval,
    generator_value,
    matrix_divergence,
)
from .errors import (
    CovShrinkError,
    DegenerateVarianceError,
    DomainError,
    InvalidInputError,
    NonConvergenceError,
    ScalarMatrixError,
    ScalarNominalWarning,
    SingularMatrixError,
    UnsupportedDivergenceError,
    ZeroMatrixError,
)
from .estimator import (
    ShrinkageEstimate,
    combined_loss,
    estimate_record,
    frobenius_loss,
    kkt_residual,
    lw_linear,
    relative_eig_error,
    shrink,
    stein_loss,
)
from .linalg import (
    SpectralDecomposition,
    as_sym_matrix,
    condition_number,
    frobenius_inner,
    frobenius_norm,
    invert_spd,
    reconstruct,
    spectral_decompose,
    trace,
)
from .shrinkage import (
    DualSolution,
    ShrinkageProblem,
    closed_form_gamma_bound,
    dual_function,
    gamma_upper_bound,
    phi,
    rho_max,
    shrink_target,
    solve_dual,
    solve_dual_many,
)
from .synthetic import (
    Rng,
    make_ground_truth,
    random_orthogonal,
    sample_covariance,
    sample_mvn,
    wishart_sqmoment_oracle,
)
from .tuning import (
    DEFAULT_RADIUS_GRID,
    PLUGIN_KINDS,
    TuningResult,
    grid_search_radius,
    plug_in_radius,
    rho_star_asymptotic,
    tau_star,
)
