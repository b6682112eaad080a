"""Optimal stopping boundaries for sequential two-treatment trials.

Solvers for the symmetric, asymmetric, and conjugate-normal boundary
problems, closed-form random-horizon thresholds, and independent
verification by binomial-tree value iteration and Monte Carlo simulation.
"""

from ._kernels import BACKEND
from .errors import (
    AnscombeError,
    BracketError,
    ConvergenceError,
    RangeError,
    ResourceError,
    SingularInputError,
    SolverError,
    ValidationError,
)
from .explicit import (
    ThresholdResult,
    lomax_boundary,
    lomax_threshold,
    maximin_exp_one_sided,
    maximin_exp_two_sided,
)
from .horizon import (
    ExponentialHorizon,
    FixedHorizon,
    HorizonModel,
    LomaxHorizon,
    TabulatedHorizon,
    f_tilde,
    f_tilde_derivative,
    horizon_from_json,
    horizon_mean,
    horizon_to_json,
)
from .normal_conjugate import (
    ClassicalComparison,
    StandardBoundary,
    asymptotic_cq,
    classical_rule_compare,
    posterior_mean_boundary,
    pvalue_approx,
    pvalue_boundary,
    r_of_s,
    s_of_r,
    solve_c,
    solve_cq,
    standard_boundary_from_csv,
    standard_boundary_to_csv,
    sum_boundaries,
)
from .numerics import (
    RootBracket,
    find_root,
    kummer_m,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
)
from .oracle import (
    PolicyValueEstimate,
    StandardizedReward,
    TrialReward,
    ValueGrid,
    extract_boundary,
    mc_mean_stop_time,
    mc_ou_discounted_value,
    mc_policy_value,
    mc_transformed_value,
    value_iteration,
)
from .priors import (
    DiscreteMixture,
    NormalConjugate,
    Prior,
    StandardizedScaling,
    SymmetricTwoPoint,
    from_standardized,
    h_function,
    is_symmetric,
    optimal_decision,
    prior_from_json,
    prior_to_json,
    to_standardized,
)
from .volterra import (
    AsymmetricSpec,
    Boundary,
    FixedPointResult,
    SolverConfig,
    boundary_from_csv,
    boundary_to_csv,
    kernel_K,
    kernel_diagonal,
    residual,
    solve_asymmetric,
    solve_fixed_point,
    solve_symmetric,
)

__version__ = "0.1.0"
