"""Variational solver for double-phase Robin/Neumann eigenproblems.

Discretizes the two-exponent gradient energy with Robin or Neumann boundary
weights on rectangles, provides the variable-exponent norms the analysis
lives in, and ships one solver per existence regime together with spectral
threshold estimators and lambda sweeps.
"""

from .energy import (
    EnergyError,
    GradientAssembly,
    ThresholdReport,
    apply_L,
    c_star_quotient,
    coercivity_constants,
    constraint_G1,
    constraint_G2,
    estimate_c_star,
    lambda_cap,
    monotonicity_gap,
    phi,
    phi_grad,
    rayleigh_q,
)
from .fields import (
    CaseClass,
    CriticalExponentField,
    ExponentField,
    FieldError,
    ProblemConfig,
    Tolerances,
    WeightField,
    build_problem,
    classify_case,
    critical_exponent,
    eval_xy,
    make_exponent,
    make_weight,
    pointwise_max_exponent,
)
from .mesh import (
    MeshDomain,
    build_rectangle_mesh,
    integrate_boundary,
    integrate_volume,
    load_field,
    save_field,
)
from .solvers import (
    BelowThresholdError,
    SolveReport,
    SweepRecord,
    constrained_global_minimize,
    disjoint_support_seeds,
    eigen_sweep,
    lagrange_residuals,
    minimize_descent,
    minimize_in_ball,
    mountain_pass,
    mountain_zeta,
    nehari_minimize,
    nehari_project,
    sigma_threshold,
    solve_sublinear_family,
)
from .spaces import (
    DiscreteFunction,
    holder_pair_bound,
    lebesgue_modular,
    luxemburg_norm,
    norm_m1,
    sobolev_beta_modular,
    sobolev_beta_norm,
)

__version__ = "0.1.0"
