"""degenlab: numerical laboratory for widely degenerate parabolic systems.

Structure functions with p-growth only above the unit gradient ball, their
eps-regularizations with certified growth/ellipticity/monotonicity bounds,
explicit space-time solvers for the regularized Cauchy-Dirichlet problems,
and reproducible studies of convergence, maximum principles and gradient
sup-bounds.
"""

from .calculus import (
    ExponentTable,
    G_delta,
    H_lambda,
    MoserSequence,
    Phi,
    cutoff_pair,
    exponent_table,
    luxemburg_norm,
    moser_closed_form,
    moser_sequence,
    product_bounds,
)
from .errors import (
    BlowUpError,
    BranchMismatchError,
    DomainError,
    EmptyCylinderError,
    PreconditionError,
    RegimeError,
)
from .grids import (
    GridField,
    ParabolicCylinder,
    SpaceTimeGrid,
    cylinder_mean,
    cylinder_sup,
    divergence_of_flux,
    face_gradients,
    gradient,
    make_grid,
    steklov_average,
)
from .regularization import (
    A_eps,
    F_eps,
    Mollifier1D,
    RegularizedField,
    bilinear_form,
    certify_ellipticity,
    certify_field_convergence,
    certify_g_delta,
    certify_growth,
    certify_monotonicity,
    default_mollifier,
    g_delta_comparison,
    h_eps,
    monotonicity_gap,
    v_eps,
    v_eps_derivatives,
)
from .solver import (
    SolverConfig,
    SolverRun,
    SolverState,
    max_principle_monitor,
    solve,
    stable_dt,
    step,
    truncate_datum,
)
from .structure import (
    DegenerateField,
    StructureFunction,
    StructureParams,
    check_structure_conditions,
    make_prototype,
    prototype_F,
    prototype_params,
    vector_field_A,
)
from .studies import (
    StudyResult,
    StudySpec,
    moser_trace_of_field,
    run_study,
    study_eps_convergence,
    study_gradient_bound,
    study_max_principle,
    study_moser_trace,
    study_uniqueness,
)

__version__ = "0.1.0"
