"""Immersed-boundary kernel weights via constrained quadratic minimization.

Construct moving-least-squares kernels in closed form or as
equality-constrained QPs, restrict their support to one side of an
interface, bound the weights with an active-set box-QP solver, build
Peskin-style four-point kernels per axis in closed form, and drive the
whole machinery through grid interpolation/spreading operators and a
reproducible circular-interface experiment.
"""

from .errors import (
    DegenerateDomain,
    IBKernelError,
    Infeasible,
    InsufficientSupport,
    LengthMismatch,
    MaxIterationsExceeded,
    NotSPD,
    NotSPDOnNullSpace,
    RankDeficientConstraints,
    StencilOutsideDomain,
)
from .linalg import DEFAULT_TOLERANCES, KKTSystem, ToleranceSet, solve_kkt, solve_spd
from .kernels import (
    BasisDegree,
    KernelSource,
    KernelSystem,
    KernelWeights,
    PolynomialBasis,
    SolveMode,
    WeightFunction,
    WeightKind,
    assemble_system,
    build_basis,
    eval_psi4,
    eval_psi6,
    generating_function_closed_form,
    gram,
    quasi_interpolate,
    solve_problem_A,
    tensor_weight,
)
from .qpsolve import (
    FeasibilityReport,
    KKTReport,
    Peskin4Weights,
    QPProblem,
    QPSolution,
    check_kkt,
    phase1_feasible,
    solve_box_qp,
    solve_eq_qp,
    solve_generating_qp,
    solve_peskin4,
    solve_soft_qp,
)
from .onesided import (
    KernelBounds,
    SideMask,
    SignedDistance,
    classify_side,
    generate_one_sided_kernel,
    restrict_weights,
)
from .ibops import (
    CartesianGrid,
    GridField,
    KernelStrategy,
    MarkerSet,
    Stencil,
    interpolate,
    make_grid,
    sample_field,
    spread,
    support_stencil,
)
from .experiments import (
    CASE_BOUNDS,
    CircleCaseConfig,
    ErrorTable,
    MarkerResult,
    compare_kernels,
    run_circle_case,
    validate_moments,
)

__version__ = "0.1.0"
