"""Weighted Einstein-Hilbert functionals, Futaki invariants and Reeb cone data on toric polytopes."""

from .errors import (
    BranchLost,
    BSolveDiverged,
    ConekitError,
    ContinuationStalled,
    DomainViolation,
    HessianSingular,
    NewtonDiverged,
    NonNormalizedInput,
    PolytopeError,
    QuadratureNotConverged,
    ReebPositivityViolation,
    SolverError,
)
from .functionals import (
    EH,
    EH_tilde,
    EH_tilde_limit,
    ExtremalData,
    S_a,
    V_a,
    c_coeff,
    d_coeff,
    extremal_affine,
    futaki_param,
    futaki_vw,
    gradient,
    hessian,
    oracle_scal_v_1d,
)
from .pipeline import ReebSolution, WrongSign, cone_construct, k0_search, lambda_for, lambda_for_genus, report_sasaki_metadata
from .polytope import (
    AffineFunction,
    LabelledPolytope,
    QuadratureSpec,
    affine_range,
    integrate_boundary,
    integrate_interior,
    interval,
    load_polytope,
    mean_scalar,
    simplex,
    vertices,
)
from .solver import ContinuationPath, SolveReport, continuation, critical_point, domain_guard, solve_b
from .weights import F, F_dt, WeightParams, sasaki_weight_pair, taylor_defect

__all__ = [name for name in dir() if not name.startswith("_")]
