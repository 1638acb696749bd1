"""Numerical laboratory for clamped d-cones with L^p bending.

Boundary profiles and cone traces, the smoothed-cone upper-bound ansatz, a
graded polar discretisation of the unit disk, the discrete von Karman energy
with exact gradient, a quasi-Newton minimiser with h-continuation, and
winding-number diagnostics of the boundary gradient.
"""
from .ansatz import QuadratureSpec, SmoothedCone, ansatz_energy, ansatz_fields, ansatz_state, ansatz_sweep, dual_exponent, eta
from .degree import (
    BoundaryCurve,
    DegreeField,
    SmoothBump,
    TestFunction,
    boundary_curve,
    degree_field,
    degree_pairing,
    exponent_table,
    find_test_function,
    gauss_curvature,
    pullback_identity_check,
    weak_identity_check,
    winding_number,
    winding_numbers,
)
from .energy import EnergyBreakdown, energy, energy_and_gradient, energy_gradient, strain
from .errors import (
    AdmissibilityViolation,
    ConfigError,
    DconeError,
    DegenerateBending,
    LineSearchFailure,
    NoWitness,
    NonIntegerWinding,
    NonPeriodicZeta,
    OriginUndefined,
    TooCloseToCurve,
    UnresolvedCore,
)
from .grid import (
    BoundaryCondition,
    DiskGrid,
    FieldState,
    build_grid,
    core_grid,
    gradient_op,
    hessian_op,
    sweep_grid,
)
from .minimize import MinimizeConfig, ScalingReport, continuation_run, fit_loglog, minimize
from .profile import BoundaryProfile, ConeTrace, build_trace, check_admissibility, cone_fields, eval_beta

__all__ = [name for name in dir() if not name.startswith("_")]
