"""Hyperkahler geometry on the cotangent bundle of a complexified compact group.

The library builds the moduli space of solutions of the coupled interval
system dA_i/ds + [A_0,A_i] + [A_j,A_k] = 0 for U(n)/SU(n), identifies it
with pairs (U, eta) of complex-group endpoint data, and evaluates the
metric, the quaternionic structures and Kahler forms, the holomorphic
symplectic pairing, the group symmetries, and the two-patch twistor
transition function.
"""

from .liecore import (
    BranchCutError,
    GroupSpec,
    RoleError,
    adjoint_star,
    bracket,
    expm,
    inner_complex,
    inner_real,
    logm_principal,
    parse_group,
    polar_decompose,
)
from .nahm import (
    ComplexPair,
    GaugeTransform,
    NahmQuadruple,
    Path,
    complex_residual,
    gauge_act_complex,
    gauge_act_real,
    generate_from_moduli,
    l2_inner,
    nahm_residual,
    pair_to_quadruple,
    quadruple_to_pair,
    quaternion_act,
    real_residual,
)
from .gaugefix import (
    DStarDOperator,
    NonConvergenceError,
    SingularSystemError,
    SolverConfig,
    gauge_fix,
    horizontal_project,
    solve_dstar_d,
)
from .moduli import (
    MetricReport,
    ModuliPoint,
    TangentRep,
    act_GxG,
    act_SO3,
    check_kahler_locus,
    check_omega_c,
    metric_report,
    point_to_solution,
    solution_to_point,
    tangent_basis,
)
from .twistor import (
    FiberPair,
    TwistorCoord,
    ZetaPrimeZeroError,
    ZetaZeroError,
    fiber_moment_residual,
    generate_fiber,
    transition,
    transition_inverse,
    verify_transition_against_reextraction,
)

__version__ = "0.1.0"
