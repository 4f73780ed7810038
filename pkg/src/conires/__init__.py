"""Semiclassical resonances of a two-level model with a conical intersection.

Three mutually checking routes to the resonance lattice: an asymptotic
lattice formula, numerical Bohr-Sommerfeld quantization built on complex
action integrals, and an independent ODE oracle locating zeros of the
outgoing Jost coefficient.
"""

from .actions import (
    MU_CRITICAL,
    ActionValue,
    action_I,
    action_Iplus,
    action_S01,
    action_S01_dE,
    action_S12,
    action_S2inf,
    residue_R,
    tunnel_T,
)
from .errors import (
    BranchAmbiguity,
    ConiresError,
    ConvergenceFailure,
    EmptyBand,
    MatchingFailure,
    MonotonicityViolation,
    NoConvergence,
    NonSimpleRoot,
    NoPlateau,
    NoRealTurningPoints,
    OrderTooHigh,
    QuadratureFailure,
    SeriesDivergence,
    SpuriousZero,
    StepUnderflow,
    TurningPointProximity,
    WindowEmpty,
)
from .model import (
    CubicRoots,
    ModelParams,
    SymbolBranch,
    SymbolValue,
    TurningPoints,
    cubic_roots,
    default_symbol_path,
    discriminant,
    energy_surface_rho2,
    symbol_at,
    turning_points,
)
from .ode_oracle import (
    IntegrationResult,
    JostEstimate,
    find_resonance_ode,
    frobenius_init,
    integrate_system,
    jost_cplus,
    pplus_eigen_oracle,
)
from .quadrature import ComplexPath, adaptive_path, adaptive_segment
from .quantization import (
    Band,
    ResonanceRecord,
    SweepFailure,
    bs_residual,
    lattice,
    lattice_point,
    pplus_levels,
    resonance_set,
    solve_resonance,
)
from .wkb import (
    AmplitudePair,
    NormalFormCoeffs,
    PhaseValue,
    TransferMatrix,
    amplitude_recurrence,
    assembly_matrix,
    branching_R,
    connection_c0,
    dlog_H,
    gamma_series,
    origin_series,
    phase_z,
    phi_map,
    psi_map,
    transfer_T1,
    transfer_T2,
    transfer_T3,
    wkb_solution,
    wronskian,
)

__version__ = "0.1.0"
