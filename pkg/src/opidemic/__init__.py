"""Coupled opinion-epidemic kinetic simulator.

SIR compartments whose transmission depends on agents' opinions, opinion
formation on a graphon advanced by a structure-preserving drift-diffusion
scheme, and a popularity equation tracking how seriously the disease is
perceived, with closed-form equilibrium evaluators and convergence
diagnostics.
"""

from .chang_cooper import cc_weights, solve_tridiagonal
from .config import PRESETS, ScenarioConfig, config_from_mapping, config_from_preset, load_config
from .epidemic import (
    EpiParams,
    SirState,
    beta_T,
    effective_R,
    epi_rhs,
    rk4_epi_step,
    sir_final_size,
    sir_peak,
    split_step,
)
from .equilibria import (
    BetaEquilibrium,
    InverseGammaEquilibrium,
    Regime,
    beta_equilibrium,
    classify_regime,
    global_sir_equilibrium,
    inverse_gamma_equilibrium,
    sample_beta_equilibrium,
)
from .errors import (
    CflViolationError,
    ConfigurationError,
    DegenerateEquilibriumError,
    DomainError,
    NumericsError,
    OpidemicError,
)
from .graphon import (
    GraphonKind,
    GraphonLattice,
    GraphonSpec,
    graphon_eval,
    in_degree,
    interaction_eval,
    propensity,
    propensity_scaled,
)
from .grid import (
    COMPARTMENTS,
    CompartmentField,
    Moments,
    PhaseGrid,
    functional_F,
    functional_H,
    functional_K,
    functional_K_tilde,
    integrate_phase,
    moments,
    snap_threshold,
)
from .opinion_fp import (
    FpCoefficients,
    KernelKind,
    ModelVariant,
    VariantKind,
    assemble_coefficients,
    cfl_dt,
    fp_step,
)
from .popularity import (
    GridPolicy,
    PopularityField,
    PopularityParams,
    adapt_grid,
    interpolate_F,
    pop_drift,
    pop_face_coefficients,
    pop_moments,
    pop_step,
    run_popularity,
)
from .diagnostics import (
    default_prominence,
    detect_waves,
    hellinger,
    l1_distance,
    relative_entropy,
    sobolev_neg_norm,
)
from .scenario import RunArtifacts, build_initial_condition, emit_csv, run_scenario

__version__ = "0.1.0"
