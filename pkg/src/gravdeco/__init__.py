"""Gravitational decoherence: kernels, density operators, spectra and dynamics."""

from .decoherence import (
    BACKEND,
    BallParams,
    DecoherenceSpec,
    NBodyConfig,
    PlanckUnits,
    alpha,
    dexp,
    dexp_auto,
    dexp_exact,
    dexp_gaussian,
    dexp_log,
    dexp_nbody_gaussian,
    dexp_nbody_log,
    planck_convert,
)
from .dynamics import (
    EvolutionResult,
    MasterEqSpec,
    SpreadFit,
    entropy_S,
    entropy_S1,
    entropy_timescale_example,
    evolve_mdm,
    integrate_master,
    positivity_probe,
    spread_fit,
    two_sided_check,
)
from .experiments import (
    PenroseConfig,
    PMTConfig,
    RadiationInput,
    bead_ground_state,
    graviton_estimate,
    penrose_run,
    photon_emission_estimate,
    pmt_light_probe,
    pmt_run,
)
from .numerics import Grid1D, HamiltonianSpec, QuadratureSpec, hermitian_spectrum, integrate_semiinfinite, schrodinger_propagate
from .spectra import (
    CatState,
    brute_force_events,
    beable_expectation,
    cat_exact_diag,
    general_first_eigenpair,
    is_beable,
    perturb_diag_1d,
    perturb_diag_3d,
    perturb_diag_product,
)
from .states import (
    DensityKernel,
    ObservableKernel,
    ProductWaveFunction,
    WaveFunction,
    build_rho_ball,
    build_rho_gauss,
    build_rho_nbody,
    expect,
    expect_parity,
    first_order_rho,
    naive_p2_offset,
    uncertainty_report,
)

__all__ = [
    "Grid1D",
    "HamiltonianSpec",
    "QuadratureSpec",
    "hermitian_spectrum",
    "integrate_semiinfinite",
    "schrodinger_propagate",
    "BACKEND",
    "BallParams",
    "DecoherenceSpec",
    "NBodyConfig",
    "PlanckUnits",
    "alpha",
    "dexp",
    "dexp_auto",
    "dexp_exact",
    "dexp_gaussian",
    "dexp_log",
    "dexp_nbody_gaussian",
    "dexp_nbody_log",
    "planck_convert",
    "EvolutionResult",
    "MasterEqSpec",
    "SpreadFit",
    "entropy_S",
    "entropy_S1",
    "entropy_timescale_example",
    "evolve_mdm",
    "integrate_master",
    "positivity_probe",
    "spread_fit",
    "two_sided_check",
    "PenroseConfig",
    "PMTConfig",
    "RadiationInput",
    "bead_ground_state",
    "graviton_estimate",
    "penrose_run",
    "photon_emission_estimate",
    "pmt_light_probe",
    "pmt_run",
    "CatState",
    "brute_force_events",
    "beable_expectation",
    "cat_exact_diag",
    "general_first_eigenpair",
    "is_beable",
    "perturb_diag_1d",
    "perturb_diag_3d",
    "perturb_diag_product",
    "DensityKernel",
    "ObservableKernel",
    "ProductWaveFunction",
    "WaveFunction",
    "build_rho_ball",
    "build_rho_gauss",
    "build_rho_nbody",
    "expect",
    "expect_parity",
    "first_order_rho",
    "naive_p2_offset",
    "uncertainty_report",
]

__version__ = "0.1.0"
