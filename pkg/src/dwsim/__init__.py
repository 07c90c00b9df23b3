"""Simulations of spinor atoms in a 1D lin-theta-lin optical double-well
lattice: potentials, band structure, localized ground-doublet states,
Rabi dynamics, state-preparation ramps and ensemble dephasing."""

__version__ = "0.1.0"

from .constants import (
    SpeciesConstants,
    UnitContext,
    cesium_f4,
    recoil_energy_hz,
    zeeman_energy_er,
)
from .spin import SpinOperators, make_spin_operators
from .lattice import (
    LatticeConfig,
    PotentialCurves,
    adiabatic_curves,
    diabatic_curves,
    potential_curves,
    potential_matrix,
)
from .bands import (
    BandSolution,
    DoubletSplitting,
    LocalizedObservables,
    TwoLevelModel,
    WannierDoublet,
    assemble_bloch_hamiltonian,
    doublet_splitting,
    localized_observables,
    solve_bands,
    two_level_model,
    wannier_doublet,
)
from .dynamics import (
    AdiabaticityReport,
    PreparationResult,
    RampSchedule,
    Segment,
    TimeSeries,
    adiabaticity_report,
    dominant_frequency_hz,
    prepare_ground_l,
    preparation_schedule,
    propagate_ramp,
    propagate_static,
)
from .ensemble import EnsembleResult, EnsembleSpec, ensemble_magnetization
from .fitting import DampedSinusoidFit, fit_damped_sinusoid
from .errors import ConfigError, ContinuityError, ConvergenceError

__all__ = [
    "__version__",
    "SpeciesConstants",
    "UnitContext",
    "cesium_f4",
    "recoil_energy_hz",
    "zeeman_energy_er",
    "SpinOperators",
    "make_spin_operators",
    "LatticeConfig",
    "PotentialCurves",
    "potential_matrix",
    "potential_curves",
    "diabatic_curves",
    "adiabatic_curves",
    "BandSolution",
    "DoubletSplitting",
    "WannierDoublet",
    "TwoLevelModel",
    "LocalizedObservables",
    "assemble_bloch_hamiltonian",
    "solve_bands",
    "doublet_splitting",
    "wannier_doublet",
    "localized_observables",
    "two_level_model",
    "Segment",
    "RampSchedule",
    "TimeSeries",
    "AdiabaticityReport",
    "PreparationResult",
    "propagate_static",
    "propagate_ramp",
    "preparation_schedule",
    "prepare_ground_l",
    "adiabaticity_report",
    "dominant_frequency_hz",
    "EnsembleSpec",
    "EnsembleResult",
    "ensemble_magnetization",
    "DampedSinusoidFit",
    "fit_damped_sinusoid",
    "ConfigError",
    "ConvergenceError",
    "ContinuityError",
]
