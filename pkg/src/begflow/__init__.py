"""Minimizing-movement dynamics for a ternary surfactant lattice model."""

from .lattice import (
    OctagonGeom,
    QuasiOctagonGeom,
    SideLengths,
    Site,
    hausdorff,
    is_staircase,
    rasterize,
    recognize_octagon,
    recognize_quasi_octagon,
    smallest_containing_octagon,
)
from .energy import (
    EnergyBreakdown,
    ModelParams,
    SpinConfig,
    beg_energy,
    canonical_surfactant,
    dissipation_d0,
    dissipation_d1,
    perimeter,
    surface_tension,
    total_functional,
)
from .oracle import (
    SearchBudget,
    StepResult,
    flip_local_search,
    minimizing_movement,
    oracle_step,
)
from .facet_law import (
    Displacement,
    FacetState,
    FacetStepResult,
    Regime,
    RegimeTag,
    classify,
    compare_with_oracle,
    facet_step,
    facet_trajectory,
    update_lengths,
)
from .continuum import (
    ContinuumState,
    ContinuumTrajectory,
    VelocityLaw,
    VelocityTag,
    convergence_check,
    integrate,
    velocities,
)
from .harness import (
    RunConfig,
    RunReport,
    ScenarioSpec,
    UsageError,
    export_csv,
    export_jsonl,
    run,
    scenario_suite,
)

__all__ = [
    "OctagonGeom", "QuasiOctagonGeom", "SideLengths", "Site",
    "hausdorff", "is_staircase", "rasterize", "recognize_octagon",
    "recognize_quasi_octagon", "smallest_containing_octagon",
    "EnergyBreakdown", "ModelParams", "SpinConfig", "beg_energy",
    "canonical_surfactant", "dissipation_d0", "dissipation_d1",
    "perimeter", "surface_tension", "total_functional",
    "SearchBudget", "StepResult", "flip_local_search",
    "minimizing_movement", "oracle_step",
    "Displacement", "FacetState", "FacetStepResult", "Regime", "RegimeTag",
    "classify", "compare_with_oracle", "facet_step", "facet_trajectory",
    "update_lengths",
    "ContinuumState", "ContinuumTrajectory", "VelocityLaw", "VelocityTag",
    "convergence_check", "integrate", "velocities",
    "RunConfig", "RunReport", "ScenarioSpec", "UsageError",
    "export_csv", "export_jsonl", "run", "scenario_suite",
]

__version__ = "0.1.0"
