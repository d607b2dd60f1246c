"""
Conormal profiles, nonlinearities and the leapfrog wave solver.
"""

from triplewave.solver.profiles import PROFILE_KINDS, ConormalProfile, smoothed_ramp
from triplewave.solver.nonlinearity import Nonlinearity, conormal_sources, interaction_cutoff
from triplewave.solver.leapfrog import (
    Grid,
    GridField,
    GridState,
    LeapfrogSolver,
    export_grid_field,
    load_grid_field,
    run,
    step,
    synthesize_initial_data,
)

__all__ = [
    "PROFILE_KINDS", "ConormalProfile", "smoothed_ramp", "Nonlinearity", "conormal_sources",
    "interaction_cutoff", "Grid", "GridField", "GridState", "LeapfrogSolver", "export_grid_field",
    "load_grid_field", "run", "step", "synthesize_initial_data",
]
