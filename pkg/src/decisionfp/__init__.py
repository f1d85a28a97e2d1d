"""Stochastic two-population decision model: SDE ensembles, the planar
Fokker-Planck equation, its slow-fast reduction to one dimension, and the
reaction-time / performance observables of the reduced model."""
from .errors import DecisionFPError
from .fp1d import (ObservableReport, WellPartition, mean_first_passage_time, partition_wells, performance,
                   reaction_time, solve_fp1d, steady_state)
from .fp2d import marginal, project_onto_direction, solve_fp2d
from .grids import DensityGrid1, DensityGrid2, Grid1, Grid2
from .model import PRESETS, resolve_preset, Equilibrium, ModelParams, Point2, drift, find_equilibria, jacobian, response_phi
from .reduction import SlowFastFrame, SlowManifold, build_frame, build_manifold
from .sde import sample_first_passage
from .threewell import ThreeWellParams

__version__ = "0.1.0"

__all__ = [
    "DecisionFPError", "DensityGrid1", "DensityGrid2", "Equilibrium", "Grid1", "Grid2", "ModelParams",
    "ObservableReport", "PRESETS", "Point2", "SlowFastFrame", "SlowManifold", "ThreeWellParams", "WellPartition",
    "build_frame", "build_manifold", "drift", "find_equilibria", "jacobian", "marginal", "mean_first_passage_time",
    "partition_wells", "performance", "project_onto_direction", "reaction_time", "resolve_preset", "response_phi",
    "sample_first_passage", "solve_fp1d", "solve_fp2d", "steady_state",
]
