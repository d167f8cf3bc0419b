"""Positivity-preserving, energy-stable BDF2 finite-difference solver for the
ternary MMC Cahn-Hilliard system with a Flory-Huggins-deGennes energy."""

from .energy import ModelParams, PhasePair
from .grid import EdgeField, Grid
from .harness import build_initial, run_convergence_study
from .scheme import SchemeParams, SchemeState, run, step, step_init
from .solver import SolverParams

__all__ = ["EdgeField", "Grid", "ModelParams", "PhasePair", "SchemeParams", "SchemeState",
           "SolverParams", "build_initial", "run", "run_convergence_study", "step", "step_init"]
__version__ = "0.1.0"
