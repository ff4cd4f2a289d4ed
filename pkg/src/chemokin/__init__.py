"""Two-species kinetic chemotaxis model and its drift-diffusion limit."""

from chemokin.geometry import SpatialGrid, VelocitySet, build_velocity_set, second_moment_tensor
from chemokin.tumbling import ResponseFunction, SpeciesParams
from chemokin.chemo import ChemField, solve_elliptic, step_parabolic, tumble_argument
from chemokin.kinetic import KineticState, Moments, moments
from chemokin.macro import MacroState

__all__ = [
    "SpatialGrid",
    "VelocitySet",
    "build_velocity_set",
    "second_moment_tensor",
    "ResponseFunction",
    "SpeciesParams",
    "ChemField",
    "solve_elliptic",
    "step_parabolic",
    "tumble_argument",
    "KineticState",
    "Moments",
    "moments",
    "MacroState",
]

__version__ = "0.1.0"
