"""Reusable problem set-ups shared by the sweep, the CLI and the tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chemokin import kinetic, macro
from chemokin.geometry import SpatialGrid, VelocitySet, build_velocity_set
from chemokin.tumbling import ResponseFunction, SpeciesParams


def gaussian_bump(grid: SpatialGrid, center, width: float, mass: float) -> np.ndarray:
    """Periodic-grid Gaussian scaled so the discrete integral equals ``mass``."""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    r2 = 0.0
    for a, x in enumerate(grid.centers()):
        r2 = r2 + (x - center[a]) ** 2
    g = np.exp(-r2 / (2.0 * width * width))
    return mass * g / (g.sum() * grid.cell_volume)


@dataclass(frozen=True)
class Scenario:
    grid: SpatialGrid
    velocities: VelocitySet
    params: tuple[SpeciesParams, SpeciesParams]
    rho1: np.ndarray
    rho2: np.ndarray
    dt: float
    t_end: float
    delta: int = 0
    scheme: str = "implicit"

    def kinetic_state(self, eps: float) -> kinetic.KineticState:
        return kinetic.well_prepared(self.grid, self.velocities, self.rho1, self.rho2, eps, self.delta)

    def macro_state(self) -> macro.MacroState:
        return macro.make_state(self.grid, self.velocities, self.rho1, self.rho2, self.delta)


def standard_bump(cells: int = 256, nodes: int = 32, dt: float = 5e-4, t_end: float = 0.5,
                  amp: float = 0.5, kind: str = "tanh", scheme: str = "implicit", delta: int = 0) -> Scenario:
    """Two offset Gaussian bumps on a 1D torus of length 3 with speeds in ``[-1, 1]``.

    Species 1 has ``psi = 1``; species 2 tumbles twice as often and carries
    half the mass.
    """
    extent = 3.0
    grid = SpatialGrid(1, extent, cells)
    vs = build_velocity_set(1, 1.0, nodes)
    theta = ResponseFunction(kind, amp, 1.0)
    params = (SpeciesParams(1.0, theta), SpeciesParams(2.0, theta))
    rho1 = gaussian_bump(grid, extent / 2, 0.25, 1.0)
    rho2 = gaussian_bump(grid, extent / 2 + 0.3, 0.2, 0.5)
    return Scenario(grid, vs, params, rho1, rho2, dt, t_end, delta, scheme)
