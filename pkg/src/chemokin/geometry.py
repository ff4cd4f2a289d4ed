"""Periodic spatial grid and the discrete velocity set.

Velocity quadratures are always evaluated through :meth:`VelocitySet.integrate`,
which adds each node to its mirror image before summing.  Odd integrands
(``v * F``, ``v * rho * F``) therefore cancel exactly instead of leaving
round-off residue.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform cell-centred grid on the torus ``[0, L_1) x ... x [0, L_dim)``."""

    dim: int
    extent: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        extent = tuple(float(e) for e in np.broadcast_to(self.extent, (self.dim,)))
        cells = tuple(int(c) for c in np.broadcast_to(self.cells, (self.dim,)))
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "cells", cells)
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if any(c < 4 for c in cells):
            raise ValueError(f"need at least 4 cells per axis, got {cells}")
        if any(not e > 0 for e in extent):
            raise ValueError(f"extent must be positive, got {extent}")

    @classmethod
    def create(cls, dim: int, extent, cells) -> "SpatialGrid":
        return cls(dim, extent, cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    def axis_centers(self, axis: int) -> np.ndarray:
        return (np.arange(self.cells[axis]) + 0.5) * self.spacing[axis]

    def centers(self) -> list[np.ndarray]:
        """Cell-centre coordinates, one broadcastable array per axis (``ij`` indexing)."""
        return np.meshgrid(*[self.axis_centers(a) for a in range(self.dim)], indexing="ij")

    def wrap(self, index):
        """Map any integer multi-index onto the torus."""
        index = np.atleast_1d(index)
        return tuple(int(i) % c for i, c in zip(index, self.cells))

    def wavenumbers(self, real: bool = True) -> list[np.ndarray]:
        """Angular wavenumbers ``2 pi m / L`` broadcast to the FFT layout.

        With ``real=True`` the last axis uses the half spectrum of ``rfftn``.
        """
        ks = []
        for a in range(self.dim):
            n, d = self.cells[a], self.spacing[a]
            if real and a == self.dim - 1:
                k = 2 * np.pi * np.fft.rfftfreq(n, d=d)
            else:
                k = 2 * np.pi * np.fft.fftfreq(n, d=d)
            shape = [1] * self.dim
            shape[a] = k.size
            ks.append(k.reshape(shape))
        return ks

    def integrate(self, field: np.ndarray) -> float:
        """Midpoint-rule integral of a cell field over the torus."""
        return float(np.sum(field) * self.cell_volume)


@dataclass(frozen=True)
class VelocitySet:
    """Midpoint quadrature on the cube ``[-vmax, vmax]^dim``.

    ``nodes`` has shape ``(n, dim)``.  Node ``k`` and node ``n - 1 - k`` are
    exact negatives of each other with equal weights.
    """

    dim: int
    vmax: float
    nodes_per_axis: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.weights.size

    @cached_property
    def measure(self) -> float:
        return float(self.integrate(np.ones(self.size)))

    @property
    def equilibrium(self) -> float:
        """Value of the uniform distribution ``F = 1/|V|`` on ``V``."""
        return 1.0 / self.measure

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Weighted sum over the velocity axis with mirror-paired summation."""
        values = np.moveaxis(np.asarray(values), axis, -1)
        half = self.size // 2
        upper = values[..., half:] * self.weights[half:]
        lower = values[..., half - 1::-1] * self.weights[half - 1::-1]
        return np.sum(upper + lower, axis=-1)

    def first_moment(self, values: np.ndarray) -> np.ndarray:
        """``sum_k w_k v_k g_k``; result has the velocity components on axis 0."""
        return np.stack([self.integrate(values * self.nodes[:, a]) for a in range(self.dim)])


def build_velocity_set(dim: int, vmax: float, nodes_per_axis: int) -> VelocitySet:
    if dim not in (1, 2):
        raise ValueError(f"velocity dim must be 1 or 2, got {dim}")
    if not vmax > 0:
        raise ValueError(f"vmax must be positive, got {vmax}")
    if nodes_per_axis < 2 or nodes_per_axis % 2:
        raise ValueError(
            f"nodes_per_axis must be even and >= 2 (mirror symmetry), got {nodes_per_axis}"
        )
    h = 2.0 * vmax / nodes_per_axis
    positive = h * (np.arange(nodes_per_axis // 2) + 0.5)
    axis = np.concatenate([-positive[::-1], positive])
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.full(nodes.shape[0], h**dim)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return VelocitySet(dim, float(vmax), int(nodes_per_axis), nodes, weights)


def second_moment_tensor(vs: VelocitySet) -> np.ndarray:
    """``sum_k w_k v_k (x) v_k`` as a ``(dim, dim)`` matrix."""
    out = np.empty((vs.dim, vs.dim))
    for a in range(vs.dim):
        for b in range(vs.dim):
            out[a, b] = vs.integrate(vs.nodes[:, a] * vs.nodes[:, b])
    return out
