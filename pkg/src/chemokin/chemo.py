"""Chemoattractant field on the torus.

``delta dS/dt - Lap S + S = rho_1 + rho_2`` is diagonal in the discrete
Fourier basis, so both the elliptic solve and the backward-Euler parabolic
step are exact per mode.  ``dS/dt`` is never formed by time differencing:
in the elliptic case it comes from the auxiliary solve
``(1 - Lap) dS/dt = -div(J_1 + J_2)`` and in the parabolic case from the
right-hand side of the equation itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chemokin.geometry import SpatialGrid


@dataclass(frozen=True)
class ChemField:
    grid: SpatialGrid
    S: np.ndarray
    gradS: np.ndarray  # (dim, *cells)
    dtS: np.ndarray
    delta: int = 0


class Spectral:
    """FFT helpers bound to one grid."""

    def __init__(self, grid: SpatialGrid):
        self.grid = grid
        self.axes = tuple(range(grid.dim))
        self.k = grid.wavenumbers(real=True)
        self.k2 = sum(k * k for k in self.k)

    def forward(self, field: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(field, axes=self.axes)

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coeffs, s=self.grid.cells, axes=self.axes)

    def expand(self, k: np.ndarray, ndim: int) -> np.ndarray:
        return k.reshape(k.shape + (1,) * (ndim - self.grid.dim))

    def gradient_hat(self, coeffs: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """Spectral gradient; ``shift`` (in cells) evaluates at offset points."""
        out = []
        for a, k in enumerate(self.k):
            k = self.expand(k, coeffs.ndim)
            phase = np.exp(1j * k * shift * self.grid.spacing[a]) if shift else 1.0
            out.append(1j * k * phase * coeffs)
        return out

    def gradient(self, field: np.ndarray) -> np.ndarray:
        return np.stack([self.inverse(g) for g in self.gradient_hat(self.forward(field))])

    def divergence(self, vector: np.ndarray) -> np.ndarray:
        total = 0.0
        for a, k in enumerate(self.k):
            total = total + 1j * k * self.forward(vector[a])
        return self.inverse(total)

    def helmholtz_inverse(self, field: np.ndarray) -> np.ndarray:
        """``(1 - Lap)^-1 field``."""
        return self.inverse(self.forward(field) / (1.0 + self.k2))


_SPECTRAL_CACHE: dict[SpatialGrid, Spectral] = {}


def spectral(grid: SpatialGrid) -> Spectral:
    sp = _SPECTRAL_CACHE.get(grid)
    if sp is None:
        sp = _SPECTRAL_CACHE[grid] = Spectral(grid)
    return sp


def _field_from_hat(grid: SpatialGrid, s_hat: np.ndarray, dtS: np.ndarray, delta: int) -> ChemField:
    sp = spectral(grid)
    S = sp.inverse(s_hat)
    grad = np.stack([sp.inverse(g) for g in sp.gradient_hat(s_hat)])
    return ChemField(grid, S, grad, dtS, delta)


def solve_elliptic(grid: SpatialGrid, rho_total: np.ndarray, flux_total: np.ndarray | None = None) -> ChemField:
    """Solve ``-Lap S + S = rho_total`` exactly in Fourier space.

    With ``flux_total`` (shape ``(dim, *cells)``) the time derivative is
    obtained from ``(1 - Lap) dS/dt = -div flux_total``; otherwise it is zero.
    """
    sp = spectral(grid)
    s_hat = sp.forward(rho_total) / (1.0 + sp.k2)
    if flux_total is None:
        dtS = np.zeros(grid.cells)
    else:
        dtS = -sp.helmholtz_inverse(sp.divergence(flux_total))
    return _field_from_hat(grid, s_hat, dtS, 0)


def initial_parabolic(grid: SpatialGrid, rho_total: np.ndarray) -> ChemField:
    """``S = 0`` at ``t = 0``; then ``dS/dt = rho_total``."""
    zero = np.zeros(grid.cells)
    return ChemField(grid, zero, np.zeros((grid.dim,) + grid.cells), np.array(rho_total, dtype=float), 1)


def step_parabolic(prev: ChemField, rho_total: np.ndarray, dt: float) -> ChemField:
    """Backward-Euler step of ``dS/dt = Lap S - S + rho_total``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid = prev.grid
    sp = spectral(grid)
    rho_hat = sp.forward(rho_total)
    s_hat = (sp.forward(prev.S) + dt * rho_hat) / (1.0 + dt * (1.0 + sp.k2))
    dtS = sp.inverse(rho_hat - (1.0 + sp.k2) * s_hat)
    return _field_from_hat(grid, s_hat, dtS, 1)


def tumble_argument(field: ChemField, v, eps: float) -> np.ndarray:
    """``eps dS/dt + v . grad S`` at every cell for a single velocity ``v``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    out = eps * field.dtS
    for a in range(field.grid.dim):
        out = out + v[a] * field.gradS[a]
    return out


def tumble_arguments(field: ChemField, nodes: np.ndarray, eps: float) -> np.ndarray:
    """Arguments for all velocity nodes; shape ``(*cells, N_v)``."""
    out = eps * field.dtS[..., None]
    for a in range(field.grid.dim):
        out = out + field.gradS[a][..., None] * nodes[:, a]
    return out
