"""Drift-diffusion (Keller-Segel type) system obtained as ``eps -> 0``.

Each species obeys ``d rho/dt = div(D grad rho - chi[S] rho)`` with

* ``D = sum_k w_k v_k (x) v_k / (|V|^2 psi)`` (constant, diagonal), and
* ``chi[S] = -sum_k w_k v_k theta(v_k . grad S) / |V|``.

A step applies implicit spectral diffusion, then an explicit first-order
upwind flux for the drift with ``chi`` evaluated at cell faces, then the
chemoattractant update.  The upwind step is positivity preserving under
``dt <= 0.9 dx / max|chi|``.  The spectral diffusion step is not
positivity preserving on unresolved data, so negative values left by it are
removed by :func:`clip_negative` with the total mass restored; the removed
amount is tracked in ``MacroState.clipped``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from chemokin.chemo import ChemField, initial_parabolic, solve_elliptic, spectral, step_parabolic
from chemokin.geometry import SpatialGrid, VelocitySet, second_moment_tensor
from chemokin.kinetic import Trajectory
from chemokin.norms import lq_norm
from chemokin.tumbling import SpeciesParams

CFL_SAFETY = 0.9


class CFLViolation(ValueError):
    """Time step too large for the explicit drift; carries the admissible value."""

    def __init__(self, dt: float, admissible: float):
        super().__init__(f"dt={dt} violates the drift CFL condition; use dt <= {admissible:.6g}")
        self.dt = dt
        self.admissible = admissible


@dataclass(frozen=True)
class MacroState:
    grid: SpatialGrid
    velocities: VelocitySet  # sets D and chi through velocity quadrature
    rho1: np.ndarray
    rho2: np.ndarray
    chem: ChemField
    time: float = 0.0
    clipped: tuple[float, float] = (0.0, 0.0)  # cumulative negative mass removed per species

    @property
    def rho(self) -> tuple[np.ndarray, np.ndarray]:
        return self.rho1, self.rho2

    def mass(self, i: int) -> float:
        return self.grid.integrate(self.rho[i])


def diffusion_coefficient(sp: SpeciesParams, vs: VelocitySet) -> np.ndarray:
    return second_moment_tensor(vs) / (vs.measure**2 * sp.psi)


def chemotactic_velocity(sp: SpeciesParams, vs: VelocitySet, gradS) -> np.ndarray:
    """``chi[S]`` for a gradient of shape ``(dim,)`` or ``(dim, *cells)``."""
    gradS = np.asarray(gradS, dtype=float)
    args = 0.0
    for a in range(vs.dim):
        args = args + gradS[a][..., None] * vs.nodes[:, a]
    th = sp.theta(args)
    return np.stack([-vs.integrate(th * vs.nodes[:, a]) / vs.measure for a in range(vs.dim)])


def _chem(grid: SpatialGrid, rho_total, delta: int, prev: ChemField | None = None, dt: float | None = None):
    if delta == 0:
        return solve_elliptic(grid, rho_total)
    if delta != 1:
        raise ValueError(f"delta must be 0 or 1, got {delta}")
    return initial_parabolic(grid, rho_total) if prev is None else step_parabolic(prev, rho_total, dt)


def make_state(grid: SpatialGrid, vs: VelocitySet, rho1, rho2, delta: int = 0, time: float = 0.0) -> MacroState:
    rho1 = np.array(rho1, dtype=float)
    rho2 = np.array(rho2, dtype=float)
    for r in (rho1, rho2):
        if r.shape != grid.cells:
            raise ValueError(f"density has shape {r.shape}, expected {grid.cells}")
    return MacroState(grid, vs, rho1, rho2, _chem(grid, rho1 + rho2, delta), float(time))


def face_gradients(chem: ChemField) -> list[np.ndarray]:
    """``grad S`` at the faces ``x + dx_a/2 e_a`` for each axis ``a``."""
    grid = chem.grid
    sp = spectral(grid)
    s_hat = sp.forward(chem.S)
    out = []
    for a, k in enumerate(sp.k):
        shifted = s_hat * np.exp(0.5j * k * grid.spacing[a])
        out.append(np.stack([sp.inverse(g) for g in sp.gradient_hat(shifted)]))
    return out


def face_velocities(state: MacroState, params) -> list[list[np.ndarray]]:
    """``chi_a`` of each species at the ``a``-faces; indexed ``[species][axis]``."""
    faces = face_gradients(state.chem)
    vs = state.velocities
    return [[chemotactic_velocity(sp, vs, faces[a])[a] for a in range(state.grid.dim)] for sp in params]


def _cfl_limit(grid: SpatialGrid, chis) -> float:
    limit = np.inf
    for per_axis in chis:
        for a, chi in enumerate(per_axis):
            m = float(np.abs(chi).max())
            if m > 0:
                limit = min(limit, CFL_SAFETY * grid.spacing[a] / m)
    return limit


def admissible_dt(state: MacroState, params) -> float:
    return _cfl_limit(state.grid, face_velocities(state, params))


def clip_negative(rho: np.ndarray, cell_volume: float) -> tuple[np.ndarray, float]:
    """Zero negative values and rescale to the original total; returns the removed mass."""
    if rho.min() >= 0:
        return rho, 0.0
    removed = float(-np.minimum(rho, 0.0).sum() * cell_volume)
    total = rho.sum()
    out = np.maximum(rho, 0.0)
    now = out.sum()
    if now > 0 and total > 0:
        out *= total / now
    return out, removed


def _drift(grid: SpatialGrid, rho: np.ndarray, chis: list[np.ndarray], dt: float) -> np.ndarray:
    out = rho.copy()
    for a, chi in enumerate(chis):
        upwind = np.maximum(chi, 0.0) * rho + np.minimum(chi, 0.0) * np.roll(rho, -1, axis=a)
        out -= dt / grid.spacing[a] * (upwind - np.roll(upwind, 1, axis=a))
    return out


def step(state: MacroState, params: tuple[SpeciesParams, SpeciesParams], dt: float, pool=None) -> MacroState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    grid, vs = state.grid, state.velocities
    sp_ = spectral(grid)
    chis = face_velocities(state, params)
    limit = _cfl_limit(grid, chis)
    if dt > limit:
        raise CFLViolation(dt, limit)
    new, clipped = [], list(state.clipped)
    for i, (sp, rho, chi) in enumerate(zip(params, state.rho, chis)):
        D = np.diag(diffusion_coefficient(sp, vs))
        symbol = 1.0 + dt * sum(D[a] * k * k for a, k in enumerate(sp_.k))
        rho, removed = clip_negative(sp_.inverse(sp_.forward(rho) / symbol), grid.cell_volume)
        clipped[i] += removed
        new.append(_drift(grid, rho, chi, dt))
    chem = _chem(grid, new[0] + new[1], state.chem.delta, state.chem, dt)
    return replace(state, rho1=new[0], rho2=new[1], chem=chem, time=state.time + dt, clipped=tuple(clipped))


MACRO_COLUMNS = (
    "time", "mass1", "mass2", "l2_1", "l2_2", "l4_1", "l4_2", "linf_1", "linf_2",
    "min_1", "min_2", "chi_max_1", "chi_max_2", "clipped_1", "clipped_2",
)


@dataclass
class MacroRun:
    trajectory: Trajectory
    final: MacroState


def _sample(state: MacroState, params) -> dict:
    vol = state.grid.cell_volume
    row = {"time": state.time}
    chis = face_velocities(state, params)
    for i, rho in enumerate(state.rho, start=1):
        row[f"mass{i}"] = state.mass(i - 1)
        row[f"l2_{i}"] = lq_norm(rho, 2, vol)
        row[f"l4_{i}"] = lq_norm(rho, 4, vol)
        row[f"linf_{i}"] = float(np.abs(rho).max())
        row[f"min_{i}"] = float(rho.min())
        row[f"chi_max_{i}"] = max(float(np.abs(c).max()) for c in chis[i - 1])
        row[f"clipped_{i}"] = state.clipped[i - 1]
    return row


def run(initial: MacroState, params, dt: float, t_end: float, sample_every: int = 1,
        observers=(), pool=None) -> MacroRun:
    """Macro counterpart of :func:`chemokin.kinetic.run`; observers get ``(step_index, state)``."""
    if not t_end > initial.time:
        raise ValueError(f"t_end={t_end} must exceed the initial time {initial.time}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    nsteps = max(1, round((t_end - initial.time) / dt))
    traj = Trajectory(MACRO_COLUMNS)
    state = initial
    traj.append(_sample(state, params))
    for obs in observers:
        obs(0, state)
    for n in range(1, nsteps + 1):
        h = dt if n < nsteps else t_end - state.time
        state = step(state, params, h, pool=pool)
        if n % sample_every == 0 or n == nsteps:
            traj.append(_sample(state, params))
        for obs in observers:
            obs(n, state)
    return MacroRun(traj, state)
