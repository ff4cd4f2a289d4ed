"""Comparisons between kinetic and drift-diffusion runs, and a-priori bound checks."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from chemokin import kinetic, macro
from chemokin.chemo import spectral
from chemokin.kinetic import KineticState, Trajectory
from chemokin.norms import lq_norm
from chemokin.parallel import pmap
from chemokin.scenarios import Scenario
from chemokin.tumbling import SpeciesParams

__all__ = [
    "lq_norm", "corrector", "corrector_residual", "SweepReport", "eps_sweep", "fit_order",
    "BoundCheck", "BoundReport", "bound_checks", "KINETIC_LQ_CONSTANT", "LINF_SLACK", "MACRO_SLACK",
]

SWEEP_COLUMNS = ("eps", "err_l1_rho1", "err_l1_rho2", "err_l2_rho1", "err_l2_rho2", "r_l2_1", "r_l2_2")
FIT_POINTS = 3

KINETIC_LQ_CONSTANT = 1.0  # calibrated once on the standard scenario, then frozen
LINF_SLACK = 1.05
MACRO_SLACK = 1.1
MASS_TOL = 1e-12
ROUNDOFF = 1e-12


def corrector(state: KineticState, sp: SpeciesParams, species: int) -> np.ndarray:
    """Leading-order fluctuation predicted from the current density and ``grad S``."""
    vs = state.velocities
    rho = vs.integrate(state.species[species])
    grad_rho = spectral(state.grid).gradient(rho)
    vgrad_rho = 0.0
    vgrad_S = 0.0
    for a in range(state.grid.dim):
        vgrad_rho = vgrad_rho + grad_rho[a][..., None] * vs.nodes[:, a]
        vgrad_S = vgrad_S + state.chem.gradS[a][..., None] * vs.nodes[:, a]
    th = sp.theta(vgrad_S)
    mean_th = vs.integrate(th)[..., None] / vs.measure
    V = vs.measure
    return -vgrad_rho / (sp.psi * V * V) + (rho[..., None] / V) * (mean_th - th)


def corrector_residual(state: KineticState, sp: SpeciesParams, species: int = 0) -> float:
    """Relative ``L^2`` distance between the measured fluctuation and :func:`corrector`.

    Returns the absolute distance when the predicted corrector vanishes.
    """
    if not sp.theta.smooth:
        warnings.warn("corrector residual assumes a smooth response; clamped-linear result is indicative only",
                      RuntimeWarning, stacklevel=2)
    mom = kinetic.moments(state)
    r = mom.r[species]
    r0 = corrector(state, sp, species)
    meas = state.measure
    scale = lq_norm(r0, 2, meas)
    diff = lq_norm(r - r0, 2, meas)
    return diff / scale if scale > 0 else diff


def fit_order(eps_values, errors) -> float:
    """Least-squares slope of ``log error`` against ``log eps``."""
    x = np.log(np.asarray(eps_values, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class SweepReport:
    eps_values: list[float]
    err_l1: np.ndarray  # (n_eps, 2)
    err_l2: np.ndarray
    r_l2: np.ndarray
    corrector: np.ndarray
    orders: tuple[float, float]
    extras: dict = field(default_factory=dict)

    @property
    def fitted_order(self) -> float:
        return min(self.orders)

    def to_csv(self) -> str:
        lines = [",".join(SWEEP_COLUMNS)]
        for j, eps in enumerate(self.eps_values):
            row = (eps, *self.err_l1[j], *self.err_l2[j], *self.r_l2[j])
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def summary_json(self) -> str:
        doc = {
            "fitted_order": self.fitted_order,
            "order_rho1": self.orders[0],
            "order_rho2": self.orders[1],
            "fit_points": FIT_POINTS,
            "eps": [float(e) for e in self.eps_values],
            "corrector_residual_1": [float(c) for c in self.corrector[:, 0]],
            "corrector_residual_2": [float(c) for c in self.corrector[:, 1]],
        }
        doc.update(self.extras)
        return json.dumps(doc, sort_keys=True)


def _kinetic_final(task):
    scenario, eps = task
    result = kinetic.run(scenario.kinetic_state(eps), scenario.params, scenario.dt, scenario.t_end,
                         sample_every=10**9, scheme=scenario.scheme)
    final = result.final
    corr = [corrector_residual(final, sp, i) for i, sp in enumerate(scenario.params)]
    return final, result.r_accumulated, corr


def eps_sweep(scenario: Scenario, eps_values, reference: macro.MacroRun | None = None, pool=None) -> SweepReport:
    """Run the kinetic model at each ``eps`` and compare densities with the limit at ``t_end``.

    The limit run is computed once (or supplied as ``reference``) on the
    scenario grid.  Independent ``eps`` runs are mapped over ``pool``.
    """
    eps_values = [float(e) for e in eps_values]
    if not eps_values:
        raise ValueError("eps_values must not be empty")
    if any(not 0 < e <= 1 for e in eps_values):
        raise ValueError(f"every eps must lie in (0, 1], got {eps_values}")
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise ValueError(f"eps_values must be strictly decreasing, got {eps_values}")
    if reference is None:
        reference = macro.run(scenario.macro_state(), scenario.params, scenario.dt, scenario.t_end,
                              sample_every=10**9)
    if reference.final.grid != scenario.grid:
        raise ValueError(f"reference grid {reference.final.grid} does not match the scenario grid {scenario.grid}")
    if not math.isclose(reference.final.time, scenario.t_end, rel_tol=1e-12):
        raise ValueError(f"reference ends at t={reference.final.time}, scenario at t={scenario.t_end}")

    results = pmap(pool, _kinetic_final, [(scenario, e) for e in eps_values])
    vol = scenario.grid.cell_volume
    n = len(eps_values)
    err_l1, err_l2, r_l2, corr = (np.zeros((n, 2)) for _ in range(4))
    for j, (final, r_acc, c) in enumerate(results):
        if final.grid != reference.final.grid:
            raise ValueError("kinetic and reference grids differ")
        mom = kinetic.moments(final)
        for i in range(2):
            diff = mom.rho[i] - reference.final.rho[i]
            err_l1[j, i] = lq_norm(diff, 1, vol)
            err_l2[j, i] = lq_norm(diff, 2, vol)
            r_l2[j, i] = math.sqrt(r_acc[i])
            corr[j, i] = c[i]
    tail = slice(max(0, n - FIT_POINTS), n)
    if n >= 2:
        orders = tuple(fit_order(eps_values[tail], err_l1[tail, i]) for i in range(2))
    else:
        orders = (math.nan, math.nan)
    return SweepReport(eps_values, err_l1, err_l2, r_l2, corr, orders)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    passed: bool
    worst: float  # largest observed value of the checked quantity
    limit: float  # the envelope it is compared against at that point


@dataclass
class BoundReport:
    checks: list[BoundCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_csv(self) -> str:
        lines = ["check,passed,worst,limit"]
        lines += [f"{c.name},{int(c.passed)},{c.worst!r},{c.limit!r}" for c in self.checks]
        return "\n".join(lines) + "\n"


def _envelope(name: str, values: np.ndarray, limits: np.ndarray, skip_first: bool = False) -> BoundCheck:
    """One-sided check ``values <= limits``; reports the sample with least margin.

    ``skip_first`` drops the initial sample for growth checks, where both
    sides vanish and the margin carries no information.
    """
    if skip_first and len(values) > 1:
        values, limits = values[1:], limits[1:]
    margin = limits - values
    j = int(np.argmin(margin))
    return BoundCheck(name, bool(margin[j] >= 0), float(values[j]), float(limits[j]))


def bound_checks(trajectory: Trajectory, params, vs, eps: float | None = None) -> BoundReport:
    """Check a sampled run against the a-priori bounds.

    Kinetic trajectories (``eps`` required) get the mass, ``L^inf``
    envelope, ``L^q`` growth and fluctuation checks; drift-diffusion
    trajectories get mass and ``L^q`` energy checks with the observed
    ``max |chi|`` as the drift bound.
    """
    kinetic_run = "min_ratio_1" in trajectory.columns
    if kinetic_run and eps is None:
        raise ValueError("eps is required for kinetic trajectories")
    if not trajectory.rows:
        raise ValueError("trajectory has no samples")
    t = trajectory.column("time")
    t = t - t[0]
    V = vs.measure
    checks = []
    for i, sp in enumerate(params, start=1):
        mass = trajectory.column(f"mass{i}")
        drift = np.abs(mass - mass[0]) / abs(mass[0]) if mass[0] else np.abs(mass)
        checks.append(_envelope(f"mass{i}", drift, np.full_like(drift, MASS_TOL)))
        amp = sp.theta.amp
        if kinetic_run:
            linf = trajectory.column(f"linf_{i}")
            rate = V * sp.psi * (1.0 + eps * amp)
            checks.append(_envelope(f"linf_{i}", linf, LINF_SLACK * linf[0] * np.exp(rate * t)))
            slope = KINETIC_LQ_CONSTANT * sp.psi * V * amp**2
            for q in (2, 4):
                norm = trajectory.column(f"l{q}_{i}")
                checks.append(_envelope(f"l{q}_growth_{i}", np.log(norm / norm[0]), slope * t + ROUNDOFF,
                                        skip_first=True))
            r = trajectory.column(f"r_l2_{i}")
            finite = bool(np.all(np.isfinite(r)))
            checks.append(BoundCheck(f"r_l2_finite_{i}", finite, float(r[-1]), math.inf))
        else:
            d_min = float(np.linalg.eigvalsh(macro.diffusion_coefficient(sp, vs)).min())
            chi_inf = float(trajectory.column(f"chi_max_{i}").max())
            for q in (2, 4):
                norm = trajectory.column(f"l{q}_{i}")
                slope = MACRO_SLACK * (q - 1) * chi_inf**2 / (2.0 * d_min)
                checks.append(_envelope(f"l{q}_growth_{i}", np.log(norm / norm[0]), slope * t + ROUNDOFF,
                                        skip_first=True))
    return BoundReport(checks)
