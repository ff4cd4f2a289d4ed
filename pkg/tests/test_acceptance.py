"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line.

Criteria 3 to 7 run on both kinetic schemes.  Criteria 9 to 11 share one eps
sweep of the standard Gaussian-bump scenario.
"""

import json
import math
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

from chemokin import diagnostics as dg, kernels as kn, kinetic, macro
from chemokin.chemo import initial_parabolic, solve_elliptic, step_parabolic
from chemokin.cli import main
from chemokin.geometry import SpatialGrid
from chemokin.scenarios import gaussian_bump, standard_bump
from chemokin.tumbling import ResponseFunction, SpeciesParams

SWEEP_EPS = [0.5, 0.25, 0.125, 0.0625]


@pytest.fixture
def report(capsys):
    def emit(number, name, passed, detail):
        with capsys.disabled():
            print(f"\ncriterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}")
        assert passed, detail

    return emit


def test_01_kernel_identities(report):
    start = time.perf_counter()
    values = {"||G||_1": (kn.norm_G(1, 1), 1.0), "||grad G||_1": (kn.norm_gradG(1, 1), 1.0)}
    for t in (0.1, 1.0, 10.0):
        values[f"||K({t})||_1"] = (kn.norm_K(1, 1, t), math.exp(-t))
    elapsed = time.perf_counter() - start
    worst = max(abs(a - b) for a, b in values.values())
    report(1, "kernel identities (d=1)", worst <= 1e-6 and elapsed < 1.0,
           f"max abs error {worst:.2e} (tol 1e-6), {elapsed:.2f} s (limit 1 s)")


def test_02_gradient_kernel_exponent(report):
    start = time.perf_counter()
    row = kn.verify_norm_table(1, 1, 0.04, kinds=("gradK_time_exponent",))[0]
    elapsed = time.perf_counter() - start
    ok = abs(row.computed - 0.5) <= 0.05 and elapsed < 5.0
    report(2, "gradient-kernel time exponent", ok,
           f"fitted {row.computed:.4f} over t in [0.01, 0.04] (target 0.5 +- 0.05), {elapsed:.2f} s")


@pytest.fixture(scope="module", params=kinetic.SCHEMES)
def standard_kinetic_run(request):
    sc = standard_bump(cells=128, nodes=16, dt=1e-3, t_end=1.0, scheme=request.param)
    start = time.perf_counter()
    res = kinetic.run(sc.kinetic_state(0.25), sc.params, sc.dt, sc.t_end, sample_every=1, scheme=sc.scheme)
    return request.param, sc, res, time.perf_counter() - start


def test_03_mass_conservation(report, standard_kinetic_run):
    scheme, sc, res, elapsed = standard_kinetic_run
    drift = 0.0
    for i in (1, 2):
        m = res.trajectory.column(f"mass{i}")
        drift = max(drift, float(np.abs(m - m[0]).max() / m[0]))
    report(3, f"mass conservation [{scheme}]", drift <= 1e-12 and elapsed < 30.0,
           f"max relative drift {drift:.2e} (tol 1e-12) over 1000 steps, {elapsed:.1f} s (limit 30 s)")


def test_04_positivity(report, standard_kinetic_run):
    scheme, sc, res, _ = standard_kinetic_run
    worst = min(res.trajectory.column(f"min_ratio_{i}").min() for i in (1, 2))
    clipped = max(res.trajectory.column(f"clipped_{i}")[-1] for i in (1, 2))
    report(4, f"positivity [{scheme}]", worst >= -1e-14,
           f"min f / max|f| = {worst:.3e} (floor -1e-14); negative mass removed by limiter {clipped:.1e}")


def test_05_linf_envelope(report, standard_kinetic_run):
    scheme, sc, res, _ = standard_kinetic_run
    t = res.trajectory.column("time")
    V, eps = sc.velocities.measure, 0.25
    worst = 0.0
    for i, sp in enumerate(sc.params, start=1):
        linf = res.trajectory.column(f"linf_{i}")
        envelope = 1.05 * linf[0] * np.exp(V * sp.psi * (1 + eps * sp.theta.amp) * t)
        worst = max(worst, float((linf / envelope).max()))
    report(5, f"L-infinity envelope [{scheme}]", worst <= 1.0,
           f"max ||f(t)||_inf / envelope = {worst:.4f} (must be <= 1)")


@pytest.mark.parametrize("scheme", kinetic.SCHEMES)
def test_06_equilibrium_preservation(report, scheme):
    sc = standard_bump(cells=128, nodes=16)
    grid, vs = sc.grid, sc.velocities
    worst = 0.0
    for delta in (0, 1):
        st_ = kinetic.well_prepared(grid, vs, np.full(grid.cells, 1.0), np.full(grid.cells, 0.5), 0.25, delta)
        f0 = (st_.f1.copy(), st_.f2.copy())
        for _ in range(100):
            st_ = kinetic.step(st_, sc.params, 1e-3, scheme=scheme)
        worst = max(worst, *(float(np.abs(f - g).max() / g.max()) for f, g in zip(st_.species, f0)))
    report(6, f"equilibrium preservation [{scheme}]", worst <= 1e-12,
           f"max relative change after 100 steps, delta in {{0,1}}: {worst:.2e} (tol 1e-12)")


@pytest.mark.parametrize("scheme", kinetic.SCHEMES)
def test_07_species_symmetry(report, scheme):
    sc = standard_bump(cells=128, nodes=16)
    params = (sc.params[0], sc.params[0])
    st_ = kinetic.well_prepared(sc.grid, sc.velocities, sc.rho1, sc.rho1, 0.25)
    worst = 0.0
    for _ in range(300):
        st_ = kinetic.step(st_, params, 1e-3, scheme=scheme)
        worst = max(worst, float(np.abs(st_.f1 - st_.f2).max()))
    report(7, f"species symmetry [{scheme}]", worst <= 1e-14,
           f"max ||f1 - f2||_inf over 300 steps: {worst:.2e} (tol 1e-14)")


def test_08_spectral_exactness(report):
    grid = SpatialGrid(1, 2 * math.pi, 64)
    x = grid.centers()[0]
    rho = np.cos(3 * x)
    err_elliptic = float(np.abs(solve_elliptic(grid, rho).S - rho / 10).max())
    f = initial_parabolic(grid, rho)
    for _ in range(200):
        f = step_parabolic(f, rho, 1.0)
    err_fixed = float(np.abs(f.S - solve_elliptic(grid, rho).S).max())
    report(8, "spectral chemoattractant exactness", max(err_elliptic, err_fixed) <= 1e-10,
           f"single-mode elliptic error {err_elliptic:.1e}, parabolic fixed point error {err_fixed:.1e} (tol 1e-10)")


@pytest.fixture(scope="module")
def sweep():
    sc = standard_bump()
    start = time.perf_counter()
    with ThreadPoolExecutor(4) as pool:
        rep = dg.eps_sweep(sc, SWEEP_EPS, pool=pool)
    return rep, time.perf_counter() - start


def test_09_diffusive_limit(report, sweep):
    rep, elapsed = sweep
    decreasing = bool(np.all(np.diff(rep.err_l1, axis=0) < 0))
    ok = decreasing and rep.fitted_order >= 0.8 and elapsed < 600
    errs = "; ".join(f"rho{i + 1}: " + ", ".join(f"{e:.2e}" for e in rep.err_l1[:, i]) for i in range(2))
    report(9, "diffusive limit", ok,
           f"L1 errors {errs}; strictly decreasing={decreasing}; fitted order {rep.fitted_order:.3f} "
           f"(>= 0.8; per species {rep.orders[0]:.3f}, {rep.orders[1]:.3f}); {elapsed:.0f} s")


def test_10_uniform_fluctuation_bound(report, sweep):
    rep, _ = sweep
    ratios = [float(rep.r_l2[:, i].max() / rep.r_l2[:, i].min()) for i in range(2)]
    report(10, "uniform fluctuation bound", max(ratios) <= 1.5,
           f"max/min of time-integrated L2 fluctuation: {ratios[0]:.3f}, {ratios[1]:.3f} (<= 1.5)")


def test_11_corrector_consistency(report, sweep):
    rep, _ = sweep
    monotone = bool(np.all(np.diff(rep.corrector, axis=0) < 0))
    vals = "; ".join(", ".join(f"{c:.3f}" for c in rep.corrector[:, i]) for i in range(2))
    report(11, "corrector consistency", monotone, f"residuals per species: {vals}; decreasing={monotone}")


def _macro_slopes(sc, params, rho1, rho2, dt, t_end):
    res = macro.run(macro.make_state(sc.grid, sc.velocities, rho1, rho2), params, dt, t_end, sample_every=10)
    traj = res.trajectory
    t = traj.column("time")
    worst = -np.inf
    grew = False
    for i, sp in enumerate(params, start=1):
        d_min = float(np.linalg.eigvalsh(macro.diffusion_coefficient(sp, sc.velocities)).min())
        chi_inf = float(traj.column(f"chi_max_{i}").max())
        allowed = 1.1 * chi_inf**2 / (2 * d_min)
        growth = np.log(traj.column(f"l2_{i}") / traj.column(f"l2_{i}")[0])
        grew |= bool(growth.max() > 0)
        # envelope form: log growth up to each time against the allowed slope times that time
        worst = max(worst, float((growth[1:] - allowed * t[1:]).max()))
    return worst, grew


def test_12_macro_gronwall(report):
    sc = standard_bump(cells=128, nodes=16)
    standard, _ = _macro_slopes(sc, sc.params, sc.rho1, sc.rho2, 1e-3, 0.5)
    sharp = ResponseFunction("tanh", 0.5, 0.05)
    params = (SpeciesParams(1.0, sharp), SpeciesParams(2.0, sharp))
    concentrating, grew = _macro_slopes(sc, params, gaussian_bump(sc.grid, 1.5, 0.8, 20.0),
                                        gaussian_bump(sc.grid, 1.0, 0.8, 10.0), 1e-3, 0.5)
    ok = standard <= 0 and concentrating <= 0 and grew
    report(12, "macro L2 Gronwall", ok,
           f"max(log growth - 1.1 chi^2/(2 D_min) t): standard {standard:.2e}, aggregating {concentrating:.2e} "
           f"(<= 0; aggregating run has growing L2: {grew})")


def _run_cli(tmp: Path, threads: int, doc: dict, command: str) -> Path:
    work = tmp / f"threads{threads}"
    work.mkdir()
    (work / "run.json").write_text(json.dumps(doc))
    assert main([command, "--config", str(work / "run.json"), "--threads", str(threads)]) == 0
    return work / "out"


def test_13_determinism(report, tmp_path):
    kinetic_doc = {
        "solver": "kinetic", "grid": {"dim": 1, "extent": 3.0, "cells": 128}, "velocity": {"nodes_per_axis": 16},
        "species": [{"psi": 1.0}, {"psi": 2.0}], "eps": 0.25, "dt": 1e-3, "t_end": 0.2,
        "init": {"kind": "gaussian-bump", "species": [{"center": 1.5, "width": 0.25, "mass": 1.0},
                                                      {"center": 1.8, "width": 0.2, "mass": 0.5}]},
        "output": {"directory": "out", "snapshot_stride": 50},
    }
    sweep_doc = {**kinetic_doc, "solver": "sweep", "eps_list": [0.5, 0.25, 0.125], "t_end": 0.5}
    compared, mismatched = 0, []
    for label, doc, command in (("simulate", kinetic_doc, "simulate"), ("sweep", sweep_doc, "sweep")):
        base = tmp_path / label
        base.mkdir()
        one = _run_cli(base, 1, doc, command)
        four = _run_cli(base, 4, doc, command)
        names = sorted(p.name for p in one.iterdir())
        assert names == sorted(p.name for p in four.iterdir())
        for name in names:
            compared += 1
            if (one / name).read_bytes() != (four / name).read_bytes():
                mismatched.append(f"{label}/{name}")
        shutil.rmtree(base)
    report(13, "determinism across thread counts", not mismatched,
           f"{compared} output files compared (CSV, JSON, snapshots, PNG), mismatches: {mismatched or 'none'}")
