import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from chemokin import diagnostics as dg, kinetic, macro
from chemokin.chemo import spectral
from chemokin.kinetic import Trajectory
from chemokin.scenarios import gaussian_bump, standard_bump
from chemokin.tumbling import ResponseFunction, SpeciesParams

fields = arrays(float, 16, elements=st.floats(-1e3, 1e3))
orders = st.one_of(st.floats(1.0, 8.0), st.just(np.inf))


def test_lq_norm_examples():
    assert dg.lq_norm(np.full(10, 2.5), 3, 0.1) == pytest.approx(2.5)
    half = np.array([1.0] * 5 + [0.0] * 5)
    assert dg.lq_norm(half, 1, 0.1) == pytest.approx(0.5)
    assert dg.lq_norm(half, 2, 0.1) == pytest.approx(0.5**0.5)
    assert dg.lq_norm(np.array([-3.0, 1.0]), np.inf) == 3.0
    with pytest.raises(ValueError):
        dg.lq_norm(half, 0.5)


@given(a=fields, b=fields, q=orders)
def test_lq_norm_triangle(a, b, q):
    assert dg.lq_norm(a + b, q, 0.3) <= (dg.lq_norm(a, q, 0.3) + dg.lq_norm(b, q, 0.3)) * (1 + 1e-12) + 1e-300


@given(a=fields, q=orders, c=st.floats(-100, 100))
def test_lq_norm_homogeneous(a, q, c):
    assert dg.lq_norm(c * a, q) == pytest.approx(abs(c) * dg.lq_norm(a, q), rel=1e-12, abs=1e-300)


@given(a=fields, q=orders, s=st.floats(1.0, 10.0))
def test_lq_norm_monotone(a, q, s):
    assert dg.lq_norm(s * a, q) >= dg.lq_norm(a, q)


def test_fit_order_recovers_power():
    eps = [0.5, 0.25, 0.125]
    assert dg.fit_order(eps, [3 * e**1.7 for e in eps]) == pytest.approx(1.7, rel=1e-12)


def test_corrector_vanishes_for_uniform_state():
    sc = standard_bump(cells=32, nodes=8)
    grid, vs = sc.grid, sc.velocities
    st_ = kinetic.well_prepared(grid, vs, np.ones(grid.cells), np.ones(grid.cells), 0.25)
    st_ = kinetic.step(st_, sc.params, 1e-3)
    assert dg.corrector_residual(st_, sc.params[0], 0) == 0.0


def test_corrector_without_response_is_pure_gradient():
    sc = standard_bump(cells=64, nodes=8, amp=0.0)
    st_ = sc.kinetic_state(0.25)
    sp = sc.params[1]
    r0 = dg.corrector(st_, sp, 1)
    g = spectral(sc.grid).gradient(sc.rho2)[0]
    expected = -g[:, None] * sc.velocities.nodes[:, 0] / (sp.psi * sc.velocities.measure**2)
    np.testing.assert_allclose(r0, expected, rtol=1e-12, atol=1e-15)


def test_corrector_warns_for_clamped_response():
    sc = standard_bump(cells=32, nodes=8, kind="clamped-linear")
    with pytest.warns(RuntimeWarning, match="smooth"):
        dg.corrector_residual(sc.kinetic_state(0.5), sc.params[0], 0)


@pytest.fixture(scope="module")
def flat_sweep():
    sc = standard_bump(amp=0.0)
    with ThreadPoolExecutor(4) as pool:
        return dg.eps_sweep(sc, [0.5, 0.25, 0.125, 0.0625], pool=pool)


def test_sweep_without_response(flat_sweep):
    rep = flat_sweep
    assert rep.fitted_order >= 0.8
    assert np.all(np.diff(rep.err_l1, axis=0) < 0)
    # frozen regression value of the reference configuration (computed once, <= 0.1 required)
    assert rep.corrector[2, 0] <= 0.1
    assert rep.corrector[2, 0] == pytest.approx(0.08420797423610614, rel=1e-8)


def test_sweep_report_serialisation(flat_sweep):
    lines = flat_sweep.to_csv().splitlines()
    assert lines[0] == ",".join(dg.SWEEP_COLUMNS)
    assert len(lines) == 5
    doc = json.loads(flat_sweep.summary_json())
    assert doc["fitted_order"] == flat_sweep.fitted_order
    assert "\n" not in flat_sweep.summary_json()


def _tiny():
    return standard_bump(cells=32, nodes=8, dt=5e-3, t_end=0.05)


def test_sweep_is_deterministic_across_thread_counts():
    sc = _tiny()
    a = dg.eps_sweep(sc, [0.5, 0.25])
    with ThreadPoolExecutor(2) as pool:
        b = dg.eps_sweep(sc, [0.5, 0.25], pool=pool)
    assert a.to_csv() == b.to_csv()
    assert a.summary_json() == b.summary_json()


def test_sweep_rejects_mismatched_grid():
    sc = _tiny()
    other = standard_bump(cells=64, nodes=8, dt=5e-3, t_end=0.05)
    ref = macro.run(other.macro_state(), other.params, other.dt, other.t_end)
    with pytest.raises(ValueError, match="grid"):
        dg.eps_sweep(sc, [0.5], reference=ref)


@pytest.mark.parametrize("eps", [[0.25, 0.5], [0.5, 0.5], [1.5], [], [0.0]])
def test_sweep_rejects_bad_eps_lists(eps):
    with pytest.raises(ValueError):
        dg.eps_sweep(_tiny(), eps)


def test_bounds_on_equilibrium_run_use_no_slack():
    sc = standard_bump(cells=32, nodes=8)
    grid = sc.grid
    st_ = kinetic.well_prepared(grid, sc.velocities, np.ones(grid.cells), np.ones(grid.cells), 0.25)
    res = kinetic.run(st_, sc.params, 1e-2, 0.5)
    rep = dg.bound_checks(res.trajectory, sc.params, sc.velocities, 0.25)
    assert rep.passed
    for name in ("mass1", "mass2"):
        assert rep[name].worst <= 1e-15
    for name in ("l2_growth_1", "l4_growth_2"):
        assert rep[name].worst <= 1e-15


def test_bounds_on_standard_kinetic_run():
    sc = standard_bump(cells=128, nodes=16, dt=1e-3, t_end=0.3)
    res = kinetic.run(sc.kinetic_state(0.25), sc.params, sc.dt, sc.t_end, sample_every=10)
    rep = dg.bound_checks(res.trajectory, sc.params, sc.velocities, 0.25)
    assert rep.passed, rep.to_csv()
    # independent summation oracle for the mass
    f = res.final.f1
    direct = sum(sc.grid.cell_volume * w * f[j, k] for j in range(f.shape[0]) for k, w in enumerate(sc.velocities.weights))
    assert abs(direct - 1.0) <= 1e-12


def test_macro_growth_bound_with_strong_drift():
    sc = standard_bump(cells=128, nodes=16)
    theta = ResponseFunction("tanh", 0.9, 0.05)
    params = (SpeciesParams(1.0, theta), SpeciesParams(2.0, theta))
    grid, vs = sc.grid, sc.velocities
    st_ = macro.make_state(grid, vs, gaussian_bump(grid, 1.5, 0.4, 20.0), gaussian_bump(grid, 1.0, 0.3, 10.0))
    res = macro.run(st_, params, 1e-3, 0.5, sample_every=10)
    l2 = res.trajectory.column("l2_1")
    assert l2.max() > l2[0]  # the norm does grow, so the check is not vacuous
    rep = dg.bound_checks(res.trajectory, params, vs)
    assert rep.passed, rep.to_csv()


def test_bound_failures_are_reported_not_raised():
    vs = standard_bump(cells=32, nodes=8).velocities
    params = (SpeciesParams(1.0, ResponseFunction("tanh", 0.0, 1.0)),) * 2
    traj = Trajectory(macro.MACRO_COLUMNS)
    for t, m, l2 in ((0.0, 1.0, 1.0), (0.1, 1.0, 2.0)):
        traj.append({c: 1.0 for c in macro.MACRO_COLUMNS} | {"time": t, "mass1": m, "l2_1": l2, "chi_max_1": 0.0,
                                                            "chi_max_2": 0.0})
    rep = dg.bound_checks(traj, params, vs)
    assert not rep.passed
    assert not rep["l2_growth_1"].passed and rep["mass1"].passed
    with pytest.raises(ValueError, match="eps"):
        dg.bound_checks(Trajectory(kinetic.KINETIC_COLUMNS), params, vs)
