"""Command-line entry point: ``chemokin {simulate,sweep,validate-kernels,info}``.

Exit codes: 0 success, 1 a validation check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from chemokin import diagnostics, kernels, kinetic, macro
from chemokin.config import ConfigError, RunConfig, load_config
from chemokin.parallel import pmap, resolve_threads, worker_pool
from chemokin.scenarios import Scenario, gaussian_bump
from chemokin.snapshot import SnapshotError, read_snapshot, write_snapshot
from chemokin.tumbling import CollisionSolveError

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 1, 2
SWEEP_R_RATIO = 1.5
SWEEP_MIN_ORDER = 0.8


def initial_data(cfg: RunConfig):
    """``(f1, f2, nv)`` where ``nv = 0`` means ``f`` holds densities."""
    init, grid = cfg.init, cfg.grid
    if init["kind"] == "uniform":
        levels = np.broadcast_to(np.asarray(init["level"], dtype=float), (2,))
        return np.full(grid.cells, levels[0]), np.full(grid.cells, levels[1]), 0
    if init["kind"] == "gaussian-bump":
        b1, b2 = init["species"]
        return (gaussian_bump(grid, b1["center"], b1["width"], b1["mass"]),
                gaussian_bump(grid, b2["center"], b2["width"], b2["mass"]), 0)
    try:
        snap = read_snapshot(init["path"])
    except (OSError, SnapshotError) as exc:
        raise ConfigError("/init/path", str(exc)) from None
    if snap.grid != grid:
        raise ConfigError("/init/path", f"snapshot grid {snap.grid} differs from the configured grid {grid}")
    if len(snap.fields) != 2:
        raise ConfigError("/init/path", f"expected 2 fields in the snapshot, found {len(snap.fields)}")
    if snap.velocity_nodes not in (0, cfg.velocities.size):
        raise ConfigError("/init/path", f"snapshot has {snap.velocity_nodes} velocity nodes, "
                                        f"configuration has {cfg.velocities.size}")
    if any(np.any(f < 0) for f in snap.fields):
        raise ConfigError("/init/path", "initial data must be nonnegative")
    return snap.fields[0], snap.fields[1], snap.velocity_nodes


def scenario_from(cfg: RunConfig) -> Scenario:
    f1, f2, nv = initial_data(cfg)
    if nv:
        raise ConfigError("/init", "the eps sweep needs density initial data (well-prepared states)")
    return Scenario(cfg.grid, cfg.velocities, cfg.species, f1, f2, cfg.dt, cfg.t_end, cfg.delta, cfg.scheme)


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _report_bounds(out: Path, report) -> int:
    _write(out / "bounds.csv", report.to_csv())
    for c in report.checks:
        if not c.passed:
            print(f"bound violated: {c.name} worst={c.worst:.6g} limit={c.limit:.6g}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def simulate(cfg: RunConfig, pool) -> int:
    from chemokin import plotting

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    a, b, nv = initial_data(cfg)
    grid, vs, stride = cfg.grid, cfg.velocities, cfg.snapshot_stride

    if cfg.solver == "kinetic":
        if nv:
            state = kinetic.make_state(grid, vs, a, b, cfg.eps, cfg.delta)
        else:
            state = kinetic.well_prepared(grid, vs, a, b, cfg.eps, cfg.delta)

        def snap(n, st, mom):
            if n % stride == 0:
                write_snapshot(out / f"f_{n:06d}.bin", grid, st.species, vs.size, st.time, st.eps)

        result = kinetic.run(state, cfg.species, cfg.dt, cfg.t_end, cfg.sample_every, [snap],
                             scheme=cfg.scheme, pool=pool)
        final = result.final
        write_snapshot(out / "final.bin", grid, final.species, vs.size, final.time, final.eps)
        mom = kinetic.moments(final)
        rho, eps = mom.rho, final.eps
        report = diagnostics.bound_checks(result.trajectory, cfg.species, vs, eps)
    else:
        if nv:
            a, b = vs.integrate(a), vs.integrate(b)
        state = macro.make_state(grid, vs, a, b, cfg.delta)

        def snap(n, st):
            if n % stride == 0:
                write_snapshot(out / f"rho_{n:06d}.bin", grid, st.rho, 0, st.time, 0.0)

        result = macro.run(state, cfg.species, cfg.dt, cfg.t_end, cfg.sample_every, [snap], pool=pool)
        final = result.final
        rho, eps = final.rho, 0.0
        report = diagnostics.bound_checks(result.trajectory, cfg.species, vs)

    write_snapshot(out / "final_density.bin", grid, rho, 0, final.time, eps)
    _write(out / "timeseries.csv", result.trajectory.to_csv())
    if cfg.figures:
        plotting.plot_densities(out / "densities.png", grid, rho[0], rho[1], final.chem.S,
                                title=f"{cfg.solver} t={final.time:g}")
        plotting.plot_timeseries(out / "timeseries.png", result.trajectory)
    code = _report_bounds(out, report)
    print(f"{cfg.solver} run finished at t={final.time:g}; outputs in {out}")
    return code


def sweep(cfg: RunConfig, pool) -> int:
    from chemokin import plotting

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    report = diagnostics.eps_sweep(scenario_from(cfg), cfg.eps_list, pool=pool)
    _write(out / "sweep.csv", report.to_csv())
    _write(out / "sweep_summary.json", report.summary_json() + "\n")
    if cfg.figures:
        plotting.plot_sweep(out / "sweep.png", report)
    failures = []
    for i in range(2):
        errs = report.err_l1[:, i]
        if np.any(np.diff(errs) >= 0):
            failures.append(f"L1 error of species {i + 1} is not strictly decreasing: {errs.tolist()}")
        ratio = report.r_l2[:, i].max() / report.r_l2[:, i].min()
        if ratio > SWEEP_R_RATIO:
            failures.append(f"fluctuation norm of species {i + 1} varies by {ratio:.3g} > {SWEEP_R_RATIO}")
        if np.any(np.diff(report.corrector[:, i]) >= 0):
            failures.append(f"corrector residual of species {i + 1} is not decreasing")
    if len(report.eps_values) >= 3 and not report.fitted_order >= SWEEP_MIN_ORDER:
        failures.append(f"fitted order {report.fitted_order:.3g} < {SWEEP_MIN_ORDER}")
    for f in failures:
        print(f, file=sys.stderr)
    print(report.summary_json())
    return EXIT_VALIDATION if failures else EXIT_OK


def kernel_rows(matrix: dict, pool=None) -> list:
    """All valid kernel checks over the ``dims x p x t`` matrix."""
    tasks = []
    for dim in matrix["dims"]:
        for p in matrix["p"]:
            kinds = []
            for kind in kernels.KINDS:
                try:
                    kernels.check_range(dim, p, (kind,))
                except kernels.NormRangeError:
                    continue
                kinds.append(kind)
            for t in matrix["t"]:
                tasks.extend((dim, p, t, kind) for kind in kinds)
    return pmap(pool, lambda x: kernels.verify_norm_table(x[0], x[1], x[2], (x[3],))[0], tasks)


def validate_kernels(cfg: RunConfig | None, pool, out: Path) -> int:
    from chemokin.config import DEFAULT_KERNEL_MATRIX

    matrix = cfg.kernels if cfg else DEFAULT_KERNEL_MATRIX
    rows = kernel_rows(matrix, pool)
    # static norms do not depend on t; keep a single row for them
    seen, unique = set(), []
    for r in rows:
        key = (r.kind, r.dim, r.p, None if math.isnan(r.t) else r.t)
        if key not in seen:
            seen.add(key)
            unique.append(r)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["kind,dim,p,t,computed,reference,passed"]
    lines += [f"{r.kind},{r.dim},{r.p!r},{r.t!r},{r.computed!r},{r.reference!r},{int(r.passed)}" for r in unique]
    _write(out / "kernels.csv", "\n".join(lines) + "\n")
    failed = [r for r in unique if not r.passed]
    for r in failed:
        print(f"kernel check failed: {r}", file=sys.stderr)
    print(f"{len(unique) - len(failed)}/{len(unique)} kernel checks passed; report in {out / 'kernels.csv'}")
    return EXIT_VALIDATION if failed else EXIT_OK


def info(cfg: RunConfig) -> int:
    vs = cfg.velocities
    doc = {
        "velocity_measure": vs.measure,
        "velocity_nodes": vs.size,
        "equilibrium": vs.equilibrium,
        "cell_spacing": list(cfg.grid.spacing),
        "species": [],
    }
    a, b, nv = initial_data(cfg)
    if nv:
        a, b = vs.integrate(a), vs.integrate(b)
    state = macro.make_state(cfg.grid, vs, a, b, cfg.delta)
    chis = macro.face_velocities(state, cfg.species)
    for sp, chi in zip(cfg.species, chis):
        D = macro.diffusion_coefficient(sp, vs)
        chi_max = max(float(np.abs(c).max()) for c in chi)
        doc["species"].append({
            "psi": sp.psi,
            "diffusion": D.tolist(),
            "chi_max_initial": chi_max,
            "chi_bound": sp.theta.amp * vs.vmax,
            "max_tumbling_rate": sp.psi * (1.0 + (cfg.eps or 0.0) * sp.theta.amp),
        })
    doc["macro_cfl_dt_initial"] = macro.admissible_dt(state, cfg.species)
    doc["macro_cfl_dt_worst_case"] = macro.CFL_SAFETY * min(cfg.grid.spacing) / max(
        max(sp.theta.amp for sp in cfg.species) * vs.vmax, 1e-300)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $CHEMOKIN_THREADS or 1)")
    parser = argparse.ArgumentParser(prog="chemokin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the configured kinetic or macro solver")
    sub.add_parser("sweep", parents=[common], help="eps sweep against the drift-diffusion limit")
    k = sub.add_parser("validate-kernels", parents=[common], help="kernel norm identities and bounds")
    k.add_argument("--output", type=Path, default=None, help="report directory (default: config output or .)")
    sub.add_parser("info", parents=[common], help="print derived coefficients and step limits")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = resolve_threads(args.threads)
        cfg = load_config(args.config) if args.config else None
        if cfg is None and args.command != "validate-kernels":
            raise ConfigError("", f"--config is required for {args.command}")
        with worker_pool(threads) as pool:
            if args.command == "validate-kernels":
                out = args.output or (cfg.output_dir if cfg else Path("."))
                return validate_kernels(cfg, pool, out)
            if args.command == "info":
                return info(cfg)
            if args.command == "sweep" or cfg.solver == "sweep":
                return sweep(cfg, pool)
            if cfg.solver == "kernels":
                return validate_kernels(cfg, pool, cfg.output_dir)
            return simulate(cfg, pool)
    except (ConfigError, macro.CFLViolation) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # invalid combinations caught by the solvers (e.g. grid/velocity dims)
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CollisionSolveError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
