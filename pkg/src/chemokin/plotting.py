"""Figures written next to the CSV outputs (non-interactive Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from chemokin.geometry import SpatialGrid  # noqa: E402

# fixed metadata keeps PNG bytes reproducible
_PNG_META = {"Software": None}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)


def plot_densities(path, grid: SpatialGrid, rho1, rho2, S=None, title: str = "") -> None:
    """Line plot in 1D; side-by-side images in 2D."""
    fields = [("rho_1", rho1), ("rho_2", rho2)] + ([("S", S)] if S is not None else [])
    if grid.dim == 1:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        x = grid.axis_centers(0)
        for name, f in fields:
            ax.plot(x, f, label=name)
        ax.set_xlabel("x")
        ax.legend()
    else:
        fig, axes = plt.subplots(1, len(fields), figsize=(4 * len(fields), 3.5))
        extent = (0, grid.extent[1], 0, grid.extent[0])
        for ax, (name, f) in zip(axes, fields):
            im = ax.imshow(f, origin="lower", extent=extent, aspect="auto")
            ax.set_title(name)
            fig.colorbar(im, ax=ax)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def plot_timeseries(path, trajectory, columns=None) -> None:
    """Each column divided by its first value, against time."""
    t = trajectory.column("time")
    columns = columns or [c for c in trajectory.columns if c.startswith(("l2_", "l4_", "linf_"))]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for c in columns:
        y = trajectory.column(c)
        ax.plot(t, y / y[0] if y[0] else y, label=c)
    ax.set_xlabel("t")
    ax.set_ylabel("relative to t=0")
    ax.legend(fontsize="small", ncol=2)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(path, report) -> None:
    """Log-log errors and fluctuation norms against eps."""
    eps = np.asarray(report.eps_values)
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(2):
        ax.loglog(eps, report.err_l1[:, i], "o-", label=f"L1 error rho_{i + 1}")
        ax.loglog(eps, report.r_l2[:, i], "s--", label=f"fluctuation L2, species {i + 1}")
    ax.loglog(eps, report.err_l1[-1, 0] * (eps / eps[-1]), "k:", label="slope 1")
    ax.set_xlabel("eps")
    ax.set_title(f"fitted order {report.fitted_order:.3f}")
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)
