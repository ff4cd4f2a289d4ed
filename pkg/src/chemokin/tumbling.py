"""Tumbling rates ``psi (1 + eps theta(z))`` and the discrete collision operator.

For one spatial cell with tumble arguments ``z_k = eps dtS + v_k . gradS``
the rate of leaving velocity ``v_k`` is ``phi_k = psi (1 + eps theta(z_k))``
towards every ``v_k'``.  The collision operator is therefore

    (M f)_k = |V| phi_k f_k - sum_k' w_k' phi_k' f_k'

which is a diagonal matrix minus a rank-one term.  Implicit solves with
``I + lam M`` use the Sherman-Morrison form and are vectorised over cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chemokin.geometry import VelocitySet

THETA_KINDS = ("tanh", "clamped-linear")


class CollisionSolveError(RuntimeError):
    """The implicit collision system is singular at some spatial cell."""

    def __init__(self, cell, message: str):
        super().__init__(f"{message} at cell {cell}")
        self.cell = cell


@dataclass(frozen=True)
class ResponseFunction:
    """Nonincreasing, bounded, Lipschitz response ``theta``.

    ``tanh``: ``-amp tanh(z / sigma)``;
    ``clamped-linear``: ``-clip(z / sigma, -amp, amp)``.
    """

    kind: str = "tanh"
    amp: float = 0.5
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in THETA_KINDS:
            raise ValueError(f"unknown response kind {self.kind!r}; expected one of {THETA_KINDS}")
        if not 0 <= self.amp < 1:
            raise ValueError(f"response amplitude must satisfy 0 <= amp < 1 (||theta||_inf < 1), got {self.amp}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def __call__(self, z):
        z = np.asarray(z, dtype=float) / self.sigma
        if self.kind == "tanh":
            return -self.amp * np.tanh(z)
        return -np.clip(z, -self.amp, self.amp)

    def derivative(self, z):
        z = np.asarray(z, dtype=float) / self.sigma
        if self.kind == "tanh":
            return -self.amp / np.cosh(z) ** 2 / self.sigma
        return np.where(np.abs(z) < self.amp, -1.0 / self.sigma, 0.0)

    @property
    def lipschitz(self) -> float:
        return self.amp / self.sigma if self.kind == "tanh" else 1.0 / self.sigma

    @property
    def smooth(self) -> bool:
        return self.kind == "tanh"


@dataclass(frozen=True)
class SpeciesParams:
    psi: float = 1.0
    theta: ResponseFunction = ResponseFunction()

    def __post_init__(self):
        if not self.psi > 0:
            raise ValueError(f"psi must be positive, got {self.psi}")


def _check_eps(eps: float) -> None:
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1] for a positive tumbling rate, got {eps}")


def tumbling_rate(sp: SpeciesParams, eps: float, argument):
    """``psi (1 + eps theta(argument))``; broadcasts over array arguments."""
    _check_eps(eps)
    return sp.psi * (1.0 + eps * sp.theta(argument))


def decompose(sp: SpeciesParams, eps: float, arg_v, arg_vprime):
    """Symmetric and anti-symmetric parts of the kernel between ``v`` and ``v'``.

    ``T(v <- v') = phi(arg_v')`` so ``phiS + phiA`` reconstructs it and
    ``phiS - phiA`` gives ``T(v' <- v)``.
    """
    _check_eps(eps)
    th_v, th_vp = sp.theta(arg_v), sp.theta(arg_vprime)
    phi_s = sp.psi * (1.0 + 0.5 * eps * (th_vp + th_v))
    phi_a = sp.psi * 0.5 * eps * (th_vp - th_v)
    return phi_s, phi_a


def collision_matrix(sp: SpeciesParams, vs: VelocitySet, eps: float, args) -> np.ndarray:
    """Dense ``N_v x N_v`` collision matrix for one cell."""
    phi = tumbling_rate(sp, eps, np.asarray(args, dtype=float))
    return vs.measure * np.diag(phi) - np.outer(np.ones(vs.size), vs.weights * phi)


def collision_matrix_split(sp: SpeciesParams, vs: VelocitySet, eps: float, args):
    """``(M0, M1)`` with ``collision_matrix = M0 + eps * M1``."""
    _check_eps(eps)
    ones = np.ones(vs.size)
    m0 = sp.psi * (vs.measure * np.eye(vs.size) - np.outer(ones, vs.weights))
    th = sp.theta(np.asarray(args, dtype=float))
    m1 = sp.psi * (vs.measure * np.diag(th) - np.outer(ones, vs.weights * th))
    return m0, m1


def apply_collision(vs: VelocitySet, phi: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``M f`` for every cell; ``phi`` and ``f`` have the velocity axis last."""
    gain = vs.integrate(phi * f)
    return vs.measure * phi * f - gain[..., None]


def solve_implicit_collision(vs: VelocitySet, phi: np.ndarray, f: np.ndarray, lam: float) -> np.ndarray:
    """Solve ``(I + lam M) g = f`` cell by cell.

    ``I + lam M`` is a nonsingular M-matrix whenever ``phi > 0``: the
    off-diagonal entries ``-lam w_k' phi_k'`` are nonpositive and the
    weighted column sums equal ``w_k' > 0``.  Nonnegative ``f`` therefore
    gives nonnegative ``g``, and ``sum_k w_k g_k = sum_k w_k f_k``.
    """
    diag = 1.0 + lam * vs.measure * phi
    cell_ok = np.all(diag > 0, axis=-1)
    if not np.all(cell_ok):
        bad = np.unravel_index(int(np.argmin(cell_ok)), cell_ok.shape)
        raise CollisionSolveError(bad, "implicit collision matrix is not an M-matrix (nonpositive tumbling rate)")
    a = lam * phi
    # 1 - sum w a/d rewritten with sum w = |V| so that large lam does not cancel
    denom = vs.integrate(1.0 / diag) / vs.measure
    s = vs.integrate(a * f / diag) / denom
    return (f + s[..., None]) / diag
