"""Free-space Bessel potential ``G`` and damped heat kernel ``K``.

These kernels give ``S = G * rho`` (elliptic case) and
``S = int_0^t K(., s) * rho(., t - s) ds`` (parabolic case) on the whole
space.  The production chemoattractant solver is spectral on the torus, so
this module only evaluates the kernels and verifies their norm identities
by adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

QUAD_RTOL = 1e-10
KINDS = ("G", "gradG", "K", "gradK", "K_time", "gradK_time", "K_time_exponent", "gradK_time_exponent")


class NormRangeError(ValueError):
    """Requested (dim, p) pair lies outside the range where the norm is finite."""


def _radius(dim: int, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != dim:
        raise ValueError(f"point has {x.size} components, expected {dim}")
    return float(np.sqrt(np.sum(x * x)))


def _check_dim(dim: int) -> None:
    if dim not in (1, 2):
        raise ValueError(f"kernels are implemented for dim 1 and 2, got {dim}")


def _bessel_integral(r: float, power: int) -> float:
    # int_0^inf exp(-pi r^2/s - s/(4pi)) s^-power ds/s, with s = e^u
    def integrand(u):
        if abs(u) > 700.0:
            return 0.0
        return math.exp(-math.pi * r * r * math.exp(-u) - math.exp(u) / (4.0 * math.pi) - power * u)

    # integrand peaks near e^u = 2 pi r
    centre = math.log(max(2.0 * math.pi * r, 1e-300))
    left, _ = integrate.quad(integrand, -np.inf, centre, epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
    right, _ = integrate.quad(integrand, centre, np.inf, epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
    return left + right


def G_radial(dim: int, r: float) -> float:
    _check_dim(dim)
    if dim == 1:
        return 0.5 * math.exp(-abs(r))
    if r == 0:
        raise ZeroDivisionError("the two-dimensional Bessel potential is singular at x = 0")
    return _bessel_integral(r, 0) / (4.0 * math.pi)


def gradG_radial(dim: int, r: float) -> float:
    """``|grad G|`` as a function of ``|x|``."""
    _check_dim(dim)
    if dim == 1:
        return 0.5 * math.exp(-abs(r))
    if r == 0:
        raise ZeroDivisionError("grad G is singular at x = 0 in two dimensions")
    return r * _bessel_integral(r, 1) / 2.0


def eval_G(dim: int, x) -> float:
    return G_radial(dim, _radius(dim, x))


def eval_gradG(dim: int, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = _radius(dim, x)
    if dim == 1:
        return np.array([-math.copysign(1.0, x[0]) * 0.5 * math.exp(-r)]) if r else np.zeros(1)
    return -x / r * gradG_radial(dim, r)


def _check_time(t: float) -> None:
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")


def K_radial(dim: int, r, t: float):
    _check_dim(dim)
    _check_time(t)
    return np.exp(-np.square(r) / (4.0 * t) - t) / (4.0 * math.pi * t) ** (dim / 2.0)


def eval_K(dim: int, x, t: float) -> float:
    return float(K_radial(dim, _radius(dim, x), t))


def eval_gradK(dim: int, x, t: float) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return -x / (2.0 * t) * eval_K(dim, x, t)


# ---------------------------------------------------------------------------
# norms by quadrature


def _sphere_area(dim: int) -> float:
    return 2.0 if dim == 1 else 2.0 * math.pi


def _radial_lp(dim: int, g, p: float, scale: float = 1.0) -> float:
    """``||g||_p`` for a radial function ``g(r)`` on ``R^dim``."""
    area = _sphere_area(dim)

    def integrand(y):
        r = scale * y
        return abs(g(r)) ** p * r ** (dim - 1)

    total = 0.0
    for a, b in ((0.0, 1.0), (1.0, np.inf)):
        val, _ = integrate.quad(integrand, a, b, epsrel=QUAD_RTOL, epsabs=0.0, limit=200)
        total += val
    return (area * scale * total) ** (1.0 / p)


def _radial_sup(g, scale: float = 1.0) -> float:
    res = optimize.minimize_scalar(lambda r: -abs(g(r)), bounds=(0.0, 10.0 * scale),
                                   method="bounded", options={"xatol": 1e-12 * scale})
    return float(max(abs(g(0.0)), -res.fun))


def norm_G(dim: int, p: float) -> float:
    if math.isinf(p):
        return _radial_sup(lambda r: G_radial(dim, r))
    return _radial_lp(dim, lambda r: G_radial(dim, r), p)


def norm_gradG(dim: int, p: float) -> float:
    if math.isinf(p):
        return _radial_sup(lambda r: gradG_radial(dim, r))
    return _radial_lp(dim, lambda r: gradG_radial(dim, r), p)


def norm_K(dim: int, p: float, t: float) -> float:
    g = lambda r: float(K_radial(dim, r, t))  # noqa: E731
    if math.isinf(p):
        return _radial_sup(g, math.sqrt(t))
    return _radial_lp(dim, g, p, scale=math.sqrt(4.0 * t))


def norm_gradK(dim: int, p: float, t: float) -> float:
    g = lambda r: float(r / (2.0 * t) * K_radial(dim, r, t))  # noqa: E731
    if math.isinf(p):
        return _radial_sup(g, math.sqrt(t))
    return _radial_lp(dim, g, p, scale=math.sqrt(4.0 * t))


def time_integral(norm, t: float) -> float:
    """``int_0^t norm(s) ds`` with ``s = u^2`` to tame the ``s = 0`` singularity."""
    val, _ = integrate.quad(lambda u: 2.0 * u * norm(u * u) if u > 0 else 0.0,
                            0.0, math.sqrt(t), epsrel=1e-9, epsabs=0.0, limit=200)
    return val


# ---------------------------------------------------------------------------
# closed forms used as references


def _K_power(dim: int, p: float) -> float:
    """Exponent ``a`` with ``||K(., s)||_p = c s^a e^-s``."""
    inv = 0.0 if math.isinf(p) else 1.0 / p
    return dim * (inv - 1.0) / 2.0


def _gradK_power(dim: int, p: float) -> float:
    return _K_power(dim, p) - 0.5


def K_norm_exact(dim: int, p: float, t: float) -> float:
    if math.isinf(p):
        return (4.0 * math.pi * t) ** (-dim / 2.0) * math.exp(-t)
    return (4.0 * math.pi * t) ** (dim / 2.0 * (1.0 / p - 1.0)) * p ** (-dim / (2.0 * p)) * math.exp(-t)


def gradK_norm_exact(dim: int, p: float, t: float) -> float:
    if math.isinf(p):
        # sup of r/(2t) exp(-r^2/4t) is at r = sqrt(2t)
        r = math.sqrt(2.0 * t)
        return r / (2.0 * t) * K_norm_exact(dim, math.inf, t) * math.exp(-0.5)
    a = p / (4.0 * t)
    moment = _sphere_area(dim) * math.gamma((p + dim) / 2.0) / (2.0 * a ** ((p + dim) / 2.0))
    value = (2.0 * t) ** (-p) * (4.0 * math.pi * t) ** (-dim * p / 2.0) * moment
    return value ** (1.0 / p) * math.exp(-t)


def _time_integral_exact(c: float, power: float, t: float) -> float:
    # int_0^t c s^power e^-s ds = c * lower incomplete gamma(power + 1, t)
    return c * special.gammainc(power + 1.0, t) * special.gamma(power + 1.0)


def K_time_exact(dim: int, p: float, t: float) -> float:
    power = _K_power(dim, p)
    c = K_norm_exact(dim, p, 1.0) * math.e
    return _time_integral_exact(c, power, t)


def gradK_time_exact(dim: int, p: float, t: float) -> float:
    power = _gradK_power(dim, p)
    c = gradK_norm_exact(dim, p, 1.0) * math.e
    return _time_integral_exact(c, power, t)


def G_norm_reference(dim: int, p: float) -> float:
    """``||G||_p`` from an independent formula (1D closed form, 2D via ``K_0``)."""
    if dim == 1:
        return 0.5 if math.isinf(p) else 0.5 * (2.0 / p) ** (1.0 / p)
    return _radial_lp(2, lambda r: special.k0(r) / (2.0 * math.pi), p)


def gradG_norm_reference(dim: int, p: float) -> float:
    if dim == 1:
        return G_norm_reference(1, p)
    return _radial_lp(2, lambda r: special.k1(r) / (2.0 * math.pi), p)


def lemma_time_exponent(dim: int, p: float, gradient: bool) -> float:
    """Power of ``t`` in the bounds on ``int_0^t ||K||_p`` and ``int_0^t ||grad K||_p``."""
    inv = 0.0 if math.isinf(p) else 1.0 / p
    return dim * (inv - 1.0) / 2.0 + (0.5 if gradient else 1.0)


# ---------------------------------------------------------------------------
# verification table


@dataclass(frozen=True)
class NormRow:
    kind: str
    dim: int
    p: float
    t: float
    computed: float
    reference: float
    passed: bool


def check_range(dim: int, p: float, kinds) -> None:
    _check_dim(dim)
    if not p >= 1:
        raise NormRangeError(f"p must satisfy p >= 1, got p={p}")
    # d/(d-2) is read as +inf for d <= 2 and d/(d-1) as +inf for d = 1
    if dim == 2 and math.isinf(p) and any(k in ("G", "K_time", "K_time_exponent") for k in kinds):
        raise NormRangeError(f"G and K norms need p < d/(d-2) = inf in dim {dim}, got p={p}")
    limit = math.inf if dim == 1 else dim / (dim - 1)
    if not p < limit and any(k.startswith("grad") for k in kinds):
        raise NormRangeError(f"gradient norms need p < d/(d-1) = {limit:g} in dim {dim}, got p={p}")


def _fit_exponent(integral, t: float) -> float:
    return math.log(integral(t) / integral(t / 4.0)) / math.log(4.0)


def verify_norm_table(dim: int, p: float, t: float, kinds=None, tol: float = 1e-6,
                      exponent_tol: float = 0.05) -> list[NormRow]:
    """Quadrature check of the kernel norm identities and bounds.

    Equalities are checked against closed forms (relative tolerance ``tol``).
    Time-integrated bounds are checked as ``computed <= C t^a`` with the
    constant obtained from ``e^-s <= 1``; the fitted exponent between
    ``t/4`` and ``t`` must not exceed the bound's exponent, and must match it
    within ``exponent_tol`` when ``t <= 0.05``.
    """
    kinds = tuple(KINDS if kinds is None else kinds)
    unknown = set(kinds) - set(KINDS)
    if unknown:
        raise ValueError(f"unknown kernel kinds {sorted(unknown)}")
    check_range(dim, p, kinds)
    _check_time(t)
    rows = []

    def close(a, b):
        return abs(a - b) <= tol * abs(b)

    for kind in kinds:
        if kind == "G":
            val, ref = norm_G(dim, p), G_norm_reference(dim, p)
            rows.append(NormRow(kind, dim, p, math.nan, val, ref, close(val, ref)))
        elif kind == "gradG":
            val, ref = norm_gradG(dim, p), gradG_norm_reference(dim, p)
            rows.append(NormRow(kind, dim, p, math.nan, val, ref, close(val, ref)))
        elif kind == "K":
            val, ref = norm_K(dim, p, t), K_norm_exact(dim, p, t)
            rows.append(NormRow(kind, dim, p, t, val, ref, close(val, ref)))
        elif kind == "gradK":
            val, ref = norm_gradK(dim, p, t), gradK_norm_exact(dim, p, t)
            rows.append(NormRow(kind, dim, p, t, val, ref, close(val, ref)))
        elif kind in ("K_time", "gradK_time"):
            grad = kind == "gradK_time"
            norm = (lambda s: norm_gradK(dim, p, s)) if grad else (lambda s: norm_K(dim, p, s))
            exact = gradK_time_exact(dim, p, t) if grad else K_time_exact(dim, p, t)
            val = time_integral(norm, t)
            power = (_gradK_power if grad else _K_power)(dim, p)
            c = (gradK_norm_exact if grad else K_norm_exact)(dim, p, 1.0) * math.e
            bound = c * t ** (power + 1.0) / (power + 1.0)
            rows.append(NormRow(kind, dim, p, t, val, exact, close(val, exact) and val <= bound * (1 + tol)))
        else:
            grad = kind == "gradK_time_exponent"
            norm = (lambda s: norm_gradK(dim, p, s)) if grad else (lambda s: norm_K(dim, p, s))
            fitted = _fit_exponent(lambda s: time_integral(norm, s), t)
            ref = lemma_time_exponent(dim, p, grad)
            ok = fitted <= ref + exponent_tol
            if t <= 0.05:
                ok = ok and abs(fitted - ref) <= exponent_tol
            rows.append(NormRow(kind, dim, p, t, fitted, ref, ok))
    return rows
