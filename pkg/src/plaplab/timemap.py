"""Time-map oracle for the one-dimensional problem.

For N = 1 the equation is autonomous and

    H = ((p-1)/p) |u'|^p - G(u),     G(s) = s^p/p - s^q/q,

is conserved. A monotone orbit leaving ``u = a < 1`` with ``u' = 0`` stops at
the conjugate level ``b > 1`` with ``G(b) = G(a)``, after the "time"

    T(a) = ∫_a^b [ (p/(p-1)) (G(u) - G(a)) ]^{-1/p} du.

Nondecreasing Neumann solutions on (0, 1) are exactly the roots of T(a) = 1.
None of this touches the shooting integrator, which is the point.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

A_MIN = 1e-3
N_SCAN = 400


class NearEquilibriumError(ValueError):
    """The starting level is too close to the equilibrium u = 1."""


def potential(s: float, p: float, q: float) -> float:
    return s**p / p - s**q / q


def _level_gap(x: float, delta: float, p: float, q: float) -> float:
    """G(x + delta) - G(x) without cancellation."""
    lr = math.log1p(delta / x)
    return x**p * math.expm1(p * lr) / p - x**q * math.expm1(q * lr) / q


def conjugate_endpoint(a: float, p: float, q: float) -> float:
    """The level ``b > 1`` on the same ``G``-level as ``a``."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"need 0 < a < 1, got a={a}")
    s_max = (q / p) ** (1.0 / (q - p))  # G(s_max) = 0 = G(0)
    ga = potential(a, p, q)
    return brentq(lambda s: potential(s, p, q) - ga, 1.0, s_max, xtol=1e-15, rtol=1e-15)


def time_map(a: float, p: float, q: float, *, epsrel: float = 1e-10) -> float:
    """Length of the monotone orbit from ``a`` up to its conjugate level.

    The endpoint singularities behave like ``(u-a)^{-1/p}`` and
    ``(b-u)^{-1/p}``; on each half the substitution ``u - a = L t^k`` with
    ``k = p/(p-1)`` (mirrored at ``b``) makes the integrand bounded, after
    which adaptive Gauss-Kronrod converges quickly.
    """
    if not 0.0 < a < 1.0:
        raise ValueError(f"need 0 < a < 1, got a={a}")
    slope_a = a ** (p - 1.0) - a ** (q - 1.0)
    if abs(slope_a) < 1e-12:
        raise NearEquilibriumError(f"a={a} is too close to the equilibrium")
    b = conjugate_endpoint(a, p, q)
    slope_b = b ** (p - 1.0) - b ** (q - 1.0)
    L = b - a
    k = p / (p - 1.0)
    c = p / (p - 1.0)
    expo = -1.0 / p

    def from_left(t):
        if t == 0.0:
            return (c * slope_a) ** expo * L ** (1.0 + expo) * k
        d = L * t**k
        return (c * _level_gap(a, d, p, q)) ** expo * L * k * t ** (k - 1.0)

    def from_right(t):
        if t == 0.0:
            return (-c * slope_b) ** expo * L ** (1.0 + expo) * k
        d = L * t**k
        return (c * _level_gap(b, -d, p, q)) ** expo * L * k * t ** (k - 1.0)

    t_mid = 0.5 ** (1.0 / k)
    left = quad(from_left, 0.0, t_mid, epsabs=0.0, epsrel=epsrel, limit=200)[0]
    right = quad(from_right, 0.0, t_mid, epsabs=0.0, epsrel=epsrel, limit=200)[0]
    return left + right


def scan_grid(n_scan: int = N_SCAN, a_min: float = A_MIN) -> np.ndarray:
    return np.linspace(a_min, 1.0 - a_min, n_scan)


def oracle_solve(p: float, q: float, *, n_scan: int = N_SCAN, a_min: float = A_MIN,
                 xtol: float = 1e-12, level: float = 1.0) -> list[float]:
    """All roots of ``T(a) = level`` on the scan window, sorted.

    ``level = 1`` gives the nondecreasing Neumann solutions; ``level = 1/k``
    gives ``k``-lap profiles, used only as a diagnostic.
    """
    grid = scan_grid(n_scan, a_min)
    vals = np.array([time_map(a, p, q) - level for a in grid])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        roots.append(brentq(lambda a: time_map(a, p, q) - level, grid[i], grid[i + 1],
                            xtol=xtol, rtol=1e-15))
    return sorted(roots)


def oracle_profile(a: float, p: float, q: float, n: int = 201):
    """Nondecreasing orbit from ``a`` reconstructed from the energy relation.

    Returns ``(r, u, du)``: the arrival radius of each of ``n`` levels
    between ``a`` and ``b``, the levels themselves, and ``u'`` there.
    """
    b = conjugate_endpoint(a, p, q)
    L = b - a
    k = p / (p - 1.0)
    c = p / (p - 1.0)
    ts = np.linspace(0.0, 1.0, n)
    levels = a + L * ts**k
    levels[-1] = b
    du = np.zeros(n)
    for i in range(1, n - 1):
        du[i] = (c * _level_gap(a, levels[i] - a, p, q)) ** (1.0 / p)

    def integrand(t):
        return (c * _level_gap(a, L * t**k, p, q)) ** (-1.0 / p) * L * k * t ** (k - 1.0)

    r = np.zeros(n)
    for i in range(1, n - 1):
        r[i] = r[i - 1] + quad(integrand, ts[i - 1], ts[i], epsabs=0.0, epsrel=1e-11)[0]
    r[-1] = time_map(a, p, q)
    return r, levels, du
