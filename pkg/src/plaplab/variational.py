"""Energy functional, Nehari projection and ground-state classification.

Integrals over the ball use the radial measure ``dx = ω r^{N-1} dr`` and
composite Simpson on the profile grid. Gradients always come from the stored
fluxes, never from differencing the values.

Near both ends of a Neumann profile, ``u`` and ``|u'|^p`` carry a term
``s^α`` with ``α = p/(p-1)`` (``s`` the distance to the end), which caps
Simpson at order ``h^{α+1}``. When ``α`` is not an integer, one Richardson
step against the ``2h`` rule removes that term.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .problem import ProblemParams
from .radial_ode import RadialProfile
from .shooter import Kind, Solution

# energies closer than this are treated as a tie
ENERGY_TIE = 1e-10


@dataclass(frozen=True)
class EnergyReport:
    w1p_norm_pow: float
    lq_norm_pow: float
    energy: float
    nehari_h: float
    nehari_residual: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def f_q(s, params: ProblemParams):
    """Nonlinearity ``s^{q-1}``, continued above ``s0`` with subcritical growth ``ell``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("f_q is defined for s >= 0 only")
    q = params.q
    dc = params.derived
    s0, ell = dc.s0, dc.ell
    high = s0 ** (q - 1.0) + (q - 1.0) / (ell - 1.0) * s0 ** (q - ell) * (
        np.maximum(s, s0) ** (ell - 1.0) - s0 ** (ell - 1.0))
    out = np.where(s <= s0, s ** (q - 1.0), high)
    return out if out.ndim else float(out)


def F_q(s, params: ProblemParams):
    """Antiderivative of :func:`f_q` vanishing at 0."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("F_q is defined for s >= 0 only")
    q = params.q
    dc = params.derived
    s0, ell = dc.s0, dc.ell
    t = np.maximum(s, s0)
    coef = (q - 1.0) / (ell - 1.0) * s0 ** (q - ell)
    high = (s0**q / q + (s0 ** (q - 1.0) - coef * s0 ** (ell - 1.0)) * (t - s0)
            + coef * (t**ell - s0**ell) / ell)
    out = np.where(s <= s0, s**q / q, high)
    return out if out.ndim else float(out)


def _simpson_uniform(h: float, v: np.ndarray) -> float:
    return float(h / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()))


def _quad(radii: np.ndarray, values: np.ndarray, alpha: float | None = None) -> float:
    """Composite Simpson; with ``alpha``, extrapolate away an ``h^{alpha+1}`` error."""
    n = len(radii)
    h = radii[1] - radii[0]
    if n % 2 == 0 or not np.allclose(np.diff(radii), h, rtol=1e-12, atol=0):
        return float(simpson(values, x=radii))
    fine = _simpson_uniform(h, values)
    if alpha is None or abs(alpha - round(alpha)) < 1e-12 or (n - 1) % 4:
        return fine
    coarse = _simpson_uniform(2.0 * h, values[::2])
    return fine + (fine - coarse) / (2.0 ** (alpha + 1.0) - 1.0)


def radial_integral(profile: RadialProfile,
                    integrand: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> float:
    """``∫_B integrand(u, u') dx`` for a radial profile."""
    r = profile.radii
    vals = np.asarray(integrand(profile.values, profile.derivative), dtype=float)
    vals = np.broadcast_to(vals, r.shape)
    p, N = profile.params.p, profile.params.N
    weight = r ** (N - 1) if N > 1 else np.ones_like(r)
    return profile.params.omega * _quad(r, weight * vals, p / (p - 1.0))


def energy(profile: RadialProfile, *, check_tol: float = 1e-10) -> EnergyReport:
    """Energy, norms and Nehari data of a profile.

    The energy is integrated with the truncated primitive ``F_q``. When the
    profile stays below ``s0`` the norm form ``‖u‖^p/p - ‖u‖_q^q/q`` is also
    evaluated and both must agree to ``check_tol`` (relative).
    """
    params = profile.params
    p, q = params.p, params.q
    if np.any(profile.values < 0):
        raise ValueError("energy needs a nonnegative profile")
    w1p = radial_integral(profile, lambda u, du: np.abs(du) ** p + u**p)
    lq = radial_integral(profile, lambda u, du: u**q)
    via_f = radial_integral(profile, lambda u, du: (np.abs(du) ** p + u**p) / p - F_q(u, params))
    below = float(profile.values.max()) <= params.derived.s0
    if below:
        closed = w1p / p - lq / q
        scale = max(abs(closed), abs(w1p / p), abs(lq / q))
        if abs(via_f - closed) > check_tol * scale:
            raise ArithmeticError(f"energy mismatch: {via_f!r} vs {closed!r}")
        h = w1p / lq if lq > 0 else math.inf
    else:
        h = nehari_scale(profile)
    resid = abs(w1p - lq) / w1p if w1p > 0 else math.inf
    return EnergyReport(w1p, lq, via_f, h, resid)


def nehari_project(profile: RadialProfile) -> float:
    """Scalar ``h > 0`` placing ``h u`` on the Nehari set (closed form below ``s0``).

    The caller must check that ``h u`` itself stays below ``s0`` if the
    identity is to hold for the untruncated nonlinearity.
    """
    params = profile.params
    p, q = params.p, params.q
    if not np.any(profile.values != 0):
        raise ValueError("cannot project the zero profile")
    num = radial_integral(profile, lambda u, du: np.abs(du) ** p + np.abs(u) ** p)
    den = radial_integral(profile, lambda u, du: np.abs(u) ** q)
    return num / den


def nehari_scale(profile: RadialProfile) -> float:
    """Nehari scalar for profiles exceeding ``s0``, by root finding on the fibre.

    Solves ``t^p ‖u‖^p = ∫ f_q(t u) t u`` for ``t > 0``; the map
    ``t ↦ ∫ f_q(tu) tu / t^p`` is increasing, so the root is unique.
    """
    params = profile.params
    p = params.p
    num = radial_integral(profile, lambda u, du: np.abs(du) ** p + np.abs(u) ** p)

    def phi(t):
        return radial_integral(profile, lambda u, du: f_q(t * np.abs(u), params)
                               * t * np.abs(u)) / t**p - num

    lo, hi = 1e-3, 1.0
    while phi(lo) > 0:
        lo *= 0.5
    while phi(hi) < 0:
        hi *= 2.0
    return brentq(phi, lo, hi, xtol=1e-14, rtol=1e-14)


def attach_energy(solution: Solution) -> Solution:
    rep = energy(solution.profile)
    return replace(solution, energy=rep.energy, nehari_h=rep.nehari_h)


def attach_energies(solutions: list[Solution]) -> list[Solution]:
    return [attach_energy(s) for s in solutions]


def constant_energy(params: ProblemParams) -> float:
    """Energy of ``u ≡ 1``: ``|B| (1/p - 1/q)``."""
    return params.ball_volume * (1.0 / params.p - 1.0 / params.q)


def ground_state(solutions: list[Solution]) -> Solution:
    """Minimal-energy solution; ties (within ``ENERGY_TIE``) go to the smaller ``u0``."""
    if not solutions:
        raise ValueError("no solutions to choose from")
    e_min = min(s.energy for s in solutions)
    tied = [s for s in solutions if s.energy - e_min <= ENERGY_TIE * max(1.0, abs(e_min))]
    return min(tied, key=lambda s: s.u0)


def classify(solutions: list[Solution]) -> list[Solution]:
    """Label solutions as constant, ground state or higher energy.

    Energies are attached first when missing. The constant solution keeps
    ``Kind.CONSTANT`` even when it is the minimizer.
    """
    if not solutions:
        raise ValueError("classify needs at least one solution")
    params = solutions[0].params
    if any(s.params != params for s in solutions):
        raise ValueError("all solutions must share parameters")
    sols = [attach_energy(s) if math.isnan(s.energy) else s for s in solutions]
    i_one = constant_energy(params)
    gs = ground_state(sols)
    out = []
    for s in sols:
        if s.is_constant:
            kind = Kind.CONSTANT
        elif s is gs:
            kind = Kind.GROUND_STATE
        elif s.energy > i_one:
            kind = Kind.HIGHER_ENERGY
        else:
            kind = Kind.UNCLASSIFIED
        out.append(replace(s, kind=kind))
    return out
