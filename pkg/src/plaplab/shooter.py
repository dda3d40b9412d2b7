"""Neumann boundary value solver by shooting on ``d = u(0)``.

The miss function ``M(d) = w(1)`` vanishes exactly on Neumann solutions. We
scan ``M`` for sign changes, refine each bracket with Brent's method and keep
the radially nondecreasing (cone) solutions.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .problem import ProblemParams
from .radial_ode import (
    N_OUT,
    TOL_ODE,
    EscapeError,
    IntegrationError,
    RadialProfile,
    integrate,
    terminal_flux,
)

TOL_BVP = 1e-10
TOL_MONO = 1e-8
D_MIN = 1e-3
N_SCAN = 400
# far above any flux a bounded solution can carry
ESCAPE_SENTINEL = 1e6


class Kind(str, enum.Enum):
    CONSTANT = "constant"
    GROUND_STATE = "ground_state"
    HIGHER_ENERGY = "higher_energy"
    UNCLASSIFIED = "unclassified"


class RefineError(RuntimeError):
    """Root refinement failed; ``bracket`` is the last bracket known to be valid."""

    def __init__(self, msg: str, bracket: tuple[float, float]):
        super().__init__(msg)
        self.bracket = bracket


@dataclass(frozen=True, eq=False)
class Solution:
    profile: RadialProfile
    u0: float
    miss_residual: float
    in_cone: bool
    energy: float = math.nan
    nehari_h: float = math.nan
    kind: Kind = Kind.UNCLASSIFIED

    @property
    def params(self) -> ProblemParams:
        return self.profile.params

    @property
    def is_constant(self) -> bool:
        return self.u0 == 1.0 and not np.any(self.profile.fluxes)

    def to_dict(self, profile_ref: str | None = None) -> dict:
        return {
            "u0": self.u0,
            "missResidual": self.miss_residual,
            "inCone": self.in_cone,
            "kind": self.kind.value,
            "energy": self.energy,
            "nehariH": self.nehari_h,
            "profileRef": profile_ref,
        }


@dataclass
class Survey:
    """Everything one scan found, not only the cone solutions."""

    params: ProblemParams
    cone: list[Solution] = field(default_factory=list)
    non_cone: list[Solution] = field(default_factory=list)
    fold_suspects: list[float] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)


def _signed_flux(w, status):
    """Map escaped trajectories to a signed sentinel so they still bracket."""
    w = np.asarray(w, dtype=float).copy()
    bad = status != 0
    w[bad] = np.copysign(ESCAPE_SENTINEL, w[bad])
    return w


def miss(params: ProblemParams, d: float, *, n_out: int = N_OUT, tol: float = TOL_ODE) -> float:
    """Terminal flux ``w(1)`` of :func:`~plaplab.radial_ode.integrate`."""
    try:
        return float(integrate(params, d, n_out, tol=tol).fluxes[-1])
    except EscapeError as exc:
        return math.copysign(ESCAPE_SENTINEL, exc.flux)


def scan_values(params: ProblemParams, ds, *, tol: float = TOL_ODE) -> np.ndarray:
    """Miss function on an array of shooting values (free stepping, for scans)."""
    w, status = terminal_flux(params, ds, tol=tol)
    if np.any((status != 0) & (status != 1) & (status != 2)):
        bad = np.asarray(ds)[(status == 3) | (status == 4)]
        raise IntegrationError(f"integration failed for d in {bad.tolist()}")
    return _signed_flux(w, status)


def _sign_changes(ds: np.ndarray, vals: np.ndarray) -> list[tuple[float, float]]:
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    return [(float(ds[i]), float(ds[i + 1])) for i in idx]


def _fold_suspects(ds, vals, tol_bvp) -> list[float]:
    """Local minima of |M| below sqrt(tol_bvp) without a sign change next to them."""
    a = np.abs(vals)
    out = []
    for i in range(1, len(ds) - 1):
        if a[i] <= a[i - 1] and a[i] <= a[i + 1] and a[i] < math.sqrt(tol_bvp):
            if np.sign(vals[i - 1]) == np.sign(vals[i]) == np.sign(vals[i + 1]):
                out.append(float(ds[i]))
    return out


def scan_brackets(params: ProblemParams, d_lo: float, d_hi: float, n_scan: int = N_SCAN,
                  *, tol: float = TOL_ODE) -> list[tuple[float, float]]:
    """Consecutive pairs of a uniform ``d`` grid where ``M`` strictly changes sign."""
    if not (0 < d_lo < d_hi) or n_scan < 2:
        raise ValueError("need 0 < d_lo < d_hi and n_scan >= 2")
    ds = np.linspace(d_lo, d_hi, n_scan)
    return _sign_changes(ds, scan_values(params, ds, tol=tol))


def is_cone(profile: RadialProfile, tol_mono: float = TOL_MONO) -> bool:
    u = profile.values
    return bool(np.all(np.diff(u) >= -tol_mono) and u[0] <= 1.0 + tol_mono
                and u[-1] >= 1.0 - tol_mono)


def constant_solution(params: ProblemParams, n_out: int = N_OUT) -> Solution:
    profile = integrate(params, 1.0, n_out)
    return Solution(profile, 1.0, abs(float(profile.fluxes[-1])), True, kind=Kind.CONSTANT)


def refine_root(params: ProblemParams, bracket: tuple[float, float],
                tol_bvp: float = TOL_BVP, *, n_out: int = N_OUT, tol: float = TOL_ODE,
                tol_mono: float = TOL_MONO) -> Solution:
    """Refine a sign-change bracket of ``M`` into a :class:`Solution`.

    A bracket containing ``d = 1`` returns the constant solution.

    Raises:
        RefineError: an endpoint or iterate failed to integrate, the bracket
            does not straddle a root, or the residual stays above ``tol_bvp``.
    """
    lo, hi = sorted(map(float, bracket))
    if lo <= 1.0 <= hi:
        # the equilibrium is exact; brackets around it come from callers
        # probing d = 1 directly (the scan windows leave it out)
        return constant_solution(params, n_out)
    last = [lo, hi]
    f_lo = miss(params, lo, n_out=n_out, tol=tol)
    f_hi = miss(params, hi, n_out=n_out, tol=tol)
    if f_lo == 0.0:
        hi = lo
    elif f_hi == 0.0:
        lo = hi
    elif math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise RefineError(f"M has equal signs on [{lo}, {hi}]", (lo, hi))

    def f(d):
        try:
            val = float(integrate(params, d, n_out, tol=tol).fluxes[-1])
        except EscapeError as exc:
            val = math.copysign(ESCAPE_SENTINEL, exc.flux)
        except IntegrationError as exc:
            raise RefineError(str(exc), (last[0], last[1])) from exc
        if math.copysign(1.0, val) == math.copysign(1.0, f_lo):
            last[0] = d
        else:
            last[1] = d
        return val

    if lo == hi:
        d_star = lo
    else:
        d_star = brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    profile = integrate(params, d_star, n_out, tol=tol)
    residual = abs(float(profile.fluxes[-1]))
    if residual > tol_bvp:
        raise RefineError(f"residual {residual:.3e} above tolerance at d={d_star!r}",
                          (last[0], last[1]))
    return Solution(profile, float(d_star), residual, is_cone(profile, tol_mono))


def _dedupe(solutions: list[Solution], tol_bvp: float) -> list[Solution]:
    out: list[Solution] = []
    for s in sorted(solutions, key=lambda s: s.u0):
        if out and abs(s.u0 - out[-1].u0) < 10 * tol_bvp:
            if s.miss_residual < out[-1].miss_residual:
                out[-1] = s
            continue
        out.append(s)
    return out


def survey(params: ProblemParams, n_scan: int = N_SCAN, *, d_min: float = D_MIN,
           scan_above: bool = True, tol_bvp: float = TOL_BVP, n_out: int = N_OUT,
           tol: float = TOL_ODE, tol_mono: float = TOL_MONO) -> Survey:
    """Find every Neumann root of ``M`` on the scan windows.

    Below the equilibrium the window is ``[d_min, 1 - d_min]``; above it
    ``[1 + d_min, s0]``. The strip around ``d = 1`` only hosts the constant
    solution, where ``M`` is too flat for a sign scan to mean anything.
    """
    out = Survey(params)
    windows = [(d_min, 1.0 - d_min)]
    if scan_above:
        windows.append((1.0 + d_min, params.derived.s0))
    found: list[Solution] = []
    for lo, hi in windows:
        ds = np.linspace(lo, hi, n_scan)
        vals = scan_values(params, ds, tol=tol)
        out.fold_suspects.extend(_fold_suspects(ds, vals, tol_bvp))
        for br in _sign_changes(ds, vals):
            try:
                found.append(refine_root(params, br, tol_bvp, n_out=n_out, tol=tol,
                                         tol_mono=tol_mono))
            except RefineError as exc:
                out.failures.append(f"{br}: {exc}")
    found.append(constant_solution(params, n_out))
    for s in _dedupe(found, tol_bvp):
        (out.cone if s.in_cone else out.non_cone).append(s)
    return out


def solve_all(params: ProblemParams, n_scan: int = N_SCAN, **kwargs) -> list[Solution]:
    """Cone solutions sorted by ``u0``; the constant solution is always included."""
    return survey(params, n_scan, **kwargs).cone


def write_solutions(solutions: list[Solution], directory) -> Path:
    """Write ``solutions.json`` plus one ``profile_<u0>.csv`` per solution."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    records = []
    for s in solutions:
        ref = f"profile_{s.u0:.12f}.csv"
        s.profile.to_csv(directory / ref)
        records.append(s.to_dict(ref))
    path = directory / "solutions.json"
    path.write_text(json.dumps(records, indent=2) + "\n")
    return path


def with_energy(solution: Solution, energy: float, nehari_h: float) -> Solution:
    return replace(solution, energy=energy, nehari_h=nehari_h)


__all__ = [
    "Kind", "RefineError", "Solution", "Survey", "miss", "scan_brackets", "refine_root",
    "survey", "solve_all", "is_cone", "constant_solution", "write_solutions",
]
