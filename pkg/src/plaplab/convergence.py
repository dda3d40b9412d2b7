"""Convergence of ground states as the exponent ``p_n`` approaches a target.

A run builds ``p_n = p ± 2^{-k}``, solves for the ground state at each
``p_n`` and measures its distance to the ground state at ``p`` in
``W^{1,p}``, a ``C^{0,β}`` seminorm and sup norm. It also tracks the energy
gap ``|I_{p_n}(u_{p_n}) - I_p(u_p)|`` and the Nehari ratio
``h_{p_n}(u_p)`` of the target ground state, which tends to 1.

Convergence, not a rate, is what the theory guarantees. The verdict
therefore asks for monotone decrease (one noisy step allowed) and final
values under fixed engineering tolerances.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .problem import ProblemParams
from .radial_ode import N_OUT, RadialProfile, resample
from .shooter import N_SCAN, Solution, solve_all
from .variational import ENERGY_TIE, _quad, classify, ground_state, radial_integral

BETA = 0.5
TOLERANCES = {
    "w1p_diff": 1e-2,
    "holder_diff": 1e-2,
    "sup_diff": 1e-2,
    "energy_gap": 1e-3,
    "h_gap": 1e-3,
}
LIMIT_TOL = 1e-4
SIDES = ("below", "above", "both")


class GridError(ValueError):
    """Two profiles do not live on the same grid or dimension."""


class GroundStateError(LookupError):
    """No nonconstant ground state at the target exponent."""


def difference_norms(a: RadialProfile, b: RadialProfile, p: float,
                     beta: float = BETA) -> tuple[float, float, float]:
    """``W^{1,p}`` norm, ``C^{0,β}`` seminorm and sup norm of ``a - b``.

    Gradients come from each profile's own fluxes. The Hölder quotient is
    maximized over every pair of grid radii, which costs ``O(n²)``.

    Raises:
        GridError: different dimension or radii.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"need 0 < beta <= 1, got {beta}")
    if a.params.N != b.params.N:
        raise GridError(f"dimensions differ: N={a.params.N} vs N={b.params.N}")
    if a.radii.shape != b.radii.shape or not np.array_equal(a.radii, b.radii):
        raise GridError("profiles live on different grids; resample first")
    r = a.radii
    d = a.values - b.values
    dd = a.derivative - b.derivative
    N = a.params.N
    weight = r ** (N - 1) if N > 1 else np.ones_like(r)
    w1p = (a.params.omega * _quad(r, weight * (np.abs(dd) ** p + np.abs(d) ** p))) ** (1.0 / p)
    holder = 0.0
    for i in range(len(r) - 1):
        q = np.abs(d[i + 1:] - d[i]) / (r[i + 1:] - r[i]) ** beta
        holder = max(holder, float(q.max()))
    return float(w1p), holder, float(np.abs(d).max())


def nehari_ratio(profile: RadialProfile, p: float) -> float:
    """``‖u‖^p_{W^{1,p}} / ‖u‖^q_q`` with exponent ``p`` in place of the profile's own."""
    q = profile.params.q
    num = radial_integral(profile, lambda u, du: np.abs(du) ** p + np.abs(u) ** p)
    den = radial_integral(profile, lambda u, du: np.abs(u) ** q)
    return num / den


@dataclass
class Step:
    k: int
    side: str
    p_n: float
    u0: float = math.nan
    w1p_diff: float = math.nan
    holder_diff: float = math.nan
    sup_diff: float = math.nan
    energy_n: float = math.nan
    energy_gap: float = math.nan
    h_of_gs: float = math.nan
    valid: bool = True
    warning: str | None = None

    @property
    def h_gap(self) -> float:
        return abs(self.h_of_gs - 1.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["h_gap"] = self.h_gap
        return d


@dataclass
class Check:
    quantity: str
    side: str
    final: float
    tol: float
    non_monotone_steps: int
    passed: bool


@dataclass
class ConvergenceReport:
    p_target: float
    q: float
    N: int
    beta: float
    side: str
    k_max: int
    u0_target: float
    energy_target: float
    steps: list[Step]
    checks: list[Check] = field(default_factory=list)
    limit_gap: float | None = None
    raw_limit_gap: float | None = None
    warnings: list[str] = field(default_factory=list)
    note: str | None = None
    verdict: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["steps"] = [s.to_dict() for s in self.steps]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        head = (f"{'k':>3} {'side':>6} {'p_n':>12} {'W1p':>11} {'Hoelder':>11} "
                f"{'sup':>11} {'|dI|':>11} {'|h-1|':>11}")
        lines = [head, "-" * len(head)]
        for s in self.steps:
            if not s.valid:
                lines.append(f"{s.k:>3} {s.side:>6} {s.p_n:>12.8f}  skipped: {s.warning}")
                continue
            lines.append(f"{s.k:>3} {s.side:>6} {s.p_n:>12.8f} {s.w1p_diff:>11.3e} "
                         f"{s.holder_diff:>11.3e} {s.sup_diff:>11.3e} {s.energy_gap:>11.3e} "
                         f"{s.h_gap:>11.3e}")
        return "\n".join(lines)


def _on_grid(profile: RadialProfile, n_out: int) -> RadialProfile:
    return profile if len(profile.radii) == n_out else resample(profile, n_out)


def _pick_ground_state(solutions: list[Solution], u0_hint: float | None) -> Solution:
    gs = ground_state(solutions)
    if u0_hint is None:
        return gs
    tied = [s for s in solutions if not s.is_constant
            and abs(s.energy - gs.energy) <= ENERGY_TIE * max(1.0, abs(gs.energy))]
    if len(tied) > 1:
        return min(tied, key=lambda s: abs(s.u0 - u0_hint))
    return gs


def target_ground_state(p: float, q: float, N: int = 1, *,
                        n_scan: int = N_SCAN) -> Solution:
    sols = classify(solve_all(ProblemParams(p, q, N), n_scan))
    gs = ground_state(sols)
    if gs.is_constant:
        raise GroundStateError(f"the ground state at p={p}, q={q} is the constant")
    return gs


def _measure(target: Solution, p_n: float, k: int, side: str, beta: float, n_scan: int,
             n_out: int) -> tuple[Step, np.ndarray | None]:
    params = target.params
    step = Step(k, side, float(p_n))
    try:
        sols = classify(solve_all(params.with_p(p_n), n_scan))
        gs = _pick_ground_state(sols, target.u0)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        step.valid, step.warning = False, f"solve failed: {exc}"
        return step, None
    if gs.is_constant:
        step.valid, step.warning = False, "ground state is the constant solution"
        return step, None
    ref = _on_grid(target.profile, n_out)
    cur = _on_grid(gs.profile, n_out)
    step.u0 = gs.u0
    step.w1p_diff, step.holder_diff, step.sup_diff = difference_norms(
        cur, ref, params.p, beta)
    step.energy_n = gs.energy
    step.energy_gap = abs(gs.energy - target.energy)
    step.h_of_gs = nehari_ratio(ref, p_n)
    return step, cur.values


def convergence_step(target: Solution, p_n: float, *, k: int = 0, side: str = "below",
                     beta: float = BETA, n_scan: int = N_SCAN, n_out: int = N_OUT) -> Step:
    """Solve at ``p_n`` and measure the distance to ``target``.

    A missing nonconstant ground state or a failed solve yields an invalid
    step carrying a warning instead of an exception.
    """
    return _measure(target, p_n, k, side, beta, n_scan, n_out)[0]


def _non_monotone(values: list[float]) -> int:
    return sum(1 for a, b in zip(values, values[1:]) if b > a)


def _extrapolate(steps: list[Step], profiles: dict, p_target: float) -> np.ndarray | None:
    """Linear extrapolation to ``p_n = p_target`` from the last two valid steps."""
    valid = [s for s in steps if s.valid]
    if len(valid) < 2:
        return None
    s1, s2 = valid[-2], valid[-1]
    d1, d2 = abs(s1.p_n - p_target), abs(s2.p_n - p_target)
    u1, u2 = profiles[(s1.side, s1.k)], profiles[(s2.side, s2.k)]
    return (d1 * u2 - d2 * u1) / (d1 - d2)


def run_convergence(p_target: float, q: float, N: int = 1, k_max: int = 7,
                    side: str = "below", *, beta: float = BETA, n_scan: int = N_SCAN,
                    n_out: int = N_OUT, tolerances: dict | None = None,
                    limit_tol: float = LIMIT_TOL, jobs: int = 1) -> ConvergenceReport:
    """Ground-state convergence experiment for ``p_n → p_target``.

    Args:
        side: ``"below"``, ``"above"`` or ``"both"``. With ``"both"`` the
            two one-sided sequences are extrapolated linearly in
            ``|p_n - p_target|`` and their sup distance must be below
            ``limit_tol``.
        tolerances: overrides for :data:`TOLERANCES`.

    Raises:
        GroundStateError: the target itself has only the constant ground state.
    """
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")
    if int(k_max) != k_max or k_max < 3:
        raise ValueError(f"need integer k_max >= 3, got {k_max}")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"need 0 < beta <= 1, got {beta}")
    params = ProblemParams(p_target, q, N)
    tols = {**TOLERANCES, **(tolerances or {})}
    target = target_ground_state(p_target, q, N, n_scan=n_scan)

    sides = ("below", "above") if side == "both" else (side,)
    jobs_list = []
    for sd in sides:
        sign = -1.0 if sd == "below" else 1.0
        for k in range(2, k_max + 1):
            p_n = p_target + sign * 2.0 ** (-k)
            if not 1.0 < p_n < q:
                continue
            jobs_list.append((k, sd, p_n))

    def work(item):
        k, sd, p_n = item
        return _measure(target, p_n, k, sd, beta, n_scan, n_out)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(work, jobs_list))
    else:
        results = [work(item) for item in jobs_list]

    steps = [s for s, _ in results]
    profiles = {(s.side, s.k): prof for s, prof in results if prof is not None}
    order = {"below": 0, "above": 1}
    steps.sort(key=lambda s: (-abs(s.p_n - p_target), order[s.side]))

    report = ConvergenceReport(p_target, q, N, beta, side, int(k_max), target.u0,
                               target.energy, steps)
    report.warnings = [f"k={s.k} {s.side} (p_n={s.p_n:.8f}): {s.warning}"
                       for s in steps if not s.valid]
    if p_target != 2.0:
        report.note = ("the limit of the constructed sequence is checked; uniqueness "
                       "of the limit ground state is not")

    ok = True
    for sd in sides:
        seq = [s for s in steps if s.side == sd and s.valid]
        if len(seq) < 2:
            ok = False
            report.warnings.append(f"{sd}: fewer than two valid steps")
            continue
        for name, tol in tols.items():
            vals = [getattr(s, name) for s in seq]
            bad = _non_monotone(vals)
            passed = bad <= 1 and vals[-1] < tol
            report.checks.append(Check(name, sd, float(vals[-1]), tol, bad, passed))
            ok = ok and passed
    if side == "both":
        by_side = {sd: [s for s in steps if s.side == sd and s.valid] for sd in sides}
        if all(len(v) >= 2 for v in by_side.values()):
            last = [profiles[(v[-1].side, v[-1].k)] for v in by_side.values()]
            report.raw_limit_gap = float(np.abs(last[0] - last[1]).max())
            lim = [_extrapolate(v, profiles, p_target) for v in by_side.values()]
            report.limit_gap = float(np.abs(lim[0] - lim[1]).max())
        ok = ok and report.limit_gap is not None and report.limit_gap < limit_tol
    report.verdict = bool(ok)
    return report
