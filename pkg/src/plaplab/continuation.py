"""Bifurcation diagrams in the exponent ``p`` at fixed ``q`` and ``N``.

A sweep solves the Neumann problem on a grid of ``p`` values, links the
roots into branches in the ``(p, u(0))`` plane and locates the turning points
where branches are born. Two roots that appear together at the same ``p``
next to each other in ``u(0)`` are the two halves of one fold and form a
single branch.

Besides the nondecreasing solutions, the diagram also carries the
non-monotone Neumann solutions starting below 1 (they leave ``u = a``, pass
their maximum and come back). They are linked separately and flagged with
``in_cone = False``.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .problem import ProblemParams
from .shooter import D_MIN, N_SCAN, Kind, scan_values, survey
from .variational import attach_energies, classify

log = logging.getLogger(__name__)

LINK_JUMP = 0.1
FOLD_WINDOW = 0.05


class FoldRefinementError(RuntimeError):
    pass


@dataclass(frozen=True)
class BranchPoint:
    p: float
    u0: float
    energy: float
    kind: Kind
    in_cone: bool = True


@dataclass
class Branch:
    """A connected curve of roots.

    ``halves`` holds one or two point lists, each strictly increasing in
    ``p``; two halves meet at the fold. ``fold_bracket`` is the pair of
    consecutive sweep values between which the branch was born.
    """

    halves: list[list[BranchPoint]]
    fold_p: float | None = None
    fold_refined: bool = False
    fold_bracket: tuple[float, float] | None = None
    in_cone: bool = True
    id: int = 0

    @property
    def points(self) -> list[BranchPoint]:
        """Points along the curve: first half traversed toward the fold, then away."""
        if len(self.halves) == 1:
            return list(self.halves[0])
        return list(reversed(self.halves[0])) + list(self.halves[1])

    @property
    def p_min(self) -> float:
        return min(h[0].p for h in self.halves)

    @property
    def birth_u0(self) -> float:
        return float(np.mean([h[0].u0 for h in self.halves]))


class SweepPoints(list):
    """List of :class:`BranchPoint` with per-``p`` failures attached."""

    def __init__(self, points=(), failures=None):
        super().__init__(points)
        self.failures: list[tuple[float, str]] = list(failures or [])


def _points_at(q: float, N: int, p: float, n_scan: int, include_non_cone: bool):
    params = ProblemParams(p, q, N)
    sv = survey(params, n_scan, scan_above=False)
    pts = []
    for s in classify(sv.cone):
        pts.append(BranchPoint(p, s.u0, s.energy, s.kind, True))
    if include_non_cone:
        for s in attach_energies([s for s in sv.non_cone if s.u0 < 1.0]):
            pts.append(BranchPoint(p, s.u0, s.energy, Kind.UNCLASSIFIED, False))
    return pts, sv.failures


def sweep_p(q: float, N: int, p_grid, *, n_scan: int = N_SCAN, include_non_cone: bool = True,
            jobs: int = 1) -> SweepPoints:
    """Solve at every ``p`` of the grid and collect one point per root.

    The constant solution contributes ``u0 = 1`` at every ``p``. Failures at
    one ``p`` are logged and recorded; the sweep goes on.
    """
    p_grid = [float(p) for p in p_grid]
    if any(b <= a for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p_grid must be increasing")

    def run(p):
        try:
            return _points_at(q, N, p, n_scan, include_non_cone)
        except Exception as exc:  # a single bad p must not abort the sweep
            return None, f"{type(exc).__name__}: {exc}"

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(run, p_grid))
    else:
        results = [run(p) for p in p_grid]
    out = SweepPoints()
    for p, (pts, failures) in zip(p_grid, results):
        if pts is None:
            log.warning("p=%s skipped: %s", p, failures)
            out.failures.append((p, failures))
            continue
        out.extend(pts)
        for f in failures:
            out.failures.append((p, f))
    return out


def _link_class(points: list[BranchPoint], p_values: list[float], jump: float):
    by_p: dict[float, list[BranchPoint]] = {}
    for pt in points:
        by_p.setdefault(pt.p, []).append(pt)
    chains: list[list[BranchPoint]] = []
    births: list[int] = []
    for i, p in enumerate(p_values):
        current = sorted(by_p.get(p, []), key=lambda pt: pt.u0)
        open_ = [c for c in chains if i > 0 and c[-1].p == p_values[i - 1]]
        pairs = sorted(
            (abs(c[-1].u0 - pt.u0), ci, pi)
            for ci, c in enumerate(open_)
            for pi, pt in enumerate(current)
            if abs(c[-1].u0 - pt.u0) <= jump
        )
        used_c, used_p = set(), set()
        for _, ci, pi in pairs:
            if ci in used_c or pi in used_p:
                continue
            open_[ci].append(current[pi])
            used_c.add(ci)
            used_p.add(pi)
        for pi, pt in enumerate(current):
            if pi not in used_p:
                chains.append([pt])
                births.append(i)
    return chains, births


def link_branches(points, *, jump: float = LINK_JUMP) -> list[Branch]:
    """Greedy nearest-neighbour linking in ``u0`` between adjacent sweep values.

    The constant line is excluded. Chains born at the same interior sweep
    value and adjacent in ``u0`` are paired into one fold branch.
    """
    p_values = sorted({pt.p for pt in points})
    branches: list[Branch] = []
    for cone_flag in (True, False):
        pts = [pt for pt in points if pt.in_cone == cone_flag and pt.kind != Kind.CONSTANT]
        if not pts:
            continue
        chains, births = _link_class(pts, p_values, jump)
        by_birth: dict[int, list[list[BranchPoint]]] = {}
        for c, b in zip(chains, births):
            by_birth.setdefault(b, []).append(c)
        for b, group in sorted(by_birth.items()):
            group.sort(key=lambda c: c[0].u0)
            bracket = (p_values[b - 1], p_values[b]) if b > 0 else None
            fold_p = p_values[b] if b > 0 else None
            if b == 0:
                for c in group:
                    branches.append(Branch([c], None, False, None, cone_flag))
                continue
            while group:
                c = group.pop(0)
                if group and abs(group[0][0].u0 - c[0].u0) <= 2 * jump:
                    branches.append(Branch([c, group.pop(0)], fold_p, False, bracket,
                                           cone_flag))
                else:
                    branches.append(Branch([c], fold_p, False, bracket, cone_flag))
    branches.sort(key=lambda br: (not br.in_cone, br.p_min, br.birth_u0))
    for i, br in enumerate(branches):
        br.id = i
    return branches


def _extremum_sign(params: ProblemParams, center: float, halfwidth: float,
                   outside_sign: float, n: int = 101) -> tuple[float, float]:
    """Smallest value of ``outside_sign * M`` near ``center`` and where it occurs."""
    lo = max(D_MIN, center - halfwidth)
    hi = min(1.0 - D_MIN, center + halfwidth)
    ds = np.linspace(lo, hi, n)
    vals = outside_sign * scan_values(params, ds)
    i = int(np.argmin(vals))
    if vals[i] < 0:
        return float(vals[i]), float(ds[i])
    a, b = ds[max(i - 1, 0)], ds[min(i + 1, n - 1)]
    res = minimize_scalar(lambda d: outside_sign * float(scan_values(params, [d])[0]),
                          bounds=(a, b), method="bounded", options={"xatol": 1e-12})
    return float(res.fun), float(res.x)


def refine_fold(q: float, N: int, branch: Branch, tol_p: float = 1e-3, *,
                window: float = FOLD_WINDOW) -> float:
    """Bisect in ``p`` on "a root continuing this branch exists".

    Near a fold the two roots sit in a dip of ``|M|`` that may be narrower
    than the sweep's scan spacing, so the predicate looks at the extremum of
    ``M`` in a small window rather than at sign changes on a grid.
    """
    if branch.fold_bracket is None:
        raise FoldRefinementError("branch has no interior birth point to refine")
    p_lo, p_hi = branch.fold_bracket
    center = branch.birth_u0

    def outside_sign(p):
        m = float(scan_values(ProblemParams(p, q, N), [center])[0])
        return math.copysign(1.0, m)

    sign = outside_sign(p_lo)

    def exists(p):
        val, loc = _extremum_sign(ProblemParams(p, q, N), center, window, sign)
        return val < 0, loc

    ok, _ = exists(p_hi)
    if not ok:
        raise FoldRefinementError(f"no root near u0={center:.4f} at p={p_hi}")
    widened = False
    while exists(p_lo)[0]:
        if widened:
            raise FoldRefinementError(f"root persists below p={p_lo}; fold not bracketed")
        p_lo -= p_hi - p_lo
        if p_lo <= 1.0:
            raise FoldRefinementError("fold bracket left the admissible range p > 1")
        sign = outside_sign(p_lo)
        widened = True
    while p_hi - p_lo > tol_p:
        mid = 0.5 * (p_lo + p_hi)
        ok, loc = exists(mid)
        if ok:
            p_hi = mid
            center = loc
        else:
            p_lo = mid
    branch.fold_p = 0.5 * (p_lo + p_hi)
    branch.fold_refined = True
    return branch.fold_p


def default_p_grid(p_min: float = 1.1, p_max: float = 2.0, step: float = 0.01) -> np.ndarray:
    n = int(round((p_max - p_min) / step)) + 1
    return np.round(np.linspace(p_min, p_max, n), 12)


@dataclass
class Diagram:
    q: float
    N: int
    points: SweepPoints
    branches: list[Branch] = field(default_factory=list)
    tol_p: float = 1e-3

    def branch_of(self) -> dict[tuple[float, float], int]:
        out = {}
        for br in self.branches:
            for pt in br.points:
                out[(pt.p, pt.u0)] = br.id
        return out

    def write(self, directory) -> None:
        """Write ``diagram.csv``, ``folds.json``, one ``branch_<id>.dat`` per branch
        and a gnuplot script."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        ids = self.branch_of()
        lines = ["p,u0,energy,kind,branch_id"]
        for pt in sorted(self.points, key=lambda pt: (pt.p, pt.u0)):
            bid = ids.get((pt.p, pt.u0), -1)
            lines.append(f"{pt.p!r},{pt.u0!r},{pt.energy!r},{pt.kind.value},{bid}")
        (directory / "diagram.csv").write_text("\n".join(lines) + "\n")
        report = {
            "q": self.q,
            "N": self.N,
            "branches": [
                {"id": br.id, "fold_p": br.fold_p, "tol_p": self.tol_p if br.fold_refined else None,
                 "foldRefined": br.fold_refined, "inCone": br.in_cone,
                 "pMin": br.p_min, "nPoints": len(br.points)}
                for br in self.branches
            ],
        }
        (directory / "folds.json").write_text(json.dumps(report, indent=2) + "\n")
        plot = [f"set title 'q = {self.q:g}, N = {self.N}'", "set xlabel 'p'",
                "set ylabel 'u(0)'", "set key left top"]
        ps = [pt.p for pt in self.points] or [0.0, 1.0]
        series = ["1 with lines lw 2 title 'u = 1'"]
        for br in self.branches:
            name = f"branch_{br.id}.dat"
            rows = [f"{pt.p!r} {pt.u0!r} {pt.energy!r}" for pt in br.points]
            (directory / name).write_text("# p u0 energy\n" + "\n".join(rows) + "\n")
            label = "cone" if br.in_cone else "non-monotone"
            series.append(f"'{name}' using 1:2 with linespoints title 'branch {br.id} ({label})'")
        plot.append(f"plot [{min(ps)!r}:{max(ps)!r}] " + ", \\\n     ".join(series))
        (directory / "diagram.gp").write_text("\n".join(plot) + "\n")


def bifurcate(q: float, N: int = 1, p_grid=None, *, n_scan: int = N_SCAN,
              tol_p: float = 1e-3, include_non_cone: bool = True, jobs: int = 1) -> Diagram:
    """Sweep, link and refine every fold born inside the sweep window."""
    if p_grid is None:
        p_grid = default_p_grid()
    pts = sweep_p(q, N, p_grid, n_scan=n_scan, include_non_cone=include_non_cone, jobs=jobs)
    branches = link_branches(pts)
    for br in branches:
        if br.fold_bracket is not None:
            try:
                refine_fold(q, N, br, tol_p)
            except FoldRefinementError as exc:
                log.warning("branch %d: %s", br.id, exc)
    return Diagram(q, N, pts, branches, tol_p)
