"""Command-line front end: ``plaplab <command> [flags]``.

Every run writes the fully materialized ``config.json`` next to its outputs
and a timestamped ``run-log.txt``. All other artifacts are deterministic.

Exit codes: 0 success, 1 numerical failure, 2 nothing found, 64 usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .continuation import bifurcate, default_p_grid
from .convergence import SIDES, GroundStateError, run_convergence
from .problem import ParameterError, ProblemParams
from .radial_ode import N_OUT, TOL_ODE, IntegrationError
from .shooter import D_MIN, N_SCAN, TOL_BVP, TOL_MONO, RefineError, survey, write_solutions
from .spectral import LAM_MAX, N_LAM, EigenNotFoundError, radial_neumann_eigenvalue
from .timemap import oracle_solve, time_map
from .variational import classify

EXIT_OK, EXIT_NUMERIC, EXIT_NOT_FOUND, EXIT_USAGE = 0, 1, 2, 64
COMMANDS = ("solve", "bifurcate", "eigen", "converge", "oracle", "crosscheck")
CROSS_P = (1.5, 1.8, 2.0, 2.5, 3.0)
CROSS_Q = (10.0, 30.0, 60.0)
CROSS_TOL = 1e-6

log = logging.getLogger("plaplab")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on; persisted verbatim as ``config.json``."""

    command: str
    p: float | None = None
    q: float | None = None
    N: int = 1
    tolerances: dict = field(default_factory=lambda: {
        "tol_ode": TOL_ODE, "tol_bvp": TOL_BVP, "tol_mono": TOL_MONO,
        "tol_p": 1e-3, "tol_cross": CROSS_TOL,
    })
    grids: dict = field(default_factory=lambda: {
        "n_scan": N_SCAN, "n_out": N_OUT, "d_min": D_MIN,
        "p_min": 1.1, "p_max": 2.0, "p_step": 0.01,
        "k_max": 7, "lam_max": LAM_MAX, "n_lam": N_LAM,
    })
    k: list[int] = field(default_factory=lambda: [2])
    side: str = "below"
    beta: float = 0.5
    require_nonconstant: bool = False
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    output_dir: str = "plaplab-out"
    seedless: bool = True

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        for name, val in self.tolerances.items():
            if not val > 0:
                raise UsageError(f"tolerance {name} must be positive, got {val}")
        if self.side not in SIDES:
            raise UsageError(f"side must be one of {SIDES}")
        if not 0.0 < self.beta < 1.0:
            raise UsageError("beta must lie in (0, 1)")
        if self.jobs < 1:
            raise UsageError("jobs must be at least 1")
        need = {"solve": ("p", "q"), "oracle": ("p", "q"), "converge": ("p", "q"),
                "bifurcate": ("q",)}.get(self.command, ())
        for name in need:
            if getattr(self, name) is None:
                raise UsageError(f"{self.command} needs --{name}")
        if self.command in ("oracle", "crosscheck") and self.N != 1:
            raise UsageError(f"{self.command} is available for N = 1 only")
        if self.p is not None and self.q is not None:
            try:
                ProblemParams(self.p, self.q, self.N)
            except ParameterError as exc:
                raise UsageError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="plaplab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config; flags override it")
    common.add_argument("--output-dir", help="output directory (PLAP_OUTPUT_DIR wins)")
    common.add_argument("--jobs", type=int, help="worker threads")
    common.add_argument("--N", type=int, help="dimension")
    common.add_argument("--n-scan", type=int, help="shooting scan resolution")
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name != "eigen":
            sp.add_argument("--p", type=float)
            sp.add_argument("--q", type=float)
        if name == "solve":
            sp.add_argument("--require-nonconstant", action="store_true", default=None)
        elif name == "bifurcate":
            sp.add_argument("--p-min", type=float)
            sp.add_argument("--p-max", type=float)
            sp.add_argument("--p-step", type=float)
            sp.add_argument("--tol-p", type=float)
        elif name == "eigen":
            sp.add_argument("--k", type=int, nargs="+", help="eigenvalue indices (>= 2)")
            sp.add_argument("--lam-max", type=float)
        elif name == "converge":
            sp.add_argument("--kmax", type=int)
            sp.add_argument("--side", choices=SIDES)
            sp.add_argument("--beta", type=float)
    return parser


def load_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Defaults, then the config file, then explicit flags, then the environment."""
    cfg = RunConfig(args.command)
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if data.get("command", args.command) != args.command:
            raise UsageError(f"config is for {data['command']!r}, not {args.command!r}")
        for key, val in data.items():
            if key in ("tolerances", "grids"):
                getattr(cfg, key).update(val)
            elif hasattr(cfg, key):
                setattr(cfg, key, val)
            else:
                raise UsageError(f"unknown config key {key!r}")
    flags = vars(args)
    for key in ("p", "q", "N", "side", "beta", "require_nonconstant", "jobs", "output_dir"):
        if flags.get(key) is not None:
            setattr(cfg, key, flags[key])
    if flags.get("k") is not None:
        cfg.k = list(flags["k"])
    for key, dest in (("n_scan", "n_scan"), ("p_min", "p_min"), ("p_max", "p_max"),
                      ("p_step", "p_step"), ("kmax", "k_max"), ("lam_max", "lam_max")):
        if flags.get(key) is not None:
            cfg.grids[dest] = flags[key]
    if flags.get("tol_p") is not None:
        cfg.tolerances["tol_p"] = flags["tol_p"]
    if environ.get("PLAP_OUTPUT_DIR"):
        cfg.output_dir = environ["PLAP_OUTPUT_DIR"]
    cfg.validate()
    return cfg


def _solver_kwargs(cfg: RunConfig) -> dict:
    t, g = cfg.tolerances, cfg.grids
    return {"d_min": g["d_min"], "tol_bvp": t["tol_bvp"], "n_out": g["n_out"],
            "tol": t["tol_ode"], "tol_mono": t["tol_mono"]}


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    params = ProblemParams(cfg.p, cfg.q, cfg.N)
    sv = survey(params, cfg.grids["n_scan"], **_solver_kwargs(cfg))
    for msg in sv.failures:
        log.warning("refinement failure: %s", msg)
    sols = classify(sv.cone)
    write_solutions(sols, out)
    print(f"{'u0':>16} {'energy':>14} {'h':>14}  kind")
    for s in sols:
        print(f"{s.u0:>16.12f} {s.energy:>14.10f} {s.nehari_h:>14.10f}  {s.kind.value}")
    if cfg.require_nonconstant and all(s.is_constant for s in sols):
        print("no nonconstant cone solution", file=sys.stderr)
        return EXIT_NOT_FOUND
    return EXIT_OK


def cmd_bifurcate(cfg: RunConfig, out: Path) -> int:
    g = cfg.grids
    grid = default_p_grid(g["p_min"], g["p_max"], g["p_step"])
    diagram = bifurcate(cfg.q, cfg.N, grid, n_scan=g["n_scan"],
                        tol_p=cfg.tolerances["tol_p"], jobs=cfg.jobs)
    for p, msg in diagram.points.failures:
        log.warning("p=%r: %s", p, msg)
    diagram.write(out)
    print(f"{'id':>3} {'class':>13} {'p_min':>8} {'fold_p':>10} {'points':>7}")
    for br in diagram.branches:
        fold = "-" if br.fold_p is None else f"{br.fold_p:.5f}"
        label = "cone" if br.in_cone else "non-monotone"
        print(f"{br.id:>3} {label:>13} {br.p_min:>8.3f} {fold:>10} {len(br.points):>7}")
    if not diagram.branches:
        print("no nonconstant branch in the window", file=sys.stderr)
        return EXIT_NOT_FOUND
    return EXIT_OK


def cmd_eigen(cfg: RunConfig, out: Path) -> int:
    results = []
    for k in cfg.k:
        try:
            res = radial_neumann_eigenvalue(cfg.N, k, lam_max=cfg.grids["lam_max"],
                                            n_lam=cfg.grids["n_lam"])
        except EigenNotFoundError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_NOT_FOUND
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        results.append(json.loads(res.to_json()))
        print(f"k={k}  lambda={res.lam:.12f}  residual={res.residual:.2e}")
    (out / "eigen.json").write_text(json.dumps({"N": cfg.N, "eigenvalues": results},
                                               indent=2) + "\n")
    return EXIT_OK


def cmd_converge(cfg: RunConfig, out: Path) -> int:
    try:
        rep = run_convergence(cfg.p, cfg.q, cfg.N, cfg.grids["k_max"], cfg.side,
                              beta=cfg.beta, n_scan=cfg.grids["n_scan"],
                              n_out=cfg.grids["n_out"], jobs=cfg.jobs)
    except GroundStateError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NOT_FOUND
    (out / "convergence.json").write_text(rep.to_json() + "\n")
    print(rep.table())
    for w in rep.warnings:
        print(f"warning: {w}")
    for c in rep.checks:
        if not c.passed:
            print(f"failed: {c.side} {c.quantity} final {c.final:.3e} (tol {c.tol:.0e}), "
                  f"{c.non_monotone_steps} non-monotone steps")
    if rep.limit_gap is not None:
        print(f"one-sided limit gap {rep.limit_gap:.3e} (last iterates {rep.raw_limit_gap:.3e})")
    print(f"verdict: {str(rep.verdict).lower()}")
    return EXIT_OK if rep.verdict else EXIT_NUMERIC


def cmd_oracle(cfg: RunConfig, out: Path) -> int:
    roots = oracle_solve(cfg.p, cfg.q, n_scan=cfg.grids["n_scan"], a_min=cfg.grids["d_min"])
    data = {"p": cfg.p, "q": cfg.q,
            "roots": [{"a": a, "residual": time_map(a, cfg.p, cfg.q) - 1.0} for a in roots]}
    text = json.dumps(data, indent=2)
    (out / "oracle.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def crosscheck_cell(p: float, q: float, *, n_scan: int = N_SCAN, d_min: float = D_MIN,
                    **solver_kwargs) -> dict:
    """Shooter cone solutions against time-map roots for one ``(p, q)``."""
    sols = survey(ProblemParams(p, q, 1), n_scan, d_min=d_min, **solver_kwargs).cone
    u0s = sorted(s.u0 for s in sols if not s.is_constant)
    roots = oracle_solve(p, q, n_scan=n_scan, a_min=d_min)
    match = len(u0s) == len(roots)
    err = max((abs(u - a) for u, a in zip(u0s, roots)), default=0.0) if match else float("inf")
    return {"p": p, "q": q, "shooter": u0s, "oracle": roots, "counts_match": match,
            "max_err": err}


def cmd_crosscheck(cfg: RunConfig, out: Path) -> int:
    ps = [cfg.p] if cfg.p is not None else list(CROSS_P)
    qs = [cfg.q] if cfg.q is not None else list(CROSS_Q)
    kw = _solver_kwargs(cfg)
    kw.pop("d_min")
    cells = [crosscheck_cell(p, q, n_scan=cfg.grids["n_scan"], d_min=cfg.grids["d_min"], **kw)
             for p in ps for q in qs if q > p]
    tol = cfg.tolerances["tol_cross"]
    print(f"{'p':>5} {'q':>5} {'roots':>6} {'max |u0 - a|':>14}  ok")
    ok = True
    for c in cells:
        good = c["counts_match"] and c["max_err"] <= tol
        ok = ok and good
        print(f"{c['p']:>5g} {c['q']:>5g} {len(c['oracle']):>6} {c['max_err']:>14.3e}  "
              f"{'yes' if good else 'NO'}")
    (out / "crosscheck.json").write_text(json.dumps({"tol": tol, "cells": cells},
                                                    indent=2) + "\n")
    return EXIT_OK if ok else EXIT_NUMERIC


HANDLERS = {"solve": cmd_solve, "bifurcate": cmd_bifurcate, "eigen": cmd_eigen,
            "converge": cmd_converge, "oracle": cmd_oracle, "crosscheck": cmd_crosscheck}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except UsageError as exc:
        print(f"plaplab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    handler = logging.FileHandler(out / "run-log.txt", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    log.info("start %s with %s", cfg.command, json.dumps(asdict(cfg), sort_keys=True))
    t0 = time.perf_counter()
    try:
        code = HANDLERS[cfg.command](cfg, out)
    except UsageError as exc:
        print(f"plaplab: usage error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (IntegrationError, RefineError, ArithmeticError, RuntimeError) as exc:
        log.exception("numerical failure")
        print(f"plaplab: numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    finally:
        log.info("done in %.3f s", time.perf_counter() - t0)
        root.removeHandler(handler)
        handler.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
