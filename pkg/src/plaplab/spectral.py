"""Radial Neumann eigenvalues of the Laplacian in the unit ball, by linear shooting."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .radial_ode import linear_shoot

LAM_MAX = 200.0
N_LAM = 2000
_END = np.array([1.0])


class EigenNotFoundError(LookupError):
    def __init__(self, msg: str, scanned: tuple[float, float]):
        super().__init__(msg)
        self.scanned = scanned


@dataclass(frozen=True)
class EigenResult:
    index: int
    lam: float
    residual: float

    def to_json(self) -> str:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return json.dumps(d)


def terminal_slope(lam: float, N: int) -> float:
    """``φ'(1)`` for the radial eigenfunction candidate with ``φ(0) = 1``."""
    _, w = linear_shoot(lam, N, _END)
    return float(w[-1])


def radial_neumann_eigenvalue(N: int, k: int, *, lam_max: float = LAM_MAX,
                              n_lam: int = N_LAM) -> EigenResult:
    """The ``k``-th radial Neumann eigenvalue (``k = 1`` would be the zero eigenvalue).

    Scans ``φ'(1; λ)`` on ``(0, lam_max]`` and refines the ``(k-1)``-th sign
    change with Brent's method.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"need integer N >= 1, got {N}")
    if int(k) != k or k < 2:
        raise ValueError(f"need integer k >= 2, got {k}")
    lams = np.linspace(lam_max / n_lam, lam_max, n_lam)
    vals = np.array([terminal_slope(lam, N) for lam in lams])
    idx = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if len(idx) < k - 1:
        raise EigenNotFoundError(
            f"only {len(idx)} positive eigenvalues below {lam_max} for N={N}",
            (float(lams[0]), float(lams[-1])))
    i = idx[k - 2]
    lam = brentq(terminal_slope, lams[i], lams[i + 1], args=(N,), xtol=1e-14, rtol=1e-15)
    return EigenResult(int(k), float(lam), abs(terminal_slope(lam, N)))


def existence_threshold(N: int, **kwargs) -> float:
    """``2 + λ₂`` in dimension ``N``: the ground state at p = 2 is nonconstant above it."""
    return 2.0 + radial_neumann_eigenvalue(N, 2, **kwargs).lam


def n1_eigenvalue(k: int) -> float:
    """Closed form ``(k-1)² π²`` in dimension one."""
    return (k - 1) ** 2 * math.pi**2
