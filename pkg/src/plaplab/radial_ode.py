"""Radial initial value problem in flux form.

The radial equation is integrated as the first-order system

    u' = |w|^{1/(p-1)} sign(w),
    w' = g(u) - (N-1) w / r,        g(u) = u^{p-1} - u^{q-1},

with ``w = |u'|^{p-2} u'``. The flux is smooth where ``u'`` vanishes, so one
formulation covers both the singular (p < 2) and degenerate (p > 2) cases.
The center is handled by a one-term series start at a small radius ``r0``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from scipy.interpolate import PchipInterpolator

from .problem import ProblemParams

TOL_ODE = 1e-10
R0 = 1e-6
N_OUT = 1001
ESCAPE_FACTOR = 10.0
MAX_STEPS = 2_000_000

# kernel status codes
OK, ESCAPED_HIGH, ESCAPED_ZERO, STEP_UNDERFLOW, TOO_MANY_STEPS = 0, 1, 2, 3, 4


class IntegrationError(RuntimeError):
    """The adaptive integrator could not reach r = 1."""


class EscapeError(IntegrationError):
    """The trajectory left the admissible region before r = 1.

    ``radius`` is where it escaped and ``flux`` the flux there; the sign of
    the flux tells the shooter on which side of the target it passed.
    """

    def __init__(self, msg: str, radius: float, flux: float):
        super().__init__(msg)
        self.radius = radius
        self.flux = flux


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = (
    9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656,
)
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
)


@numba.njit(cache=True, nogil=True)
def _vel(w, inv):
    if w > 0.0:
        return w**inv
    if w < 0.0:
        return -((-w) ** inv)
    return 0.0


@numba.njit(cache=True, nogil=True)
def _source(u, p, q, lam, linear):
    if linear:
        return -lam * u
    if u <= 0.0:
        return 0.0
    return u ** (p - 1.0) - u ** (q - 1.0)


@numba.njit(cache=True, nogil=True)
def _rhs(r, u, w, p, q, lam, nm1, inv, linear):
    return _vel(w, inv), _source(u, p, q, lam, linear) - nm1 * w / r


@numba.njit(cache=True, nogil=True)
def _shoot(d, p, q, lam, N, linear, r0, tol, u_cap, r_out, u_out, w_out):
    """Integrate from the center to r_out[-1], landing on every r_out node.

    Nodes at r <= r0 receive the center state (d, 0). Returns
    (status, r, u, w, n_steps) at the point where integration stopped.
    """
    inv = 1.0 / (p - 1.0)
    nm1 = N - 1.0
    cusp = (not linear) and p != 2.0
    g0 = _source(d, p, q, lam, linear)
    w = g0 * r0 / N
    u = d
    if w != 0.0:
        amp = (abs(g0) / N) ** inv * r0 ** (p * inv) * (p - 1.0) / p
        u = d + amp if w > 0.0 else d - amp
    r = r0
    n_nodes = r_out.shape[0]
    k = 0
    while k < n_nodes and r_out[k] <= r0:
        u_out[k] = d
        w_out[k] = 0.0
        k += 1
    h = r0
    k1u, k1w = _rhs(r, u, w, p, q, lam, nm1, inv, linear)
    steps = 0
    while k < n_nodes:
        target = r_out[k]
        if steps >= MAX_STEPS:
            return TOO_MANY_STEPS, r, u, w, steps
        land = False
        h_prop = h
        if cusp and k1w != 0.0:
            # u' = |w|^{1/(p-1)} is not smooth where w crosses zero and the
            # error estimate cannot see that; keep steps a fraction of the
            # distance to the crossing on either side of it
            h = min(h, max(0.3 * abs(w / k1w), tol))
        if r + h >= target:
            h = target - r
            land = True
        if h < 1e-15 * max(1.0, r):
            return STEP_UNDERFLOW, r, u, w, steps
        k2u, k2w = _rhs(r + _C2 * h, u + h * _A21 * k1u, w + h * _A21 * k1w,
                        p, q, lam, nm1, inv, linear)
        k3u, k3w = _rhs(r + _C3 * h, u + h * (_A31 * k1u + _A32 * k2u),
                        w + h * (_A31 * k1w + _A32 * k2w), p, q, lam, nm1, inv, linear)
        k4u, k4w = _rhs(r + _C4 * h, u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u),
                        w + h * (_A41 * k1w + _A42 * k2w + _A43 * k3w),
                        p, q, lam, nm1, inv, linear)
        k5u, k5w = _rhs(r + _C5 * h,
                        u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u),
                        w + h * (_A51 * k1w + _A52 * k2w + _A53 * k3w + _A54 * k4w),
                        p, q, lam, nm1, inv, linear)
        k6u, k6w = _rhs(r + h,
                        u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u
                                 + _A65 * k5u),
                        w + h * (_A61 * k1w + _A62 * k2w + _A63 * k3w + _A64 * k4w
                                 + _A65 * k5w),
                        p, q, lam, nm1, inv, linear)
        un = u + h * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u + _B6 * k6u)
        wn = w + h * (_B1 * k1w + _B3 * k3w + _B4 * k4w + _B5 * k5w + _B6 * k6w)
        rn = target if land else r + h
        k7u, k7w = _rhs(rn, un, wn, p, q, lam, nm1, inv, linear)
        eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
        ew = h * (_E1 * k1w + _E3 * k3w + _E4 * k4w + _E5 * k5w + _E6 * k6w + _E7 * k7w)
        su = tol * (1.0 + max(abs(u), abs(un)))
        sw = tol * (1.0 + max(abs(w), abs(wn)))
        err = max(abs(eu) / su, abs(ew) / sw)
        if not (err == err):  # nan from an overflowing stage
            h *= 0.1
            continue
        steps += 1
        if err <= 1.0:
            r, u, w = rn, un, wn
            k1u, k1w = k7u, k7w
            if not linear:
                if u <= 0.0:
                    return ESCAPED_ZERO, r, u, w, steps
                if abs(u) > u_cap:
                    return ESCAPED_HIGH, r, u, w, steps
            if land:
                u_out[k] = u
                w_out[k] = w
                k += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * fac
            if land:
                # a clipped landing step says nothing against the old proposal
                h = max(h, min(h_prop, 5.0 * h))
        else:
            h = h * max(0.1, 0.9 * err ** -0.2)
    return OK, r, u, w, steps


@numba.njit(cache=True, nogil=True)
def _terminal_flux_batch(ds, p, q, N, r0, tol, u_cap, out_w, out_status):
    r_end = np.ones(1)
    uo = np.empty(1)
    wo = np.empty(1)
    for i in range(ds.shape[0]):
        st, r, u, w, n = _shoot(ds[i], p, q, 0.0, N, False, r0, tol, u_cap,
                                r_end, uo, wo)
        out_status[i] = st
        out_w[i] = w


def velocity_from_flux(w, p: float):
    """Invert ``w = |u'|^{p-2} u'``: returns ``sign(w) |w|^{1/(p-1)}``."""
    w = np.asarray(w, dtype=float)
    out = np.sign(w) * np.abs(w) ** (1.0 / (p - 1.0))
    return out if out.ndim else float(out)


def series_start(params: ProblemParams, d: float, r0: float = R0) -> tuple[float, float]:
    """Leading-order state ``(u, w)`` at ``r0`` for the trajectory with ``u(0)=d``."""
    if not d > 0:
        raise ValueError(f"shooting value must be positive, got d={d}")
    p, q, N = params.p, params.q, params.N
    g = d ** (p - 1.0) - d ** (q - 1.0)
    w0 = g * r0 / N
    if w0 == 0.0:
        return float(d), 0.0
    amp = (abs(g) / N) ** (1.0 / (p - 1.0)) * r0 ** (p / (p - 1.0)) * (p - 1.0) / p
    return float(d + math.copysign(amp, w0)), float(w0)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Radial function on ``[0, 1]`` with values ``u`` and fluxes ``w``."""

    radii: np.ndarray
    values: np.ndarray
    fluxes: np.ndarray
    params: ProblemParams

    def __post_init__(self) -> None:
        n = len(self.radii)
        if n < 2 or len(self.values) != n or len(self.fluxes) != n:
            raise ValueError("radii, values and fluxes need equal length >= 2")
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        for arr in (self.radii, self.values, self.fluxes):
            arr.setflags(write=False)

    @property
    def derivative(self) -> np.ndarray:
        return velocity_from_flux(self.fluxes, self.params.p)

    @property
    def u0(self) -> float:
        return float(self.values[0])

    def hamiltonian(self) -> np.ndarray:
        """First integral ``((p-1)/p)|u'|^p - u^p/p + u^q/q`` (conserved for N=1)."""
        p, q = self.params.p, self.params.q
        u = self.values
        return (p - 1.0) / p * np.abs(self.derivative) ** p - u**p / p + u**q / q

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "u", "w"])
            for r, u, w in zip(self.radii, self.values, self.fluxes):
                writer.writerow([repr(float(r)), repr(float(u)), repr(float(w))])

    @classmethod
    def from_csv(cls, path, params: ProblemParams) -> "RadialProfile":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy(), params)


def uniform_grid(n_out: int = N_OUT) -> np.ndarray:
    if n_out < 2:
        raise ValueError("need n_out >= 2")
    return np.linspace(0.0, 1.0, n_out)


def _raise_for_status(status, r, u, w, d):
    if status == OK:
        return
    if status in (ESCAPED_HIGH, ESCAPED_ZERO):
        where = "above the escape bound" if status == ESCAPED_HIGH else "through zero"
        raise EscapeError(f"trajectory from d={d!r} escaped {where} at r={r:.6g}", r, w)
    if status == STEP_UNDERFLOW:
        raise IntegrationError(f"step size underflow at r={r:.6g} for d={d!r}")
    raise IntegrationError(f"step budget exhausted at r={r:.6g} for d={d!r}")


def integrate(
    params: ProblemParams,
    d: float,
    n_out: int = N_OUT,
    *,
    tol: float = TOL_ODE,
    r0: float = R0,
) -> RadialProfile:
    """Integrate the trajectory with ``u(0) = d`` out to ``r = 1``.

    Steps are clipped to land on the ``n_out`` uniform output nodes, so the
    profile carries the integrator's own state at every node instead of an
    interpolant.

    Raises:
        EscapeError: ``u`` left ``(0, 10 s0)`` before ``r = 1``.
        IntegrationError: step size underflow or step budget exhausted.
    """
    if not d > 0:
        raise ValueError(f"shooting value must be positive, got d={d}")
    radii = uniform_grid(n_out)
    u_out = np.empty(n_out)
    w_out = np.empty(n_out)
    cap = ESCAPE_FACTOR * params.derived.s0
    status, r, u, w, _ = _shoot(float(d), params.p, params.q, 0.0, params.N, False,
                                r0, tol, cap, radii, u_out, w_out)
    _raise_for_status(status, r, u, w, d)
    return RadialProfile(radii, u_out, w_out, params)


def terminal_flux(params: ProblemParams, ds, *, tol: float = TOL_ODE, r0: float = R0):
    """Terminal flux ``w(1)`` for many shooting values with free step selection.

    Cheaper than :func:`integrate` (no output nodes); meant for sign scans.
    Returns ``(w1, status)`` arrays; ``w1`` is the flux where integration
    stopped when ``status`` is nonzero.
    """
    ds = np.ascontiguousarray(ds, dtype=float)
    out_w = np.empty_like(ds)
    out_status = np.empty(ds.shape, dtype=np.int64)
    cap = ESCAPE_FACTOR * params.derived.s0
    _terminal_flux_batch(ds, params.p, params.q, params.N, r0, tol, cap, out_w, out_status)
    return out_w, out_status


def linear_shoot(lam: float, N: int, radii: np.ndarray, *, tol: float = TOL_ODE,
                 r0: float = R0):
    """Solve ``-(r^{N-1} φ')' = λ r^{N-1} φ`` with ``φ(0)=1``; returns ``(φ, φ')``."""
    radii = np.ascontiguousarray(radii, dtype=float)
    u_out = np.empty_like(radii)
    w_out = np.empty_like(radii)
    status, r, u, w, _ = _shoot(1.0, 2.0, 3.0, float(lam), int(N), True, r0, tol,
                                np.inf, radii, u_out, w_out)
    _raise_for_status(status, r, u, w, 1.0)
    return u_out, w_out


def resample(profile: RadialProfile, n_out: int) -> RadialProfile:
    """Monotone cubic (PCHIP) resampling of values and fluxes onto a uniform grid."""
    radii = uniform_grid(n_out)
    if len(profile.radii) == n_out and np.array_equal(profile.radii, radii):
        return profile
    u = PchipInterpolator(profile.radii, profile.values)(radii)
    w = PchipInterpolator(profile.radii, profile.fluxes)(radii)
    return RadialProfile(radii, u, w, profile.params)
