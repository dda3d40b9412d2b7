import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from plaplab.problem import ProblemParams
from plaplab.radial_ode import (
    TOL_ODE,
    EscapeError,
    RadialProfile,
    integrate,
    linear_shoot,
    resample,
    series_start,
    terminal_flux,
    uniform_grid,
    velocity_from_flux,
)
from plaplab.timemap import _level_gap, conjugate_endpoint, time_map

MATRIX_P = [1.5, 1.8, 2.0, 2.5, 3.0]
MATRIX_Q = [10.0, 30.0, 60.0]


def test_velocity_from_flux_examples():
    assert velocity_from_flux(0.0, 1.7) == 0.0
    assert velocity_from_flux(1.0, 2.0) == 1.0
    assert velocity_from_flux(-8.0, 2.5) == pytest.approx(-4.0, rel=1e-15)


@given(st.floats(-1e3, 1e3).filter(lambda w: w == 0 or abs(w) > 1e-30), st.floats(1.05, 5.0))
def test_velocity_is_odd_inverse_of_flux(w, p):
    v = velocity_from_flux(w, p)
    assert velocity_from_flux(-w, p) == -v
    if w == 0:
        assert v == 0
    else:
        assert abs(v) ** (p - 2.0) * v == pytest.approx(w, rel=1e-12)


def test_series_start_examples():
    assert series_start(ProblemParams(2, 30), 1.0, 1e-3) == (1.0, 0.0)
    _, w0 = series_start(ProblemParams(2, 30, 1), 0.5, 1e-4)
    assert w0 == pytest.approx((0.5 - 0.5**29) * 1e-4, rel=1e-14)
    assert w0 == pytest.approx(5.0000e-5, rel=1e-4)
    _, w0 = series_start(ProblemParams(2, 3, 3), 0.5, 1e-4)
    assert w0 == pytest.approx(0.25e-4 / 3, rel=1e-14)


def test_series_start_matches_integral_identity():
    # r^{N-1} w(r) = ∫ s^{N-1} g(u(s)) ds, so w ≈ g(d) r / N to leading order
    pp = ProblemParams(1.5, 10, 3)
    d, r0 = 0.6, 1e-2
    u0, w0 = series_start(pp, d, r0)
    g = d**0.5 - d**9
    assert w0 == pytest.approx(g * r0 / 3, rel=1e-14)
    # u - d = ∫ (g s / N)^{1/(p-1)} ds
    assert u0 - d == pytest.approx((g / 3) ** 2 * r0**3 / 3, rel=1e-12)


def test_series_start_rejects_nonpositive():
    with pytest.raises(ValueError):
        series_start(ProblemParams(2, 30), 0.0)


@pytest.mark.parametrize("p,q,N", [(2, 30, 1), (1.5, 60, 1), (3, 10, 3), (1.2, 4, 2)])
def test_equilibrium_is_exact(p, q, N):
    prof = integrate(ProblemParams(p, q, N), 1.0)
    assert np.all(prof.values == 1.0)
    assert np.all(prof.fluxes == 0.0)


def test_profile_shape():
    prof = integrate(ProblemParams(2, 30), 0.9, 101)
    assert np.array_equal(prof.radii, uniform_grid(101))
    assert prof.values[0] == 0.9 and prof.fluxes[0] == 0.0
    assert prof.u0 == 0.9


def test_hamiltonian_reference_case():
    prof = integrate(ProblemParams(2, 30, 1), 0.9)
    h0 = -0.9**2 / 2 + 0.9**30 / 30
    H = prof.hamiltonian()
    assert H[0] == pytest.approx(h0, rel=1e-15)
    assert np.max(np.abs(H - h0)) <= 10 * TOL_ODE * (1 + abs(h0))


def _arrival_radius(a, level, p, q):
    """Radius at which the rising orbit from ``a`` reaches ``level``."""
    b = conjugate_endpoint(a, p, q)
    L, k, c = b - a, p / (p - 1.0), p / (p - 1.0)
    t_end = ((level - a) / L) ** (1.0 / k)
    f = lambda t: (c * _level_gap(a, L * t**k, p, q)) ** (-1.0 / p) * L * k * t ** (k - 1.0)
    return quad(f, 0.0, t_end, epsabs=0.0, epsrel=1e-10, limit=200)[0]


def test_terminal_flux_against_phase_curve():
    # T(0.9) < 1 < 2 T(0.9): at r = 1 the orbit is on its way back down,
    # at the level the rising arc reaches at r = 2T - 1.
    p, q, a = 2.0, 30.0, 0.9
    T = time_map(a, p, q)
    assert T < 1.0 < 2 * T
    b = conjugate_endpoint(a, p, q)
    level = brentq(lambda u: _arrival_radius(a, u, p, q) - (2 * T - 1), a + 1e-12, b - 1e-12,
                   xtol=1e-15)
    du = (p / (p - 1) * _level_gap(a, level - a, p, q)) ** (1 / p)
    prof = integrate(ProblemParams(p, q, 1), a)
    assert prof.values[-1] == pytest.approx(level, abs=1e-8)
    assert prof.fluxes[-1] == pytest.approx(-(du ** (p - 1)), abs=1e-6)


@given(st.sampled_from(MATRIX_P), st.sampled_from(MATRIX_Q), st.floats(0.05, 0.999))
def test_conservation_n1(p, q, d):
    try:
        prof = integrate(ProblemParams(p, q, 1), d)
    except EscapeError:
        assume(False)
    H = prof.hamiltonian()
    assert np.max(np.abs(H - H[0])) <= 10 * TOL_ODE * (1 + abs(H[0]))


@given(st.floats(1.1, 4.0), st.floats(0.5, 40.0), st.integers(1, 4), st.floats(0.01, 0.99))
def test_sign_structure(p, dq, N, frac):
    pp = ProblemParams(p, p + dq, N)
    s0 = pp.derived.s0
    for d in (frac, 1.0 + frac * (s0 - 1.0)):
        assume(abs(d - 1.0) > 1e-6)
        try:
            prof = integrate(pp, d, 1001)
        except EscapeError:
            continue
        w1 = prof.fluxes[1]
        assert (w1 > 0) if d < 1 else (w1 < 0)


@pytest.mark.parametrize("p,q,d", [(2, 30, 0.9), (1.5, 60, 0.8), (3, 10, 0.7), (2.5, 5, 0.97),
                                   (1.8, 30, 0.75)])
def test_self_convergence(p, q, d):
    pp = ProblemParams(p, q, 1)
    u_coarse = integrate(pp, d, tol=TOL_ODE).values[-1]
    u_fine = integrate(pp, d, tol=TOL_ODE / 2).values[-1]
    assert abs(u_coarse - u_fine) < TOL_ODE


def test_escape_reports_radius():
    with pytest.raises(EscapeError) as info:
        integrate(ProblemParams(2, 30), 1.5)
    assert 0.0 < info.value.radius < 1.0


def test_integrate_rejects_nonpositive():
    with pytest.raises(ValueError):
        integrate(ProblemParams(2, 30), -0.1)


def test_terminal_flux_matches_integrate():
    pp = ProblemParams(1.5, 60)
    ds = np.array([0.3, 0.8, 0.95, 1.0])
    w, status = terminal_flux(pp, ds)
    assert np.all(status == 0)
    ref = [integrate(pp, d).fluxes[-1] for d in ds]
    np.testing.assert_allclose(w, ref, atol=1e-8)
    assert w[-1] == 0.0


def test_linear_shoot_cosine():
    r = uniform_grid(201)
    phi, dphi = linear_shoot(math.pi**2, 1, r)
    np.testing.assert_allclose(phi, np.cos(math.pi * r), atol=1e-8)
    np.testing.assert_allclose(dphi, -math.pi * np.sin(math.pi * r), atol=1e-8)


def test_csv_round_trip(tmp_path):
    pp = ProblemParams(1.5, 60)
    prof = integrate(pp, 0.8144280489538268, 51)
    path = tmp_path / "prof.csv"
    prof.to_csv(path)
    assert path.read_text().splitlines()[0] == "r,u,w"
    back = RadialProfile.from_csv(path, pp)
    for name in ("radii", "values", "fluxes"):
        assert np.array_equal(getattr(back, name), getattr(prof, name))


def test_resample_preserves_monotone_profile():
    prof = integrate(ProblemParams(2, 30), 0.737769436898, 1001)
    coarse = resample(prof, 101)
    assert np.all(np.diff(coarse.values) >= 0)
    np.testing.assert_allclose(coarse.values, prof.values[::10], atol=1e-14)
    fine = resample(coarse, 1001)
    assert np.max(np.abs(fine.values - prof.values)) < 1e-4


def test_profile_validation():
    r = np.array([0.0, 0.5, 0.4])
    with pytest.raises(ValueError):
        RadialProfile(r, np.ones(3), np.zeros(3), ProblemParams(2, 3))
    with pytest.raises(ValueError):
        RadialProfile(np.array([0.0]), np.ones(1), np.zeros(1), ProblemParams(2, 3))
