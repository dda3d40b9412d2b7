import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plaplab.convergence import (
    GridError,
    GroundStateError,
    convergence_step,
    difference_norms,
    nehari_ratio,
    run_convergence,
    target_ground_state,
)
from plaplab.problem import ProblemParams
from plaplab.radial_ode import RadialProfile, uniform_grid
from plaplab.variational import radial_integral

R = uniform_grid(201)


def prof(values, fluxes, p=2.0, N=1, r=R):
    return RadialProfile(r, np.asarray(values, float), np.asarray(fluxes, float),
                         ProblemParams(p, 30, N))


@pytest.fixture(scope="module")
def both_sides():
    return run_convergence(2.0, 30.0, 1, 7, "both")


def test_identical_profiles():
    a = prof(np.cos(R), -np.sin(R))
    assert difference_norms(a, a, 2.0) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("N,p", [(1, 2.0), (1, 1.5), (3, 2.5)])
def test_constant_offset(N, p):
    c = 0.3
    a = prof(1.0 + c + 0 * R, 0 * R, p, N)
    b = prof(np.ones_like(R), 0 * R, p, N)
    w1p, hol, sup = difference_norms(a, b, p)
    vol = ProblemParams(p, 30, N).ball_volume
    assert hol == 0.0
    assert sup == pytest.approx(c, rel=1e-14)
    assert w1p == pytest.approx(c * vol ** (1 / p), rel=1e-12)


def test_linear_difference():
    a = prof(R.copy(), np.ones_like(R))
    b = prof(np.zeros_like(R), np.zeros_like(R))
    w1p, hol, sup = difference_norms(a, b, 2.0, 0.5)
    assert sup == 1.0
    assert hol == pytest.approx(1.0, rel=1e-14)
    assert w1p == pytest.approx(math.sqrt(8 / 3), rel=1e-12)


def test_grid_errors():
    a = prof(R.copy(), np.ones_like(R))
    r2 = uniform_grid(101)
    b = prof(r2.copy(), np.ones_like(r2), r=r2)
    with pytest.raises(GridError):
        difference_norms(a, b, 2.0)
    c = prof(R.copy(), np.ones_like(R), N=2)
    with pytest.raises(GridError):
        difference_norms(a, c, 2.0)


smooth = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.5, 4.0))


def _smooth_profile(coef, p):
    a, b, k = coef
    u = 1.0 + a * np.cos(k * R) + b * R**2
    du = -a * k * np.sin(k * R) + 2 * b * R
    w = np.sign(du) * np.abs(du) ** (p - 1.0)
    return prof(u, w, p)


@given(smooth, smooth, smooth, st.floats(1.2, 3.0), st.floats(0.1, 0.9))
def test_symmetry_and_triangle(c1, c2, c3, p, beta):
    x, y, z = (_smooth_profile(c, p) for c in (c1, c2, c3))
    xy = difference_norms(x, y, p, beta)
    assert xy == pytest.approx(difference_norms(y, x, p, beta), rel=1e-12, abs=1e-15)
    yz = difference_norms(y, z, p, beta)
    xz = difference_norms(x, z, p, beta)
    for i in range(3):
        assert xz[i] <= xy[i] + yz[i] + 1e-12


def test_small_beta_tends_to_oscillation():
    a = prof(np.cos(np.pi * R), -np.pi * np.sin(np.pi * R))
    b = prof(np.zeros_like(R), np.zeros_like(R))
    _, hol, sup = difference_norms(a, b, 2.0, 1e-9)
    assert hol == pytest.approx(2 * sup, rel=1e-6)
    a2 = prof(R**2, 2 * R)
    _, hol2, sup2 = difference_norms(a2, b, 2.0, 1e-9)
    assert hol2 <= 2 * sup2 and hol2 == pytest.approx(1.0, rel=1e-6)


def test_lipschitz_bound_at_beta_one():
    a = prof(np.sin(3 * R), 3 * np.cos(3 * R))
    b = prof(np.zeros_like(R), np.zeros_like(R))
    _, hol, _ = difference_norms(a, b, 2.0, 1.0)
    assert hol <= 3.0 + 1e-12


def test_beta_validated():
    a = prof(R.copy(), np.ones_like(R))
    with pytest.raises(ValueError):
        difference_norms(a, a, 2.0, 0.0)


def test_zero_offset_gives_zero_differences():
    target = target_ground_state(2.0, 30.0)
    step = convergence_step(target, 2.0)
    assert step.valid
    assert (step.w1p_diff, step.holder_diff, step.sup_diff, step.energy_gap) == (0, 0, 0, 0)
    assert abs(step.h_of_gs - 1.0) < 1e-6


def test_nehari_ratio_at_own_exponent_is_h():
    target = target_ground_state(2.0, 30.0)
    assert nehari_ratio(target.profile, 2.0) == pytest.approx(target.nehari_h, rel=1e-14)


def test_report_ordering_and_decrease(both_sides):
    rep = both_sides
    gaps = [abs(s.p_n - 2.0) for s in rep.steps]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))
    assert all(s.valid for s in rep.steps)
    for side in ("below", "above"):
        seq = [s for s in rep.steps if s.side == side]
        assert [s.k for s in seq] == list(range(2, 8))
        for name in ("w1p_diff", "holder_diff", "sup_diff", "energy_gap", "h_gap"):
            vals = [getattr(s, name) for s in seq]
            assert all(b < a for a, b in zip(vals, vals[1:])), name
        assert seq[-1].w1p_diff < 1e-2


def test_one_sided_limits_agree(both_sides):
    assert both_sides.limit_gap < 1e-4
    # the raw last iterates are a first-order distance apart
    assert both_sides.raw_limit_gap > both_sides.limit_gap


def _envelope_slopes(target):
    """dI/dp and dh/dp at p = 2 from the limit profile alone (envelope theorem)."""
    p, q = target.params.p, target.params.q

    def lg(x):
        x = np.abs(x)
        return np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), 0.0)

    dI = radial_integral(target.profile, lambda u, du: np.abs(du) ** p * (lg(du) / p - 1 / p**2)
                         + u**p * (lg(u) / p - 1 / p**2))
    dh = radial_integral(target.profile, lambda u, du: np.abs(du) ** p * lg(du)
                         + u**p * lg(u)) / radial_integral(target.profile, lambda u, du: u**q)
    return dI, dh


def test_gaps_are_first_order_in_offset(both_sides):
    # An independent check that the energy and h gaps are genuine, not
    # numerical: their slopes in |p_n - 2| match the envelope-theorem values.
    dI, dh = _envelope_slopes(target_ground_state(2.0, 30.0))
    for s in both_sides.steps:
        if s.k == 7:
            off = abs(s.p_n - 2.0)
            assert s.energy_gap / off == pytest.approx(abs(dI), rel=0.02)
            assert s.h_gap / off == pytest.approx(abs(dh), rel=0.02)


def test_verdict_mechanics(both_sides):
    rep = run_convergence(2.0, 30.0, 1, 5, "below",
                          tolerances={"w1p_diff": 0.05, "holder_diff": 0.05, "sup_diff": 0.05,
                                      "energy_gap": 0.05, "h_gap": 0.05})
    assert rep.verdict
    strict = run_convergence(2.0, 30.0, 1, 5, "below", tolerances={"sup_diff": 1e-9})
    assert not strict.verdict
    failed = {c.quantity for c in strict.checks if not c.passed}
    assert {"sup_diff", "energy_gap", "h_gap"} <= failed


def test_steps_below_fold_become_warnings():
    rep = run_convergence(1.7, 30.0, 1, 4, "below")
    bad = [s for s in rep.steps if not s.valid]
    assert [s.k for s in bad] == [2]
    assert "constant" in bad[0].warning and rep.warnings
    assert rep.checks and all(c.side == "below" for c in rep.checks)
    assert rep.note is not None


def test_target_without_ground_state():
    with pytest.raises(GroundStateError):
        run_convergence(1.2, 30.0, 1, 3, "below")


def test_argument_validation():
    with pytest.raises(ValueError):
        run_convergence(2.0, 30.0, 1, 2, "below")
    with pytest.raises(ValueError):
        run_convergence(2.0, 30.0, 1, 4, "sideways")


def test_json_and_table(both_sides):
    data = json.loads(both_sides.to_json())
    assert data["p_target"] == 2.0 and len(data["steps"]) == 12
    assert {"p_n", "w1p_diff", "holder_diff", "sup_diff", "energy_n", "h_of_gs"} <= set(
        data["steps"][0])
    lines = both_sides.table().splitlines()
    assert len(lines) == 14 and len({len(x) for x in lines[2:]}) == 1
