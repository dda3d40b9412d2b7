import json
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import jn_zeros

from plaplab.spectral import (
    EigenNotFoundError,
    existence_threshold,
    n1_eigenvalue,
    radial_neumann_eigenvalue,
    terminal_slope,
)


def test_n1_closed_form():
    t0 = time.perf_counter()
    for k in range(2, 7):
        res = radial_neumann_eigenvalue(1, k, lam_max=400.0, n_lam=400)
        assert res.lam == pytest.approx((k - 1) ** 2 * math.pi**2, rel=1e-8)
        assert res.residual <= 1e-10
    assert time.perf_counter() - t0 < 5.0


def test_n1_examples():
    assert radial_neumann_eigenvalue(1, 2).lam == pytest.approx(9.8696044, abs=1e-7)
    assert radial_neumann_eigenvalue(1, 3).lam == pytest.approx(39.478418, abs=1e-6)
    assert n1_eigenvalue(3) == 4 * math.pi**2


def test_n3_against_tangent_relation():
    # φ = sin(x r)/(x r) has φ'(1) = 0 iff tan x = x
    x = brentq(lambda x: x * math.cos(x) - math.sin(x), math.pi, 1.5 * math.pi, xtol=1e-14)
    lam = radial_neumann_eigenvalue(3, 2).lam
    assert lam == pytest.approx(x**2, abs=1e-8)
    assert lam == pytest.approx(20.1907, abs=1e-4)


def test_n2_against_bessel_zeros():
    # φ = J0(√λ r); φ'(1) = 0 at the zeros of J1
    for k, j in enumerate(jn_zeros(1, 3), start=2):
        assert radial_neumann_eigenvalue(2, k).lam == pytest.approx(j**2, rel=1e-9)


def test_thresholds():
    assert existence_threshold(1) == pytest.approx(2 + math.pi**2, rel=1e-10)
    lam = [radial_neumann_eigenvalue(1, k).lam for k in (2, 3, 4)]
    assert 2 + lam[0] < 30 < 2 + lam[1]
    assert 2 + lam[1] < 60 < 2 + lam[2]


def test_ordering_and_counting():
    lams = [radial_neumann_eigenvalue(1, k, lam_max=400.0, n_lam=800).lam for k in range(2, 8)]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    big = 400.0
    assert sum(lam < big for lam in lams) == math.floor(math.sqrt(big) / math.pi)


def test_slope_sign_changes_at_eigenvalue():
    lam = radial_neumann_eigenvalue(1, 2).lam
    assert np.sign(terminal_slope(lam - 0.1, 1)) != np.sign(terminal_slope(lam + 0.1, 1))


def test_not_found_carries_window():
    with pytest.raises(EigenNotFoundError) as info:
        radial_neumann_eigenvalue(1, 10, lam_max=50.0, n_lam=100)
    assert info.value.scanned == (0.5, 50.0)


def test_bad_index():
    with pytest.raises(ValueError):
        radial_neumann_eigenvalue(1, 1)
    with pytest.raises(ValueError):
        radial_neumann_eigenvalue(0, 2)


def test_json_uses_lambda_key():
    data = json.loads(radial_neumann_eigenvalue(1, 2).to_json())
    assert set(data) == {"index", "lambda", "residual"}
