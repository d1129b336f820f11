import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eufl.core import InputError
from eufl.params import (INFLATED, PAPER, ParamSet, compute_phi_r, gamma0_equation, solve_gamma0, theta_of,
                         validate_parameters)


def test_phi_r_closed_form_matches_scan():
    # oracle: dense scan in x for the smallest admissible cos(phi)
    for r in (1e-4, 1e-3, 1e-2, 0.3):
        x = np.arange(1e-4, 2 + 1e-12, 1e-4)
        need = ((1 + (1 - r) * x) ** 2 - 1 - x * x) / (2 * x)
        assert int(np.argmin(need)) == len(x) - 1          # binds at x = 2
        assert math.cos(compute_phi_r(r)) == pytest.approx(need.min(), abs=1e-12)


def test_phi_r_paper_value():
    # the exact minimum angle for r = 1e-8 is 2.449e-4
    assert compute_phi_r(1e-8) == pytest.approx(2.4494897e-4, rel=1e-6)
    assert compute_phi_r(1e-300) < 1e-140


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-12, 1e-2), st.floats(1e-12, 1e-2))
def test_phi_r_monotone(a, b):
    lo, hi = sorted((a, b))
    assert compute_phi_r(lo) <= compute_phi_r(hi)


@pytest.mark.parametrize("r", [0.0, 1.0, -0.5, 2.0])
def test_phi_r_domain(r):
    with pytest.raises(InputError):
        compute_phi_r(r)


def test_gamma0():
    g0 = solve_gamma0(0.0)
    assert abs(gamma0_equation(g0, 0.0)) < 1e-11
    assert g0 == pytest.approx(1.677356493, abs=1e-9)
    assert PAPER.gamma0 == pytest.approx(g0, abs=1e-12)


def test_theta_formula_and_range():
    assert PAPER.theta == pytest.approx((1.302 + 1 - 1.6774) / (2 * 1.302 + 2 - 1.6774))
    # theta decreases in gamma; over (1.6, 2) it spans (0.1160, 0.2337)
    gs = np.linspace(1.6001, 1.9999, 200)
    th = theta_of(gs)
    assert np.all(np.diff(th) < 0)
    assert theta_of(1.6) == pytest.approx(0.702 / 3.004, abs=1e-12)
    assert theta_of(2.0) == pytest.approx(0.302 / 2.604, abs=1e-12)
    # the printed band [0.2336, 0.3613] is reached for gamma in (1, 1.6)
    assert theta_of(1.0) == pytest.approx(1.302 / 3.604, abs=1e-12)


def test_paramset_validation():
    with pytest.raises(InputError):
        ParamSet(K1=1.0)
    with pytest.raises(InputError):
        ParamSet(eps7=1e-30)
    with pytest.raises(InputError):
        ParamSet(eps8=1e-45)
    assert INFLATED.eps8 == pytest.approx(INFLATED.eps7 / 1000, rel=1e-12)


def test_condition_examples():
    rep = validate_parameters(PAPER, [1.601, 1.8, 1.999])
    by = {r.index: r for r in rep.results}
    assert len(by) == 13
    assert by[2].passed
    # (1e-12 + 3e-23)/0.2336 against 1/100
    assert (1e-12 + 3e-23) / 0.2336 == pytest.approx(4.28e-12, rel=1e-3)
    assert by[13].passed and abs(by[13].worst_margin) < 1e-40     # equality, zero margin


def test_grid_outside_range():
    with pytest.raises(InputError):
        validate_parameters(PAPER, [1.5])


def test_literal_condition_one_fails():
    rep = validate_parameters(PAPER, [1.601, 1.7], literal=True)
    assert not {r.index: r for r in rep.results}[1].passed
