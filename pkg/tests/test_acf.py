import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatgauge.acf import (acf_aux_bound_check, acf_J, acf_monotonicity_check, cone_field, cone_J_exact,
                           halfspace_field, sector_field)
from flatgauge.errors import ConfigError, FieldError
from dataclasses import replace


@pytest.mark.parametrize("r", [0.1, 0.5, 2.0])
def test_halfspace_J(r):
    assert acf_J(halfspace_field(), np.zeros(2), r) == pytest.approx(np.pi ** 2 / 4, rel=5e-3)


def test_halfspace_J_3d():
    # each factor is the integral of t dt over the upper hemisphere, 2 pi r^2 / 2, over r^2
    assert acf_J(halfspace_field(3), np.zeros(3), 0.5) == pytest.approx(np.pi ** 2, rel=5e-3)


@pytest.mark.parametrize("gamma", [0.1, 0.2])
@pytest.mark.parametrize("r", [0.1, 0.4, 1.0])
def test_cone_J_closed_form(gamma, r):
    assert acf_J(cone_field(gamma), np.zeros(2), r) == pytest.approx(cone_J_exact(gamma, r), rel=1e-2)


def test_cone_J_vanishes_at_vertex():
    f = cone_field(0.2)
    vals = [acf_J(f, np.zeros(2), r) for r in (1e-1, 1e-3, 1e-5)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-2


def test_quadrature_convergence():
    f = cone_field(0.2)
    exact = cone_J_exact(0.2, 0.7)
    err = [abs(acf_J(f, np.zeros(2), 0.7, L) - exact) for L in range(4)]
    for a, b in zip(err, err[1:]):
        assert b <= max(a / 2, 1e-12 * exact)


@given(st.floats(0.01, 100.0))
def test_homogeneity(c):
    f = cone_field(0.15)
    base = acf_J(f, np.zeros(2), 0.6, quad_level=0)
    assert acf_J(f.scaled(c), np.zeros(2), 0.6, quad_level=0) == pytest.approx(c ** 4 * base, rel=1e-10)


def test_monotone_halfspace():
    p = acf_monotonicity_check(halfspace_field(), steps=9)
    assert np.all(np.abs(p.slack[1:-1]) <= 1e-2)
    assert p.violations == 0


def test_cone_equality_case():
    p = acf_monotonicity_check(cone_field(0.2), r_range=(0.1, 1.0), steps=15)
    rhs = 2 / p.r * p.alpha_sum
    assert np.all(np.abs(p.slack[1:-1]) <= 0.01 * rhs[1:-1])


def test_wobbled_support_inequality():
    f = sector_field(0.15, np.pi - 0.25, np.pi + 0.2, 2 * np.pi - 0.2, c=0.5)
    p = acf_monotonicity_check(f, r_range=(0.1, 0.9), steps=11)
    assert p.violations == 0
    assert np.all(np.diff(p.J) >= -5e-3 * p.J[1:])


def test_validity_radius():
    f = sector_field(0.15, np.pi - 0.25, np.pi + 0.2, 2 * np.pi - 0.2, c=0.5)
    with pytest.raises(ConfigError):
        acf_J(f, np.zeros(2), 2.0)


def test_aux_halfspace():
    for r in (0.1, 0.5, 1.0):
        assert acf_aux_bound_check(halfspace_field(), np.zeros(2), r).ratio <= 2


def test_aux_cone_scale_free():
    f = cone_field(0.2)
    ratios = [acf_aux_bound_check(f, np.zeros(2), r).ratio for r in (0.05, 0.2, 0.5)]
    assert max(ratios) == pytest.approx(min(ratios), rel=1e-6)


def test_aux_degenerate():
    f = cone_field(0.2).without(1)
    rep = acf_aux_bound_check(f, np.zeros(2), 0.2)
    assert rep.degenerate
    assert acf_J(f, np.zeros(2), 0.2) == 0.0


def test_bad_gradient():
    f = halfspace_field()
    bad = replace(f, grad=(lambda p: np.full_like(p, np.nan), f.grad[1]))
    with pytest.raises(FieldError):
        acf_J(bad, np.zeros(2), 0.5)
