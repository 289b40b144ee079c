import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flatgauge.carleson import (LN2, CarlesonReport, VerdictConfig, carleson_sum, corkscrew_locate, default_ball,
                                eps_a_consistency, mass_balance_check, octave_eps_sum, strong_geometric_verdict,
                                verdict)
from flatgauge.coefficients import CoefficientTable
from flatgauge.domains import CATALOG_SEVEN, IN1, IN2, make_builtin, sample_boundary
from flatgauge.errors import ConfigError

W = 1 / 16


@pytest.fixture(scope="module")
def catalog():
    out = {}
    for kind in CATALOG_SEVEN:
        pair = make_builtin({"kind": kind, "w": W} if kind == "strip" else {"kind": kind})
        out[kind] = strong_geometric_verdict(pair)
    return out


def _table(values, R=1.0, n_centers=3, m=6):
    pts = np.column_stack([np.linspace(-0.5, 0.5, n_centers), np.zeros(n_centers)])
    scales = R * 2.0 ** -np.arange(m + 1)
    vals = {"eps_n": np.asarray(values, float), "a": np.asarray(values, float)}
    flags = np.full((n_centers, m + 1), "", dtype=object)
    return CoefficientTable(np.arange(n_centers), pts, R, scales, vals, flags, np.full(n_centers, 0.1))


def test_halfspace_sums_vanish(catalog):
    for rep in catalog["halfspace"].reports.values():
        assert rep.total <= 1e-3


def test_uniform_values_arithmetic():
    t = _table(np.full((3, 7), 0.5))
    rep = carleson_sum(t, ((0.0, 0.0), 1.0), "eps_n")
    assert np.allclose(rep.increments, 3 * 0.1 * 0.25 * LN2)
    rep_a = carleson_sum(t, ((0.0, 0.0), 1.0), "a")
    assert np.allclose(rep_a.increments, 3 * 0.1 * 0.5 * LN2)


@given(st.lists(st.floats(0, 3), min_size=21, max_size=21))
def test_monotone_accumulation(vals):
    rep = carleson_sum(_table(np.reshape(vals, (3, 7))), ((0.0, 0.0), 1.0), "eps_n")
    assert np.all(rep.increments >= 0)
    assert np.all(np.diff(rep.S) >= 0)


def test_coverage_gap():
    v = np.full((3, 7), 0.1)
    v[1, 3] = np.nan
    with pytest.raises(ConfigError):
        carleson_sum(_table(v), ((0.0, 0.0), 1.0))
    with pytest.raises(ConfigError):
        carleson_sum(_table(np.zeros((3, 7))), ((0.0, 0.0), 2.0))
    with pytest.raises(ConfigError):
        carleson_sum(_table(np.zeros((3, 7))), ((5.0, 5.0), 1.0))


def test_verdict_depth_guard():
    rep = CarlesonReport(np.zeros(2), 1.0, "eps_n", 4, np.zeros(5), np.zeros(5))
    with pytest.raises(ConfigError):
        verdict(rep)


@pytest.mark.parametrize("kind", ["disk", "graph", "square", "halfspace"])
def test_ur_catalog_bounded(catalog, kind):
    assert catalog[kind].verdicts == {"eps_n": "bounded", "a": "bounded"}


@pytest.mark.parametrize("kind", ["cone", "strip", "cantor"])
def test_non_corkscrew_catalog_diverging(catalog, kind):
    assert catalog[kind].diverging


def test_strip_increment_closed_form(catalog):
    res = catalog["strip"]
    pair = make_builtin({"kind": "strip", "w": W})
    s = sample_boundary(pair, VerdictConfig().h)
    x0, R = res.reports["eps_n"].center, res.reports["eps_n"].radius
    frac = s.mass(x0, R) / R
    sub_w = [j for j in range(11) if R * 2.0 ** -j < W]
    eps_inc = res.reports["eps_n"].increments[sub_w]
    a_inc = res.reports["a"].increments[sub_w]
    assert np.allclose(eps_inc, np.pi ** 2 * LN2 * frac, rtol=0.1)
    assert np.allclose(a_inc, LN2 * frac, rtol=0.1)
    assert res.reports["eps_n"].slope == pytest.approx(np.pi ** 2 * LN2 * frac, rel=0.1)


def test_cantor_a_slope(catalog):
    assert catalog["cantor"].reports["a"].slope >= 0.3 * LN2


def test_eps_a_consistency(catalog):
    reps = [eps_a_consistency(v.table) for v in catalog.values()]
    assert all(r.violations == 0 for r in reps)
    C = max(r.C for r in reps)
    for v in catalog.values():
        e2, a = v.table.values["eps_n"] ** 2, v.table.values["a"]
        assert np.all(e2 <= C * a + 1e-2 + 1e-12)


def test_default_balls():
    assert np.allclose(default_ball(make_builtin({"kind": "disk"}))[0], [0, 1])
    assert default_ball(make_builtin({"kind": "strip", "w": 0.1}))[1] == pytest.approx(0.8)


# ---------------------------------------------------------------------------
# corkscrews


def _boundary_point(pair, s, x):
    return s.points[int(s.tree.query(x)[1])]


@pytest.mark.parametrize("kind", ["halfspace", "graph"])
def test_locator_succeeds(kind):
    pair = make_builtin({"kind": kind})
    s = sample_boundary(pair, 1e-3)
    x0 = _boundary_point(pair, s, [0.0, 0.0])
    R, delta, tau = 0.5, 0.1, 1 / 20
    c1, c2 = corkscrew_locate(pair, s, x0, R, delta, tau)
    for c, side in ((c1, IN1), (c2, IN2)):
        assert c.found and c.purity == 1.0 and c.side == side
        assert c.radius == tau * 2.0 ** (-c.K - 1) * R
        assert c.K >= np.ceil(np.log2(1 / delta))
        assert np.all(pair.classify(c.center[None]) == side)
    if kind == "halfspace":
        assert c1.K == int(np.ceil(np.log2(1 / delta)))


def test_locator_cantor_empty_side():
    pair = make_builtin({"kind": "cantor"})
    s = sample_boundary(pair, 1e-3)
    x0 = _boundary_point(pair, s, [0.0, 0.0])
    for K in range(4, 9):
        c1, c2 = corkscrew_locate(pair, s, x0, 0.5, K=K)
        assert not c2.found and c2.reason
        assert c2.radius == (1 / 20) * 2.0 ** (-K - 1) * 0.5
    c1, c2 = corkscrew_locate(pair, s, x0, 0.5)
    assert not c1.scale_ok and not c2.found


def test_locator_parameter_guard():
    pair = make_builtin({"kind": "halfspace"})
    s = sample_boundary(pair, 1e-2)
    with pytest.raises(ConfigError):
        corkscrew_locate(pair, s, [0, 0], 0.5, delta=0.5)


def test_octave_sum_flat():
    pair = make_builtin({"kind": "halfspace"})
    assert octave_eps_sum(pair, np.zeros(2), 0.5, 4) <= 1e-12
    strip = make_builtin({"kind": "strip", "w": 0.5})
    assert octave_eps_sum(strip, np.zeros(2), 0.5, 3) == pytest.approx(np.pi ** 2 * LN2, rel=1e-2)


def test_mass_balance_halfspace():
    rep = mass_balance_check(make_builtin({"kind": "halfspace"}), [0, 0], 4, 0.5)
    assert abs(rep.fractions[0] - 0.5) <= 3 * rep.sigma[0]
    assert abs(rep.fractions[1] - 0.5) <= 3 * rep.sigma[1]
    assert rep.fractions[2] == 0


def test_mass_balance_graph():
    pair = make_builtin({"kind": "graph", "slope": 0.3})
    s = sample_boundary(pair, 1e-3)
    x = _boundary_point(pair, s, [0.0, 0.0])
    rep = mass_balance_check(pair, x, 4, 0.5)
    assert np.all(rep.fractions[:2] >= 0.25 - 3 * rep.sigma[:2])


def test_mass_balance_strip_gap():
    w = 0.01
    pair = make_builtin({"kind": "strip", "w": w})
    K, R = 4, 0.5
    rep = mass_balance_check(pair, [0, 0], K, R)
    r0, r1 = 2.0 ** (-K - 1) * R, 2.0 ** -K * R
    # the gap band {-w < y < 0} inside the annulus, by numeric integration over y
    y = np.linspace(-w, 0, 2001)
    chord = 2 * (np.sqrt(np.maximum(r1 ** 2 - y ** 2, 0)) - np.sqrt(np.maximum(r0 ** 2 - y ** 2, 0)))
    band = np.trapezoid(chord, y) / (np.pi * (r1 ** 2 - r0 ** 2))
    assert abs(rep.fractions[2] - band) <= 3 * rep.sigma[2] + 1e-3
    assert abs(rep.fractions[1] - (0.5 - band)) <= 3 * rep.sigma[1] + 1e-3
    # a gap wider than the annulus swallows the whole lower side
    wide = mass_balance_check(make_builtin({"kind": "strip", "w": 0.1}), [0, 0], K, R)
    assert wide.fractions[1] == 0


def test_mass_balance_deterministic():
    pair = make_builtin({"kind": "graph"})
    a = mass_balance_check(pair, [0, 0], 3, 0.5, trials=20000, seed=5)
    b = mass_balance_check(pair, [0, 0], 3, 0.5, trials=20000, seed=5)
    assert np.array_equal(a.fractions, b.fractions)
