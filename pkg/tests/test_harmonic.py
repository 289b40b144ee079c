import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from flatgauge.domains import IN1, IN2, make_builtin, sample_boundary
from flatgauge.errors import ConfigError, StatisticalFailure
from flatgauge.harmonic import (WosConfig, acf_log_bound_check, calibrate_log_bound, clopper_pearson,
                                default_truncation, density_profile, density_ratio, doubling_check,
                                log_ratio_integral_check, uniformity_test, wos_harmonic_measure)

H = 1e-3
CFG = WosConfig(eps_stop=2 * H, walks=100_000)


@pytest.fixture(scope="module")
def disk():
    pair = make_builtin({"kind": "disk"})
    return pair, sample_boundary(pair, H)


@pytest.fixture(scope="module")
def disk_center(disk):
    pair, s = disk
    return wos_harmonic_measure(pair, IN1, [0, 0], s, CFG)


@pytest.fixture(scope="module")
def disk_outside(disk):
    pair, s = disk
    return wos_harmonic_measure(pair, IN2, [0, -2.5], s, CFG)


@pytest.fixture(scope="module")
def square():
    pair = make_builtin({"kind": "square"})
    s = sample_boundary(pair, H)
    return pair, s, wos_harmonic_measure(pair, IN1, [0, 0], s, CFG)


def _angles(s):
    return np.arctan2(s.points[:, 1], s.points[:, 0])


def test_config_guards(disk):
    pair, s = disk
    with pytest.raises(ConfigError):
        WosConfig(eps_stop=H, walks=10_000).validate(s)
    with pytest.raises(ConfigError):
        WosConfig(eps_stop=2 * H, walks=500).validate(s)
    with pytest.raises(ConfigError):
        wos_harmonic_measure(pair, IN1, [0.95, 0], s, CFG)  # too close to the boundary
    with pytest.raises(ConfigError):
        wos_harmonic_measure(pair, IN2, [0, 0], s, CFG)  # wrong side


def test_mass_conservation(disk_center, disk_outside, square):
    for hc in (disk_center, disk_outside, square[2]):
        assert hc.counts.sum() + hc.outer == hc.walks - hc.censored
        assert hc.censored_fraction < 1e-3
    assert disk_center.outer == 0 and square[2].outer == 0
    assert disk_outside.outer > 0


def test_reproducible(disk):
    pair, s = disk
    cfg = WosConfig(eps_stop=2 * H, walks=5000, seed=3)
    a = wos_harmonic_measure(pair, IN1, [0.3, 0.1], s, cfg)
    b = wos_harmonic_measure(pair, IN1, [0.3, 0.1], s, WosConfig(**{**cfg.__dict__, "threads": 3}))
    assert np.array_equal(a.counts, b.counts) and a.censored == b.censored


def test_disk_center_uniform(disk, disk_center):
    _, s = disk
    lab = np.minimum(((_angles(s) % (2 * np.pi)) / (2 * np.pi) * 64).astype(int), 63)
    _, p = uniformity_test(disk_center, lab, 64)
    assert p > 0.01


def _poisson_arc(rho, a, b):
    F = lambda t: np.arctan((1 + rho) / (1 - rho) * np.tan(t / 2)) / np.pi
    return F(b) - F(a)


def test_poisson_oracle_two_routes():
    for rho in (0.2, 0.5, 0.8):
        for a, b in ((-np.pi / 8, np.pi / 8), (0.3, 1.4), (-2.0, -0.1)):
            k = quad(lambda t: (1 - rho ** 2) / (1 - 2 * rho * np.cos(t) + rho ** 2) / (2 * np.pi), a, b)[0]
            assert _poisson_arc(rho, a, b) == pytest.approx(k, rel=1e-10)


def test_off_center_pole_poisson(disk):
    pair, s = disk
    hc = wos_harmonic_measure(pair, IN1, [0.5, 0], s, CFG)
    th = _angles(s)
    sel = np.abs(th) < np.pi / 8
    half = np.pi / len(th)
    ex = _poisson_arc(0.5, th[sel].min() - half, th[sel].max() + half)
    p = hc.counts[sel].sum() / hc.total
    assert abs(p - ex) <= 3 * np.sqrt(ex * (1 - ex) / hc.total)


def test_square_fourfold(square):
    _, s, hc = square
    P = s.points
    edge = np.where(P[:, 0] >= 1 - 1e-9, 0, np.where(P[:, 1] >= 1 - 1e-9, 1, np.where(P[:, 0] <= -1 + 1e-9, 2, 3)))
    frac = np.bincount(edge, weights=hc.counts, minlength=4) / hc.total
    sig = np.sqrt(0.25 * 0.75 / hc.total)
    assert np.all(np.abs(frac - 0.25) <= 3 * sig)


def test_disk_theta_is_one_over_pi(disk, disk_center):
    _, s = disk
    for x in s.points[[0, 1000, 4000]]:
        for r in (0.05, 0.1, 0.2):
            d = density_ratio(disk_center, x, r, level=0.997)
            assert d.lo <= 1 / np.pi <= d.hi


def test_theta_at_diameter(square):
    _, s, hc = square
    d = density_ratio(hc, [1, 0], s.diam)
    assert d.theta == pytest.approx(1 / s.diam)


def test_square_corner_below_edge(square):
    _, s, hc = square
    for r in (0.02, 0.05):
        corner, mid = density_ratio(hc, [1, 1], r), density_ratio(hc, [1, 0], r)
        assert corner.hi < mid.lo


def test_zero_hits_flag(disk):
    pair, s = disk
    hc = wos_harmonic_measure(pair, IN1, [0, 0], s, WosConfig(eps_stop=2 * H, walks=1000))
    d = density_ratio(hc, s.points[0], 1e-4)
    assert d.undefined and d.theta == 0 and d.lo == 0 and d.hi > 0


def test_profile_rows(disk_center):
    prof = density_profile(disk_center, [0, 1], [0.05, 0.1, 0.2])
    rows = list(prof.rows())
    assert len(rows) == 3 and all(len(r) == 6 for r in rows)
    assert np.all(prof.theta > 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 500), st.integers(500, 5000))
def test_clopper_pearson_brackets(k, N):
    lo, hi = clopper_pearson(k, N)
    assert 0 <= lo <= k / N <= hi <= 1


def test_log_ratio_disk_near_zero(disk, disk_center):
    pair, s = disk
    rep = log_ratio_integral_check(pair, IN1, [0, 0], s, ((0, 1), 0.5), ("fraction", 4), CFG, counts=disk_center)
    assert rep.undefined == 0
    assert abs(rep.value) <= rep.ci
    assert abs(rep.value_doubled) <= rep.ci_doubled


def test_log_ratio_square_stable(square):
    pair, s, hc = square
    vals = []
    for B in (((1, 0), 0.5), ((1, 1), 0.5)):
        rep = log_ratio_integral_check(pair, IN1, [0, 0], s, B, ("fraction", 4), CFG, counts=hc)
        assert rep.undefined == 0
        assert rep.rel_change <= 0.1
        vals.append(rep.value)
    assert max(vals) <= 2.0  # recorded C for the square


def test_log_ratio_random_rule_floor(square):
    pair, s, hc = square
    rep = log_ratio_integral_check(pair, IN1, [0, 0], s, ((1, 0), 0.5), ("random", 1), CFG, counts=hc, centers=16)
    assert np.all(rep.rho >= rep.rho_floor) and np.all(rep.rho <= 0.5)
    assert np.isfinite(rep.value)


def test_log_ratio_graph_bounded():
    pair = make_builtin({"kind": "graph", "slope": 0.3, "width": 4})
    s = sample_boundary(pair, H)
    cfg = WosConfig(eps_stop=2 * H, walks=50_000)
    hc = wos_harmonic_measure(pair, IN1, [0, 1.0], s, cfg)
    assert np.allclose(hc.truncation[1], 2.0)
    vals = []
    for x0 in (-0.6, -0.3, 0.0, 0.3, 0.6):
        xb = s.points[s.tree.query([x0, 0])[1]]
        rep = log_ratio_integral_check(pair, IN1, [0, 1.0], s, (xb, 0.25), ("fraction", 3), cfg, counts=hc)
        vals.append(abs(rep.value))
    assert max(vals) <= 1.0


def test_strip_rejected():
    pair = make_builtin({"kind": "strip", "w": 0.05})
    s = sample_boundary(pair, H)
    with pytest.raises(ConfigError):
        log_ratio_integral_check(pair, IN1, [0, 1], s, ((0, 0), 0.5), ("fraction", 3), CFG)


def test_acf_log_bound_disk(disk, disk_center, disk_outside):
    pair, s = disk
    reps = []
    for th in np.linspace(0, 2 * np.pi, 20, endpoint=False):
        x = s.points[s.tree.query([np.cos(th), np.sin(th)])[1]]
        reps.append(acf_log_bound_check(pair, x, 0.025, 0.2, disk_center, disk_outside))
    for rep in reps:
        assert len(rep.shells) == 3
        assert np.all(rep.shells >= -1e-6) and rep.lhs < 0.01  # curvature only
    cal = calibrate_log_bound(reps)
    assert np.isfinite(cal.C) and cal.violations == 0 and cal.checked == 10


def test_acf_log_bound_halfspace_limit():
    pair = make_builtin({"kind": "halfspace", "width": 4})
    s = sample_boundary(pair, H)
    cfg = WosConfig(eps_stop=2 * H, walks=20_000)
    h1 = wos_harmonic_measure(pair, IN1, [0, 1], s, cfg)
    h2 = wos_harmonic_measure(pair, IN2, [0, -1], s, cfg)
    rep = acf_log_bound_check(pair, s.points[s.tree.query([0, 0])[1]], 0.03, 0.24, h1, h2)
    assert abs(rep.lhs) <= 1e-9
    assert rep.logs_lo <= 0 <= rep.logs_hi


def test_acf_log_bound_preconditions(disk, disk_center, disk_outside):
    pair, s = disk
    x = s.points[0]
    with pytest.raises(ConfigError):
        acf_log_bound_check(pair, [0.5, 0], 0.025, 0.2, disk_center, disk_outside)  # off the boundary
    with pytest.raises(ConfigError):
        acf_log_bound_check(pair, x, 0.025, 0.3, disk_center, disk_outside)  # r beyond dist(x, p)/4
    strip = make_builtin({"kind": "strip", "w": 0.05})
    with pytest.raises(ConfigError):
        acf_log_bound_check(strip, [0, 0], 0.01, 0.1, disk_center, disk_outside)


def test_doubling(disk, disk_center, square):
    _, s = disk
    xs = s.points[np.linspace(0, len(s.points) - 1, 50).astype(int)]
    rep = doubling_check(disk_center, xs, np.full(50, 0.05))
    assert rep.C <= 1.2
    _, sq, hc = square
    xs = sq.points[np.linspace(0, len(sq.points) - 1, 50).astype(int)]
    rep = doubling_check(hc, xs, np.full(50, 0.05))
    assert np.all(rep.ratios >= 2.0 ** -rep.n / rep.C) and np.all(rep.ratios <= rep.C)
    assert rep.C <= 4


def test_censoring_raises(disk):
    pair, s = disk
    with pytest.raises(StatisticalFailure):
        wos_harmonic_measure(pair, IN1, [0.5, 0], s, WosConfig(eps_stop=2 * H, walks=2000, max_steps=2))


def test_truncation_defaults(disk):
    pair, s = disk
    c, L = default_truncation(pair, s)
    assert L > 2 and np.allclose(c, 0, atol=1e-3)
    g = make_builtin({"kind": "graph", "width": 3})
    assert default_truncation(g, sample_boundary(g, 1e-2))[1] == 1.5
