import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatgauge.domains import (IN1, IN2, NEITHER, CATALOG_SEVEN, cantor_squares, estimate_adr_constants,
                               load_obj, load_polyline, make_builtin, sample_boundary, transformed)
from flatgauge.errors import ConfigError, GeometryError


def test_halfspace_point_is_in1():
    assert make_builtin({"kind": "halfspace"}).classify(np.array([0.0, 1.0])) == IN1


def test_strip_gap_is_neither():
    p = make_builtin({"kind": "strip", "w": 0.5})
    assert p.classify(np.array([0.0, -0.25])) == NEITHER


def test_cone_axis_point_is_neither():
    p = make_builtin({"kind": "cone", "gamma": 0.2})
    assert p.classify(np.array([1.0, 0.0])) == NEITHER


def test_boundary_points_are_neither():
    assert make_builtin({"kind": "disk"}).classify(np.array([1.0, 0.0])) == NEITHER
    assert make_builtin({"kind": "halfspace"}).classify(np.array([3.0, 0.0])) == NEITHER


@pytest.mark.parametrize("bad", [{"kind": "cone", "gamma": 2.0}, {"kind": "strip", "w": -1},
                                 {"kind": "cantor", "gen": 11}, {"kind": "nope"}, {"kind": "disk", "radius": 0}])
def test_invalid_descriptor(bad):
    with pytest.raises(ConfigError):
        make_builtin(bad)


@pytest.mark.parametrize("kind", CATALOG_SEVEN)
def test_disjoint_and_deterministic(kind):
    p = make_builtin({"kind": kind})
    rng = np.random.default_rng(1)
    lo, hi = p.bbox
    pts = lo + (hi - lo) * rng.random((200_000, p.ambient_dim))
    a, b = p.classify(pts), p.classify(pts)
    assert np.array_equal(a, b)
    assert set(np.unique(a)) <= {NEITHER, IN1, IN2}


def test_builtins_match_closed_forms():
    rng = np.random.default_rng(2)
    x = rng.uniform(-2, 2, (50_000, 2))
    g = 0.3
    cone = make_builtin({"kind": "cone", "gamma": g}).classify(x)
    ref = np.where(x[:, 1] > np.abs(x[:, 0]) * np.tan(g), IN1,
                   np.where(x[:, 1] < -np.abs(x[:, 0]) * np.tan(g), IN2, NEITHER))
    assert np.array_equal(cone, ref)
    strip = make_builtin({"kind": "strip", "w": 0.5}).classify(x)
    ref = np.where(x[:, 1] > 0, IN1, np.where(x[:, 1] < -0.5, IN2, NEITHER))
    assert np.array_equal(strip, ref)
    disk = make_builtin({"kind": "disk"}).classify(x)
    rr = np.hypot(x[:, 0], x[:, 1])
    assert np.array_equal(disk, np.where(rr < 1, IN1, np.where(rr > 1, IN2, NEITHER)))


def test_cantor_never_in2():
    p = make_builtin({"kind": "cantor", "gen": 4})
    x = np.random.default_rng(0).random((100_000, 2))
    assert not np.any(p.classify(x) == IN2)
    c = cantor_squares(4)
    assert c.shape == (4 ** 4, 2)


def test_line_sample_mass():
    s = sample_boundary(make_builtin({"kind": "halfspace", "width": 1.0}), 0.01)
    assert 90 <= len(s.points) <= 110
    assert s.total_mass == pytest.approx(1.0, rel=0.02)


def test_circle_sample_mass():
    s = sample_boundary(make_builtin({"kind": "disk"}), 0.01)
    assert s.total_mass == pytest.approx(2 * np.pi, rel=0.02)


def test_cantor_sample_mass():
    s = sample_boundary(make_builtin({"kind": "cantor", "gen": 4}), 4.0 ** -4)
    assert 0.5 <= s.total_mass <= 2.0


def test_sample_bad_h():
    p = make_builtin({"kind": "disk"})
    with pytest.raises(ConfigError):
        sample_boundary(p, 1.0)
    with pytest.raises(GeometryError):
        sample_boundary(make_builtin({"kind": "caps", "u1": [0, 0, 1], "u2": [0, 0, -1],
                                      "rho1": 1.0, "rho2": 1.0}), 0.01)


@pytest.mark.parametrize("kind", ["halfspace", "disk", "graph", "square", "cone", "strip"])
def test_boundary_fidelity(kind):
    p = make_builtin({"kind": kind})
    s = sample_boundary(p, 0.02)
    assert np.all(p.boundary_distance(s.points) <= 0.02 + 1e-12)


def test_sampling_deterministic():
    p = make_builtin({"kind": "graph"})
    a, b = sample_boundary(p, 0.01, seed=3), sample_boundary(p, 0.01, seed=3)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)


def test_adr_line():
    s = sample_boundary(make_builtin({"kind": "halfspace"}), 0.002)
    lo, hi = estimate_adr_constants(s, probes=100)
    assert 1.9 <= lo <= hi <= 2.1


def test_adr_circle():
    s = sample_boundary(make_builtin({"kind": "disk"}), 0.001)
    lo, hi = estimate_adr_constants(s, probes=100)
    assert 1.9 <= lo and hi <= 2.2


def test_adr_cantor():
    s = sample_boundary(make_builtin({"kind": "cantor", "gen": 6}), 4.0 ** -6)
    lo, hi = estimate_adr_constants(s, probes=100)
    assert 0.2 <= lo and hi <= 5


@pytest.mark.parametrize("kind", ["halfspace", "disk", "graph"])
def test_adr_ratio_sane(kind):
    s = sample_boundary(make_builtin({"kind": kind}), 0.005)
    lo, hi = s.adr
    assert hi / lo <= 10


def test_polyline_roundtrip(tmp_path):
    f = tmp_path / "sq.txt"
    f.write_text("0 0\n1 0\n1 1\n0 1\n")
    p = load_polyline(f)
    lab = p.classify(np.array([[0.5, 0.5], [2.0, 0.5], [1.0, 0.5]]))
    assert list(lab) == [IN1, IN2, NEITHER]
    s = sample_boundary(p, 0.01)
    assert s.total_mass == pytest.approx(4.0, rel=0.02)


def test_obj_tetra(tmp_path):
    f = tmp_path / "t.obj"
    f.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n")
    p = load_obj(f)
    lab = p.classify(np.array([[0.1, 0.1, 0.1], [1.0, 1.0, 1.0]]))
    assert list(lab) == [IN1, IN2]
    s = sample_boundary(p, 0.02)
    area = 1.5 + np.sqrt(3) / 2
    assert s.total_mass == pytest.approx(area, rel=0.02)


@given(st.floats(0, 2 * np.pi), st.floats(-1, 1), st.floats(-1, 1))
def test_transformed_classify(theta, dx, dy):
    p = make_builtin({"kind": "cone", "gamma": 0.3})
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    q = transformed(p, R, np.array([dx, dy]), 2.0)
    x = np.random.default_rng(0).uniform(-1, 1, (500, 2))
    assert np.array_equal(q.classify(2.0 * x @ R.T + [dx, dy]), p.classify(x))
