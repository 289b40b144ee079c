import pickle

import numpy as np
import pytest

from flatgauge.domains import BoundarySample, make_builtin, sample_boundary
from flatgauge.errors import ConfigError
from flatgauge.lattice import adaptive_c1, build_lattice, check_lattice, cube_ball, expanded_cube


def _segment(n=1024):
    x = (np.arange(n) + 0.5) / n
    return BoundarySample(np.column_stack([x, np.zeros(n)]), np.full(n, 1 / n), 1 / n, (2.0, 2.0))


@pytest.fixture(scope="module")
def line_lattice():
    return build_lattice(_segment(), 6)


@pytest.fixture(scope="module")
def circle_lattice():
    s = sample_boundary(make_builtin({"kind": "disk"}), 2 * np.pi / 1e4)
    return build_lattice(s, 7)


@pytest.fixture(scope="module")
def cantor_lattice():
    s = sample_boundary(make_builtin({"kind": "cantor", "gen": 6}), 4.0 ** -6)
    return build_lattice(s, 10)


def test_segment_counts(line_lattice):
    for j in range(0, 7):
        assert 2 ** (j - 1) <= line_lattice.count(j) <= 2 ** (j + 1)


def test_too_deep():
    with pytest.raises(ConfigError):
        build_lattice(_segment(), 9)


@pytest.mark.parametrize("name", ["line_lattice", "circle_lattice", "cantor_lattice"])
def test_partition_and_nesting(name, request):
    lat = request.getfixturevalue(name)
    rep = check_lattice(lat, collar_generations=[])
    assert rep.partition_ok and rep.nesting_ok and rep.center_in_cube
    assert rep.diam_constant <= 4
    N = len(lat.sample.points)
    for j in lat.generations:
        seen = np.concatenate([lat.members(j, q) for q in range(lat.count(j))])
        assert np.array_equal(np.sort(seen), np.arange(N))
        if j > lat.j0:
            for q in range(lat.count(j)):
                par = lat.parent[j][q]
                assert set(lat.members(j, q)) <= set(lat.members(j - 1, par))


def test_line_mass_ratio(line_lattice):
    # cubes sit inside B(x_Q, l) so a line cube carries at most 2l; parent chains can
    # shave an interior cube down to about a third of the net radius
    lat = line_lattice
    for j in range(0, 7):
        ell = 2.0 ** -j
        for q in range(lat.count(j)):
            m = lat.members(j, q)
            x = lat.sample.points[m, 0]
            if x.min() < 2 * ell or x.max() > 1 - 2 * ell:
                continue
            assert 0.125 <= lat.sample.weights[m].sum() / ell <= 2.0


def test_line_collar_exponent(line_lattice):
    rep = check_lattice(line_lattice, collar_generations=[3, 4, 5])
    assert rep.collar_exponent == pytest.approx(1.0, abs=0.2)


def test_mass_envelope_ur(circle_lattice):
    assert check_lattice(circle_lattice, collar_generations=[]).mass_fraction_in_envelope >= 0.95


def test_cantor_self_similar_masses(cantor_lattice):
    for k in range(1, 5):
        m = cantor_lattice.masses(2 * k)
        assert np.all((m >= 4.0 ** -k / 4) & (m <= 4 * 4.0 ** -k))


def test_cube_in_ball(circle_lattice):
    lat = circle_lattice
    for j in lat.generations:
        for q in range(lat.count(j)):
            (x, r1), (_, r) = cube_ball(lat, j, q, c1=0.5)
            m = lat.members(j, q)
            assert np.all(np.linalg.norm(lat.sample.points[m] - x, axis=1) < r)
            assert r1 == 0.5 * r


def test_adaptive_c1_line(line_lattice):
    lat = line_lattice
    cs = [adaptive_c1(lat, j, q) for j in range(1, 7) for q in range(lat.count(j))]
    assert np.mean(np.array(cs) >= 1 / 8) >= 0.9
    for j in range(1, 7):
        for q in range(lat.count(j)):
            (x, r1), _ = cube_ball(lat, j, q)
            inside = lat.sample.ball(x, r1)
            assert np.all(lat.label[j][inside] == q)


def test_expanded_cube(circle_lattice):
    lat = circle_lattice
    pts = lat.sample.points
    j, q = 3, 5
    m = lat.members(j, q)
    ell = 2.0 ** -j
    got = set(expanded_cube(lat, j, q, 2.0))
    d = np.min(np.linalg.norm(pts[:, None, :] - pts[m][None], axis=2), axis=1)
    assert got == set(np.flatnonzero(d <= ell))


def test_deterministic():
    s = sample_boundary(make_builtin({"kind": "graph"}), 0.005)
    a, b = build_lattice(s, 5, seed=4), build_lattice(s, 5, seed=4)
    assert list(a.rows()) == list(b.rows())
    assert pickle.dumps(a.label) == pickle.dumps(b.label)
