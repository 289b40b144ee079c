"""Disjoint open pairs (Omega_1, Omega_2), boundary samples and the test catalog.

Every pair exposes a vectorised ``classify`` returning NEITHER/IN1/IN2 codes.
Points exactly on a boundary are NEITHER since both sets are open.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, GeometryError

NEITHER, IN1, IN2 = 0, 1, 2


@dataclass
class DomainPair:
    kind: str
    ambient_dim: int
    params: dict
    bbox: np.ndarray  # shape (2, d): lower and upper corners
    _classify: object = field(repr=False)
    _sampler: object = field(default=None, repr=False)
    _distance: object = field(default=None, repr=False)
    chord_arc: bool = False

    def classify(self, pts):
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.ambient_dim:
            raise ConfigError(f"expected {self.ambient_dim}-d points, got {pts.shape[1]}")
        lab = np.asarray(self._classify(pts), dtype=np.int8)
        return lab[0] if single else lab

    def boundary_distance(self, pts):
        """Unsigned distance to the union of the two boundaries (built-ins only)."""
        if self._distance is None:
            raise GeometryError(f"no analytic distance for {self.kind}")
        return self._distance(np.atleast_2d(np.asarray(pts, dtype=float)))

    @property
    def has_distance(self):
        return self._distance is not None

    @property
    def diam(self):
        return float(np.linalg.norm(self.bbox[1] - self.bbox[0]))

    def descriptor(self):
        return {"kind": self.kind, "dim": self.ambient_dim, **self.params}


@dataclass
class BoundarySample:
    points: np.ndarray
    weights: np.ndarray
    h: float
    adr: tuple = (np.nan, np.nan)
    _tree: object = field(default=None, repr=False)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def n(self):
        return self.points.shape[1] - 1

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    @property
    def total_mass(self):
        return float(self.weights.sum())

    def ball(self, x, r):
        """Indices of sample points with |y - x| < r, sorted."""
        idx = self.tree.query_ball_point(np.asarray(x, float), r)
        idx = np.asarray(sorted(idx), dtype=np.int64)
        if idx.size:
            d = np.linalg.norm(self.points[idx] - x, axis=1)
            idx = idx[d < r]
        return idx

    def mass(self, x, r):
        return float(self.weights[self.ball(x, r)].sum())

    @property
    def diam(self):
        lo, hi = self.points.min(0), self.points.max(0)
        return float(np.linalg.norm(hi - lo))


# ---------------------------------------------------------------------------
# helpers


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _segment_points(a, b, h):
    """Midpoint samples of the segment [a, b] with spacing <= h."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    L = np.linalg.norm(b - a)
    m = max(1, int(np.ceil(L / h)))
    t = (np.arange(m) + 0.5) / m
    return a + t[:, None] * (b - a), np.full(m, L / m)


def _dist_to_segments(pts, A, B):
    """Distance from each point to the nearest of the segments A[k]-B[k]."""
    best = np.full(len(pts), np.inf)
    for a, b in zip(A, B):
        ab = b - a
        t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
        d = np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)
        best = np.minimum(best, d)
    return best


def _box(lo, hi):
    return np.array([lo, hi], dtype=float)


# ---------------------------------------------------------------------------
# catalog


def _halfspace(p):
    d = int(p.get("dim", 2))
    if d not in (2, 3):
        raise ConfigError("halfspace dim must be 2 or 3")
    u = _unit(p.get("normal", [0.0] * (d - 1) + [1.0]))
    if u.shape != (d,):
        raise ConfigError("normal has wrong length")
    width = float(p.get("width", 2.0))
    if width <= 0:
        raise ConfigError("width must be positive")

    def classify(x):
        s = x @ u
        return np.where(s > 0, IN1, np.where(s < 0, IN2, NEITHER))

    # orthonormal frame of the boundary plane
    basis = np.linalg.svd(u[None, :])[2][1:]

    def sampler(h, rng):
        m = max(1, int(np.ceil(width / h)))
        t = -width / 2 + (np.arange(m) + 0.5) * width / m
        if d == 2:
            return t[:, None] * basis[0], np.full(m, width / m)
        g0, g1 = np.meshgrid(t, t, indexing="ij")
        jit = rng.uniform(-0.5, 0.5, size=(2,) + g0.shape) * (width / m)
        g0, g1 = g0 + jit[0], g1 + jit[1]
        pts = g0.reshape(-1, 1) * basis[0] + g1.reshape(-1, 1) * basis[1]
        return pts, np.full(pts.shape[0], (width / m) ** 2)

    half = width / 2 + 1.0
    return DomainPair("halfspace", d, {"normal": u.tolist(), "width": width},
                      _box([-half] * d, [half] * d), classify, sampler,
                      lambda x: np.abs(x @ u), chord_arc=True)


def _cone(p):
    g = float(p.get("gamma", 0.2))
    if not 0 < g < np.pi / 2:
        raise ConfigError("cone gamma must lie in (0, pi/2)")
    width = float(p.get("width", 2.0))
    tg = np.tan(g)

    def classify(x):
        y, ax = x[:, 1], np.abs(x[:, 0]) * tg
        return np.where(y > ax, IN1, np.where(y < -ax, IN2, NEITHER))

    half = width / 2
    ends = np.array([[half, half * tg], [-half, half * tg], [half, -half * tg], [-half, -half * tg]])
    A = np.zeros((4, 2))

    def sampler(h, rng):
        parts = [_segment_points(A[k], ends[k], h) for k in range(4)]
        return np.vstack([q[0] for q in parts]), np.concatenate([q[1] for q in parts])

    return DomainPair("cone", 2, {"gamma": g, "width": width},
                      _box([-half, -half], [half, half]), classify, sampler,
                      lambda x: _dist_to_segments(x, A, ends))


def _strip(p):
    w = float(p.get("w", 0.5))
    if w <= 0:
        raise ConfigError("strip width w must be positive")
    width = float(p.get("width", 4.0))

    def classify(x):
        y = x[:, -1]
        return np.where(y > 0, IN1, np.where(y < -w, IN2, NEITHER))

    def sampler(h, rng):
        m = max(1, int(np.ceil(width / h)))
        t = -width / 2 + (np.arange(m) + 0.5) * width / m
        top = np.column_stack([t, np.zeros(m)])
        bot = np.column_stack([t, np.full(m, -w)])
        return np.vstack([top, bot]), np.full(2 * m, width / m)

    half = width / 2
    return DomainPair("strip", 2, {"w": w, "width": width},
                      _box([-half, -w - 1.0], [half, 1.0]), classify, sampler,
                      lambda x: np.minimum(np.abs(x[:, 1]), np.abs(x[:, 1] + w)))


def _disk(p):
    d = int(p.get("dim", 2))
    R = float(p.get("radius", 1.0))
    if R <= 0 or d not in (2, 3):
        raise ConfigError("disk needs radius > 0 and dim in {2,3}")
    c = np.asarray(p.get("center", [0.0] * d), dtype=float)

    def classify(x):
        rho = np.linalg.norm(x - c, axis=1)
        return np.where(rho < R, IN1, np.where(rho > R, IN2, NEITHER))

    def sampler(h, rng, window=None):
        if d == 2:
            m = max(8, int(np.ceil(2 * np.pi * R / h)))
            k = np.arange(m)
            if window is not None:
                # only generate the arc that can meet the window ball
                v = np.asarray(window[0], float) - c
                span = (float(window[1]) + abs(np.linalg.norm(v) - R)) / R * 1.1
                if span < np.pi:
                    mid = np.arctan2(v[1], v[0]) * m / (2 * np.pi) - 0.5
                    k = np.mod(np.arange(int(np.floor(mid - span * m / (2 * np.pi))),
                                         int(np.ceil(mid + span * m / (2 * np.pi))) + 1), m)
                    k = np.unique(k)
            th = (k + 0.5) * 2 * np.pi / m
            pts = c + R * np.column_stack([np.cos(th), np.sin(th)])
            return pts, np.full(len(k), 2 * np.pi * R / m)
        m = max(20, int(np.ceil(4 * np.pi * R * R / (h * h))))
        k = np.arange(m) + 0.5
        z = 1 - 2 * k / m
        phi = np.pi * (1 + 5 ** 0.5) * k
        s = np.sqrt(1 - z * z)
        pts = c + R * np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
        return pts, np.full(m, 4 * np.pi * R * R / m)

    return DomainPair("disk", d, {"radius": R, "center": c.tolist()},
                      _box(c - R - 0.5, c + R + 0.5), classify, sampler,
                      lambda x: np.abs(np.linalg.norm(x - c, axis=1) - R), chord_arc=True)


class _Graph:
    """Smooth random height function with prescribed maximal slope."""

    def __init__(self, slope, seed, dim, modes=4, period=2.0):
        rng = np.random.default_rng(seed)
        self.dim = dim
        k = np.arange(1, modes + 1)
        if dim == 2:
            self.freq = (2 * np.pi / period) * k[:, None].astype(float)
        else:
            ang = rng.uniform(0, 2 * np.pi, modes)
            self.freq = (2 * np.pi / period) * k[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])
        self.phase = rng.uniform(0, 2 * np.pi, modes)
        amp = 1.0 / k ** 2
        self.amp = amp
        if slope > 0:
            probe = self._grid_probe()
            s = np.max(np.linalg.norm(self.grad(probe), axis=1))
            self.amp = amp * (slope / s)
        else:
            self.amp = amp * 0.0

    def _grid_probe(self):
        t = np.linspace(-2, 2, 4001 if self.dim == 2 else 301)
        if self.dim == 2:
            return t[:, None]
        a, b = np.meshgrid(t, t)
        return np.column_stack([a.ravel(), b.ravel()])

    def __call__(self, xp):
        return np.sin(xp @ self.freq.T + self.phase) @ self.amp

    def grad(self, xp):
        c = np.cos(xp @ self.freq.T + self.phase) * self.amp
        return c @ self.freq


class _Bump:
    """Flat line with one bump height * (1 - t^2)^2, t = (x - center) / halfwidth."""

    def __init__(self, height, halfwidth, center):
        self.height, self.w, self.c = height, halfwidth, center

    def __call__(self, xp):
        t = (xp[:, 0] - self.c) / self.w
        return np.where(np.abs(t) < 1, self.height * (1 - t * t) ** 2, 0.0)

    def grad(self, xp):
        t = (xp[:, 0] - self.c) / self.w
        g = np.where(np.abs(t) < 1, -4 * self.height * t * (1 - t * t) / self.w, 0.0)
        return g[:, None]


def _graph(p):
    d = int(p.get("dim", 2))
    slope = float(p.get("slope", 0.3))
    seed = int(p.get("seed", 0))
    width = float(p.get("width", 2.0))
    if slope < 0 or d not in (2, 3):
        raise ConfigError("graph needs slope >= 0 and dim in {2,3}")
    return _graph_pair("graph", _Graph(slope, seed, d), d, width, {"slope": slope, "seed": seed, "width": width})


def _bump(p):
    height = float(p.get("height", 0.05))
    hw = float(p.get("halfwidth", 0.1))
    c = float(p.get("center", 0.0))
    width = float(p.get("width", 2.0))
    if hw <= 0 or width <= 0:
        raise ConfigError("bump needs positive halfwidth and width")
    return _graph_pair("bump", _Bump(height, hw, c), 2, width,
                       {"height": height, "halfwidth": hw, "center": c, "width": width})


def _graph_pair(kind, g, d, width, params):
    def classify(x):
        s = x[:, -1] - g(x[:, :-1])
        return np.where(s > 0, IN1, np.where(s < 0, IN2, NEITHER))

    half = width / 2
    fine = np.linspace(-half, half, 20001)
    fy = g(fine[:, None])
    seg = np.hypot(np.diff(fine), np.diff(fy))
    arc = np.concatenate([[0.0], np.cumsum(seg)])

    def sampler(h, rng):
        if d == 2:
            m = max(1, int(np.ceil(arc[-1] / h)))
            s = (np.arange(m) + 0.5) * arc[-1] / m
            xs = np.interp(s, arc, fine)
            return np.column_stack([xs, g(xs[:, None])]), np.full(m, arc[-1] / m)
        m = max(1, int(np.ceil(width / h)))
        t = -half + (np.arange(m) + 0.5) * width / m
        a, b = np.meshgrid(t, t, indexing="ij")
        jit = rng.uniform(-0.5, 0.5, size=(2,) + a.shape) * (width / m)
        xp = np.column_stack([(a + jit[0]).ravel(), (b + jit[1]).ravel()])
        jac = np.sqrt(1 + np.sum(g.grad(xp) ** 2, axis=1))
        return np.column_stack([xp, g(xp)]), jac * (width / m) ** 2

    poly = np.column_stack([fine, fy]) if d == 2 else None
    dist = None
    if d == 2:
        tree = cKDTree(poly)

        def dist(x):
            dd, _ = tree.query(x)
            return dd

    top = float(np.max(np.abs(fy))) + 1.0
    return DomainPair(kind, d, params,
                      _box([-half] * (d - 1) + [-top], [half] * (d - 1) + [top]),
                      classify, sampler, dist, chord_arc=True)


def _square(p):
    a = float(p.get("half", 1.0))
    if a <= 0:
        raise ConfigError("square half-side must be positive")

    def classify(x):
        m = np.max(np.abs(x), axis=1)
        return np.where(m < a, IN1, np.where(m > a, IN2, NEITHER))

    corners = np.array([[a, a], [-a, a], [-a, -a], [a, -a]])
    nxt = np.roll(corners, -1, axis=0)

    def sampler(h, rng):
        parts = [_segment_points(corners[k], nxt[k], h) for k in range(4)]
        return np.vstack([q[0] for q in parts]), np.concatenate([q[1] for q in parts])

    return DomainPair("square", 2, {"half": a}, _box([-a - 0.5] * 2, [a + 0.5] * 2),
                      classify, sampler, lambda x: _dist_to_segments(x, corners, nxt),
                      chord_arc=True)


def _in_cantor(x, gen):
    inside = np.ones(len(x), dtype=bool)
    q = x.copy()
    inside &= np.all((q >= 0) & (q <= 1), axis=1)
    for _ in range(gen):
        lo = q <= 0.25
        hi = q >= 0.75
        inside &= np.all(lo | hi, axis=1)
        q = np.where(lo, 4 * q, 4 * q - 3)
    return inside


def cantor_squares(gen):
    """Lower-left corners of the generation-`gen` squares (side 4**-gen)."""
    c = np.zeros((1, 2))
    for k in range(gen):
        s = 4.0 ** -(k + 1)
        off = np.array([[0, 0], [3 * s, 0], [0, 3 * s], [3 * s, 3 * s]])
        c = (c[:, None, :] + off[None]).reshape(-1, 2)
    return c


def _cantor(p):
    m = int(p.get("gen", 4))
    if not 0 <= m <= 10:
        raise ConfigError("Cantor generation must be in [0, 10]")

    def classify(x):
        return np.where(_in_cantor(x, m), NEITHER, IN1)

    def sampler(h, rng):
        s = 4.0 ** -m
        k = max(1, int(np.ceil(s / h)))
        t = (np.arange(k) + 0.5) / k * s
        z = np.zeros(k)
        # one square perimeter, counter-clockwise from the lower-left corner
        ring = np.vstack([np.column_stack([t, z]), np.column_stack([z + s, t]),
                          np.column_stack([s - t, z + s]), np.column_stack([z, s - t])])
        c = cantor_squares(m)
        pts = (c[:, None, :] + ring[None]).reshape(-1, 2)
        # each square carries mass equal to its side: total mass 1 at every generation
        return pts, np.full(len(pts), s / len(ring))

    return DomainPair("cantor", 2, {"gen": m}, _box([-0.25, -0.25], [1.25, 1.25]),
                      classify, sampler, None)


def _sector(p):
    """Two disjoint planar sectors with vertex at the origin (angles in radians)."""
    a1, b1 = float(p["a1"]), float(p["b1"])
    a2, b2 = float(p["a2"]), float(p["b2"])
    for a, b in ((a1, b1), (a2, b2)):
        if not 0 < b - a < 2 * np.pi:
            raise ConfigError("sector must have opening in (0, 2pi)")

    def inside(x, a, b):
        ang = np.mod(np.arctan2(x[:, 1], x[:, 0]) - a, 2 * np.pi)
        return (ang > 0) & (ang < b - a) & (np.hypot(x[:, 0], x[:, 1]) > 0)

    # disjointness check on a fine circle
    th = np.linspace(0, 2 * np.pi, 20000, endpoint=False)
    ring = np.column_stack([np.cos(th), np.sin(th)])
    if np.any(inside(ring, a1, b1) & inside(ring, a2, b2)):
        raise ConfigError("sectors overlap")

    def classify(x):
        return np.where(inside(x, a1, b1), IN1, np.where(inside(x, a2, b2), IN2, NEITHER))

    ends = np.array([[np.cos(t), np.sin(t)] for t in (a1, b1, a2, b2)])

    def sampler(h, rng):
        parts = [_segment_points(np.zeros(2), e, h) for e in ends]
        return np.vstack([q[0] for q in parts]), np.concatenate([q[1] for q in parts])

    return DomainPair("sector", 2, {"a1": a1, "b1": b1, "a2": a2, "b2": b2},
                      _box([-1, -1], [1, 1]), classify, sampler,
                      lambda x: _dist_to_segments(x, np.zeros((4, 2)), ends))


def _caps(p):
    """Two disjoint circular cones in R^3 with vertex at the origin."""
    u1, u2 = _unit(p["u1"]), _unit(p["u2"])
    r1, r2 = float(p["rho1"]), float(p["rho2"])
    if not (0 < r1 < np.pi and 0 < r2 < np.pi):
        raise ConfigError("cap apertures must lie in (0, pi)")
    if np.arccos(np.clip(u1 @ u2, -1, 1)) < r1 + r2 - 1e-12:
        raise ConfigError("caps overlap")
    c1, c2 = np.cos(r1), np.cos(r2)

    def classify(x):
        nrm = np.linalg.norm(x, axis=1)
        i1 = (x @ u1 > c1 * nrm) & (nrm > 0)
        i2 = (x @ u2 > c2 * nrm) & (nrm > 0)
        return np.where(i1, IN1, np.where(i2, IN2, NEITHER))

    return DomainPair("caps", 3, {"u1": u1.tolist(), "u2": u2.tolist(), "rho1": r1, "rho2": r2},
                      _box([-1] * 3, [1] * 3), classify, None, None)


_CATALOG = {
    "halfspace": _halfspace,
    "cone": _cone,
    "strip": _strip,
    "disk": _disk,
    "graph": _graph,
    "bump": _bump,
    "square": _square,
    "cantor": _cantor,
    "sector": _sector,
    "caps": _caps,
}

# the seven domains used by the Carleson dichotomy check
CATALOG_SEVEN = ("halfspace", "disk", "graph", "square", "cone", "strip", "cantor")


def make_builtin(descriptor):
    d = dict(descriptor)
    kind = d.pop("kind", None)
    if kind not in _CATALOG:
        raise ConfigError(f"unknown domain kind {kind!r}")
    try:
        return _CATALOG[kind](d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}") from exc


def transformed(pair, rot=None, shift=None, scale=1.0):
    """Rigidly moved and scaled copy: new = scale * rot @ old + shift."""
    d = pair.ambient_dim
    R = np.eye(d) if rot is None else np.asarray(rot, float)
    t = np.zeros(d) if shift is None else np.asarray(shift, float)
    s = float(scale)

    def back(x):
        return ((x - t) / s) @ R

    sampler = None
    if pair._sampler is not None:
        def sampler(h, rng):
            pts, w = pair._sampler(h / s, rng)
            return s * pts @ R.T + t, w * s ** (d - 1)

    dist = None
    if pair._distance is not None:
        def dist(x):
            return s * pair._distance(back(x))

    corners = np.array(np.meshgrid(*pair.bbox.T)).reshape(d, -1).T
    moved = s * corners @ R.T + t
    return DomainPair(pair.kind, d, dict(pair.params, moved=True),
                      np.array([moved.min(0), moved.max(0)]),
                      lambda x: pair._classify(back(x)), sampler, dist, pair.chord_arc)


# ---------------------------------------------------------------------------
# file formats


def _parity_polygon(x, poly):
    """Even-odd rule; points within 1e-12 of an edge are reported as on-boundary."""
    inside = np.zeros(len(x), dtype=bool)
    a = poly
    b = np.roll(poly, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(a, b):
        cond = (y0 > x[:, 1]) != (y1 > x[:, 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (x[:, 1] - y0) * (x1 - x0) / (y1 - y0)
        inside ^= cond & (x[:, 0] < xc)
    on = _dist_to_segments(x, a, b) < 1e-12
    return inside, on


def load_polyline(path):
    """Closed polygon from lines "x y"; In1 is the enclosed region."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"bad polyline line: {line!r}")
            rows.append([float(parts[0]), float(parts[1])])
    poly = np.array(rows)
    if len(poly) < 3:
        raise GeometryError("polyline needs at least three vertices")
    if np.allclose(poly[0], poly[-1]):
        poly = poly[:-1]
    nxt = np.roll(poly, -1, axis=0)

    def classify(x):
        inside, on = _parity_polygon(x, poly)
        return np.where(on, NEITHER, np.where(inside, IN1, IN2))

    def sampler(h, rng):
        parts = [_segment_points(a, b, h) for a, b in zip(poly, nxt)]
        return np.vstack([q[0] for q in parts]), np.concatenate([q[1] for q in parts])

    lo, hi = poly.min(0), poly.max(0)
    pad = 0.1 * np.linalg.norm(hi - lo)
    return DomainPair("polyline", 2, {"path": str(path)}, _box(lo - pad, hi + pad),
                      classify, sampler, lambda x: _dist_to_segments(x, poly, nxt))


def load_obj(path):
    """Closed triangle mesh (OBJ 'v'/'f' subset); In1 is the enclosed volume."""
    V, F = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                V.append([float(t) for t in parts[1:4]])
            elif parts[0] == "f":
                F.append([int(t.split("/")[0]) - 1 for t in parts[1:4]])
    V, F = np.array(V), np.array(F, dtype=int)
    if len(F) == 0:
        raise GeometryError("mesh has no faces")
    T = V[F]

    def classify(x):
        # ray parity along a fixed irrational direction
        dirn = _unit([0.5772156649, 0.3183098861, 0.7071067811])
        e1, e2 = T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]
        pv = np.cross(dirn, e2)
        det = np.einsum("ij,ij->i", e1, pv)
        ok = np.abs(det) > 1e-14
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        count = np.zeros(len(x), dtype=int)
        for k in np.flatnonzero(ok):
            tv = x - T[k, 0]
            u = (tv @ pv[k]) * inv[k]
            q = np.cross(tv, e1[k])
            v = (q @ dirn) * inv[k]
            t = (q @ e2[k]) * inv[k]
            count += ((u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)).astype(int)
        return np.where(count % 2 == 1, IN1, IN2)

    area = 0.5 * np.linalg.norm(np.cross(T[:, 1] - T[:, 0], T[:, 2] - T[:, 0]), axis=1)

    def sampler(h, rng):
        pts, wts = [], []
        for tri, A in zip(T, area):
            m = max(1, int(np.ceil(A / (h * h))))
            r1, r2 = rng.uniform(size=(2, m))
            r1 = (np.arange(m) + r1) / m  # stratified along the first barycentric
            s = np.sqrt(r1)
            p = (1 - s)[:, None] * tri[0] + (s * (1 - r2))[:, None] * tri[1] + (s * r2)[:, None] * tri[2]
            pts.append(p)
            wts.append(np.full(m, A / m))
        return np.vstack(pts), np.concatenate(wts)

    lo, hi = V.min(0), V.max(0)
    pad = 0.1 * np.linalg.norm(hi - lo)
    return DomainPair("mesh", 3, {"path": str(path)}, _box(lo - pad, hi + pad),
                      classify, sampler, None)


# ---------------------------------------------------------------------------
# sampling and ADR


def sample_boundary(pair, h, seed=0, window=None):
    """Quasi-uniform weighted sample of the boundary with spacing about h.

    ``window=(center, radius)`` keeps only points inside that ball.
    """
    if h <= 0 or h >= pair.diam / 10:
        raise ConfigError(f"mesh scale h={h} outside (0, diam/10)")
    if pair._sampler is None:
        raise GeometryError(f"{pair.kind} pair has no boundary sampler")
    rng = np.random.default_rng(seed)
    if window is not None and "window" in inspect.signature(pair._sampler).parameters:
        pts, w = pair._sampler(h, rng, window=window)
    else:
        pts, w = pair._sampler(h, rng)
    if window is not None:
        c, rad = np.asarray(window[0], float), float(window[1])
        keep = np.linalg.norm(pts - c, axis=1) < rad
        pts, w = pts[keep], w[keep]
    if len(pts) == 0:
        raise GeometryError("empty boundary sample")
    sample = BoundarySample(np.ascontiguousarray(pts), np.asarray(w, float), float(h))
    sample.adr = estimate_adr_constants(sample, probes=200, seed=seed)
    return sample


def estimate_adr_constants(sample, probes=200, seed=0):
    """min/max of mu(B(x,r))/r^n over random centres and dyadic radii in [4h, diam/4]."""
    if probes < 1:
        raise ConfigError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = 4 * sample.h, sample.diam / 4
    if hi <= lo:
        return (np.nan, np.nan)
    jmin, jmax = int(np.ceil(-np.log2(hi))), int(np.floor(-np.log2(lo)))
    if jmax < jmin:
        radii = np.array([lo])
    else:
        radii = 2.0 ** -np.arange(jmin, jmax + 1)
    n = sample.n
    pts = sample.points
    plo, phi = pts.min(0), pts.max(0)
    axes = (phi - plo) > 4 * sample.h
    ratios = []
    for _ in range(probes):
        r = radii[rng.integers(len(radii))]
        # keep the probe ball away from the ends of an open sample
        ok = np.all((pts[:, axes] - r >= plo[axes]) & (pts[:, axes] + r <= phi[axes]), axis=1)
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            cand = np.arange(len(pts))
        i = cand[rng.integers(cand.size)]
        ratios.append(sample.mass(pts[i], r) / r ** n)
    return (float(min(ratios)), float(max(ratios)))
