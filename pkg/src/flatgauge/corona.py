"""Stopping-time trees over a dyadic lattice, their Lipschitz graphs, and the Top packing."""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .coefficients import PlaneParam, _tangent_frame, bbeta, bbeta_of_plane, beta, l2_plane
from .domains import IN1, IN2, NEITHER
from .errors import ConfigError, DecompositionFailure, GeometryError
from .lattice import _diameter, expanded_cube

DECIDE_STARTS = 2  # starts for the bbeta > eps decision on Stop candidates


@dataclass(frozen=True)
class CoronaParams:
    k1: float = 24.0
    eps: float = 0.01
    delta: float = 0.1
    slope_c: float = 2.0  # A is clamped to slope slope_c * delta
    tube_c: float = 0.5  # fiber tube radius max(tube_c * D_Q, 2h)
    multistarts: int = 8

    def __post_init__(self):
        if self.k1 <= 20:
            raise ConfigError("k1 must exceed 20")
        if not 0 < self.eps < self.delta < 1:
            raise ConfigError("need 0 < eps < delta < 1")


class CubeFlatness:
    """Cached bbeta(k1 P) per cube.

    The PCA plane gives an upper bound and the RMS residual a lower bound;
    the multistart search only runs when those two straddle eps.
    """

    def __init__(self, lattice, params=CoronaParams()):
        self.lattice = lattice
        self.params = params
        self._quick = {}
        self._best = {}
        self._decide = {}
        self._lock = threading.Lock()

    def radius(self, j):
        return self.params.k1 * 2.0 ** -j

    def quick(self, j, q):
        key = (j, q)
        hit = self._quick.get(key)
        if hit is not None:
            return hit
        s = self.lattice.sample
        x = s.points[self.lattice.centers[j][q]]
        r = self.radius(j)
        plane, lam, Y, w = l2_plane(s, x, r, centered=False)
        lower = float(np.sqrt(lam / w.sum())) / r
        Ys = Y[:: int(np.ceil(len(Y) / 3000))] if len(Y) > 3000 else Y
        upper = bbeta_of_plane(s, x, r, plane, Ys)
        val = (upper, lower, plane)
        with self._lock:
            self._quick[key] = val
        return val

    def _search(self, j, q, starts, cache):
        key = (j, q)
        hit = cache.get(key)
        if hit is not None:
            return hit
        s = self.lattice.sample
        x = s.points[self.lattice.centers[j][q]]
        val, plane = bbeta(s, x, self.radius(j), multistarts=starts, detail=True)
        upper, _, pca = self.quick(j, q)
        if upper < val:
            val, plane = upper, pca
        with self._lock:
            cache[key] = (float(val), plane)
        return cache[key]

    def best(self, j, q):
        """Full multistart search; used for the tree planes L_Q."""
        return self._search(j, q, self.params.multistarts, self._best)

    def _known(self, j, q):
        found = [self.quick(j, q)[::2]]
        for cache in (self._decide, self._best):
            if (j, q) in cache:
                found.append(cache[(j, q)])
        return min(found, key=lambda t: t[0])

    def value(self, j, q):
        """Best bbeta(k1 P) found so far without forcing a further search."""
        return self._known(j, q)[0]

    def exceeds(self, j, q):
        upper, lower, _ = self.quick(j, q)
        if upper <= self.params.eps:
            return False
        if lower > self.params.eps:
            return True
        if (j, q) in self._best:
            return self._best[(j, q)][0] > self.params.eps
        return self._search(j, q, DECIDE_STARTS, self._decide)[0] > self.params.eps

    def plane(self, j, q):
        return self._known(j, q)[1]


def best_plane(lattice, Q, k1=24.0, flat=None):
    """L_Q: multistart bbeta minimiser over B(x_Q, k1 l(Q)), seeded at the PCA plane."""
    if flat is None:
        flat = CubeFlatness(lattice, CoronaParams(k1=k1))
    return flat.best(*Q)[1]


def _frame(plane, x):
    """Origin on the plane under x, unit normal with nonnegative last coordinate, tangent basis."""
    u = plane.normal.copy()
    lead = u[-1] if abs(u[-1]) > 1e-14 else u[0]
    if lead < 0:
        u = -u
    p = x - float((x - plane.point) @ u) * u
    if len(u) == 2:
        E = np.array([[u[1], -u[0]]])
    else:
        E = np.array(_tangent_frame(u))
    for k in range(len(E)):
        if E[k][np.argmax(np.abs(E[k]))] < 0:
            E[k] = -E[k]
    return p, u, E


def _cube_any(lab, flag, count):
    return np.bincount(lab[flag], minlength=count) > 0


# ---------------------------------------------------------------------------
# tree records


@dataclass
class TreeRecord:
    lattice: object = field(repr=False)
    Q: tuple
    params: CoronaParams
    plane: PlaneParam
    origin: np.ndarray
    normal: np.ndarray
    frame: np.ndarray  # (n, d) tangent basis
    stop: dict  # (j, q) -> reason in {"a", "b", "c"}
    tree: set  # visited cubes, Stop cubes included
    flat: object = field(repr=False, default=None)
    _dq: list = field(default=None, repr=False)
    _grid: tuple = field(default=None, repr=False)
    _A: np.ndarray = field(default=None, repr=False)

    @property
    def ell(self):
        return 2.0 ** -self.Q[0]

    @property
    def x(self):
        return self.lattice.sample.points[self.lattice.centers[self.Q[0]][self.Q[1]]]

    def coords(self, pts):
        """(tangent, height) coordinates relative to L_Q."""
        Z = np.asarray(pts, float) - self.origin
        return Z @ self.frame.T, Z @ self.normal

    def lift(self, tang, height):
        tang = np.atleast_2d(tang)
        return self.origin + tang @ self.frame + np.asarray(height)[..., None] * self.normal

    def in_cylinder(self, pts):
        t, z = self.coords(pts)
        return (np.linalg.norm(t, axis=1) <= 10 * self.ell) & (np.abs(z) <= 10 * self.ell)

    def stop_cubes(self):
        return sorted(self.stop)

    def open_cubes(self):
        return sorted(self.tree - set(self.stop))

    def descendants_stop(self):
        """Stop(Q) cubes contained in Q."""
        jq, q = self.Q
        return [P for P in sorted(self.stop) if self.lattice.ancestor(P[0], P[1], jq) == q]

    # -- d_Q -----------------------------------------------------------------

    def _weights(self):
        """Sample indices covered by Tree(Q) and the diameter of the finest Tree cube holding each."""
        if self._dq is not None:
            return self._dq
        lat = self.lattice
        pts = lat.sample.points
        g = np.full(len(pts), np.inf)
        by_gen = {}
        for j, q in self.tree:
            by_gen.setdefault(j, []).append(q)
        for j in sorted(by_gen, reverse=True):
            for q in sorted(by_gen[j]):
                m = lat.members(j, q)
                free = np.isinf(g[m])
                if free.any():
                    g[m[free]] = _diameter(pts[m])
        idx = np.flatnonzero(np.isfinite(g))
        T, Z = self.coords(pts[idx])
        excess = np.maximum(np.abs(Z) - 10 * self.ell, 0.0)
        self._dq = (_WeightedNN(pts[idx], g[idx]), _WeightedNN(np.column_stack([T, excess]), g[idx]))
        return self._dq

    def d_Q(self, X):
        """inf over Tree cubes P of dist(x, P) + diam(P)."""
        return self._weights()[0].query(np.atleast_2d(np.asarray(X, float)))

    def D_Q(self, tang):
        """inf of d_Q over the fibre segment |height| <= 10 l above each tangent point.

        The distance from a point p to that segment is the Euclidean distance
        from (x', 0) to (tangent(p), max(|height(p)| - 10 l, 0)), so this is the
        same weighted nearest-point problem one dimension down.
        """
        tang = np.atleast_2d(np.asarray(tang, float))
        return self._weights()[1].query(np.column_stack([tang, np.zeros(len(tang))]))

    def grid(self):
        """Tangent grid over [-20 l, 20 l]^n with D_Q at the nodes."""
        if self._grid is not None:
            return self._grid
        n = len(self.frame)
        L = 20 * self.ell
        k = 801 if n == 1 else 81
        ax = np.linspace(-L, L, k)
        if n == 1:
            nodes = ax[:, None]
        else:
            a, b = np.meshgrid(ax, ax, indexing="ij")
            nodes = np.column_stack([a.ravel(), b.ravel()])
        self._grid = (ax, nodes, self.D_Q(nodes))
        return self._grid

    def _interp(self, vals, tang):
        ax, nodes, _ = self.grid()
        tang = np.atleast_2d(tang)
        if len(self.frame) == 1:
            return np.interp(tang[:, 0], ax, vals)
        k = len(ax)
        V = vals.reshape(k, k)
        h = ax[1] - ax[0]
        fx = np.clip((tang[:, 0] - ax[0]) / h, 0, k - 1 - 1e-9)
        fy = np.clip((tang[:, 1] - ax[0]) / h, 0, k - 1 - 1e-9)
        i, j = fx.astype(int), fy.astype(int)
        s, t = fx - i, fy - j
        return ((1 - s) * (1 - t) * V[i, j] + s * (1 - t) * V[i + 1, j]
                + (1 - s) * t * V[i, j + 1] + s * t * V[i + 1, j + 1])

    # -- graph A -------------------------------------------------------------

    def graph(self):
        if self._A is not None:
            return self._A
        s = self.lattice.sample
        ax, nodes, D = self.grid()
        ell = self.ell
        idx = s.ball(self.x, 35 * ell)
        T, Z = self.coords(s.points[idx])
        keep = np.abs(Z) <= 10 * ell
        T, Z, w = T[keep], Z[keep], s.weights[idx][keep]
        if len(Z) == 0:
            raise GeometryError("no sample points in the cylinder")
        rad = np.maximum(self.params.tube_c * D, 2 * s.h)
        tree = cKDTree(T)
        hits = tree.query_ball_point(nodes, rad)
        A = np.full(len(nodes), np.nan)
        for i, h in enumerate(hits):
            if h:
                A[i] = _weighted_median(Z[h], w[h])
        ok = np.isfinite(A)
        if not ok.any():
            raise GeometryError("all fibres empty")
        if not ok.all():
            _, near = cKDTree(nodes[ok]).query(nodes[~ok])
            A[~ok] = A[ok][near]
        self._occupied = ok
        self._A = _lipschitz_projection(nodes, A, self.params.slope_c * self.params.delta)
        return self._A

    def A(self, tang):
        return self._interp(self.graph(), tang)


class _WeightedNN:
    """min_i |x - p_i| + g_i, exact.

    Points are split into narrow bins of g; inside a bin the k nearest
    neighbours certify the answer once d_k + min(g) reaches the current best.
    """

    def __init__(self, pts, g, bins=16):
        self.groups = []
        if len(g) == 0:
            return
        order = np.argsort(g, kind="stable")
        edges = np.unique(np.quantile(g, np.linspace(0, 1, bins + 1)))
        lab = np.clip(np.searchsorted(edges, g[order], side="right") - 1, 0, max(len(edges) - 2, 0))
        for b in np.unique(lab):
            sel = order[lab == b]
            self.groups.append((cKDTree(pts[sel]), g[sel], float(g[sel].min())))

    def query(self, X):
        best = np.full(len(X), np.inf)
        for tree, gv, gmin in self.groups:
            d0, i0 = tree.query(X)
            best = np.minimum(best, d0 + gv[i0])
            rows = np.flatnonzero(d0 + gmin < best)
            k = 8
            while len(rows) and tree.n > 1:
                kk = min(k, tree.n)
                d, i = tree.query(X[rows], k=kk)
                best[rows] = np.minimum(best[rows], (d + gv[i]).min(axis=1))
                if kk == tree.n:
                    break
                rows = rows[d[:, -1] + gmin < best[rows]]
                k *= 8
        return best


def _inf_convolve(nodes, vals, slope=1.0, chunk=512):
    """min_j vals_j + slope |x_i - x_j| over all node pairs."""
    out = np.empty(len(nodes))
    for s in range(0, len(nodes), chunk):
        d = np.linalg.norm(nodes[s:s + chunk, None, :] - nodes[None, :, :], axis=2)
        out[s:s + chunk] = np.min(vals[None, :] + slope * d, axis=1)
    return out


def _sup_convolve(nodes, vals, slope, chunk=512):
    return -_inf_convolve(nodes, -vals, slope, chunk)


def _lipschitz_projection(nodes, vals, slope):
    """Midpoint of the largest slope-Lipschitz minorant and the smallest majorant."""
    U = _inf_convolve(nodes, vals, slope)
    L = _sup_convolve(nodes, vals, slope)
    return 0.5 * (U + L)


def _weighted_median(z, w):
    o = np.argsort(z, kind="stable")
    c = np.cumsum(w[o])
    return float(z[o][np.searchsorted(c, 0.5 * c[-1])])


# ---------------------------------------------------------------------------
# stopping scan


def _contained(lattice, j, mask):
    """Cubes of generation j all of whose points satisfy mask."""
    lab = lattice.label[j]
    cnt = lattice.count(j)
    tot = np.bincount(lab, minlength=cnt)
    inside = np.bincount(lab[mask], minlength=cnt)
    return (tot > 0) & (inside == tot)


def tree_record(lattice, Q, params=CoronaParams(), flat=None, max_gen=None):
    """Stop(Q) and Tree(Q) by a top-down scan over cubes contained in k1 Q."""
    if flat is None:
        flat = CubeFlatness(lattice, params)
    jq, q = Q
    if not lattice.j0 <= jq <= lattice.j_max:
        raise ConfigError(f"cube generation {jq} outside the lattice")
    max_gen = lattice.j_max if max_gen is None else min(max_gen, lattice.j_max)
    s = lattice.sample
    plane = flat.best(jq, q)[1]
    x = s.points[lattice.centers[jq][q]]
    origin, normal, E = _frame(plane, x)
    rec = TreeRecord(lattice, (jq, q), params, plane, origin, normal, E, {}, set(), flat)
    mask = np.zeros(len(s.points), dtype=bool)
    mask[expanded_cube(lattice, jq, q, params.k1)] = True
    inC = np.zeros(len(s.points), dtype=bool)
    region = np.flatnonzero(mask)
    inC[region] = rec.in_cylinder(s.points[region])
    opened = None
    for j in range(jq, max_gen + 1):
        cont = _contained(lattice, j, mask)
        if j == jq:
            cand = np.flatnonzero(cont)
        else:
            par = lattice.parent[j]
            par_cont = _contained(lattice, j - 1, mask)
            ok = cont & (~par_cont[par] | np.isin(par, opened))
            cand = np.flatnonzero(ok)
        touches = _cube_any(lattice.label[j], inC, lattice.count(j))
        new_open = []
        for p in cand:
            P = (j, int(p))
            rec.tree.add(P)
            if P == (jq, q):
                new_open.append(p)
            elif not touches[p]:
                rec.stop[P] = "a"
            elif flat.exceeds(j, p):
                rec.stop[P] = "b"
            elif flat.plane(j, p).angle_to(plane) > params.delta:
                rec.stop[P] = "c"
            else:
                new_open.append(p)
        opened = np.asarray(new_open, dtype=np.int64)
    return rec


def stopping_children(lattice, Q, eps=0.01, delta=0.1, k1=24.0):
    rec = tree_record(lattice, Q, CoronaParams(k1=k1, eps=eps, delta=delta))
    return rec.stop_cubes()


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class SandwichReport:
    C2: float
    upper_violations: int
    n: int


def sandwich_check(rec, n=1000, seed=0):
    """C_2 with C_2^-1 d_Q <= D_Q <= d_Q on boundary points of 20 B_Q inside the cylinder height."""
    s = rec.lattice.sample
    idx = s.ball(rec.x, 20 * rec.ell)
    idx = idx[np.abs(rec.coords(s.points[idx])[1]) <= 10 * rec.ell]
    rng = np.random.default_rng(seed)
    if len(idx) > n:
        idx = np.sort(rng.choice(idx, n, replace=False))
    P = s.points[idx]
    d = rec.d_Q(P)
    D = rec.D_Q(rec.coords(P)[0])
    pos = D > 0
    C2 = float(np.max(d[pos] / D[pos])) if pos.any() else np.nan
    return SandwichReport(C2, int(np.sum(D > d * (1 + 1e-12) + 1e-15)), len(idx))


@dataclass
class GraphReport:
    C1: float
    violation_fraction: float
    max_slope: float
    n: int


def graph_approx_check(rec):
    """Residual |height - A| against C_1 eps max(d_Q, 2 * 2^-j_max), calibrated on even points."""
    s = rec.lattice.sample
    idx = s.ball(rec.x, 20 * rec.ell)
    P = s.points[idx]
    T, Z = rec.coords(P)
    res = np.abs(Z - rec.A(T))
    floor = 2 * 2.0 ** -rec.lattice.j_max
    ratio = res / (rec.params.eps * np.maximum(rec.d_Q(P), floor))
    C1 = float(np.max(ratio[0::2])) if len(ratio) else np.nan
    odd = ratio[1::2]
    frac = float(np.mean(odd > C1)) if len(odd) else 0.0
    return GraphReport(C1, frac, graph_slope(rec), len(idx))


def graph_slope(rec):
    """Largest discrete slope of A between grid neighbours."""
    ax, nodes, _ = rec.grid()
    A = rec.graph()
    h = ax[1] - ax[0]
    if len(rec.frame) == 1:
        return float(np.max(np.abs(np.diff(A))) / h)
    V = A.reshape(len(ax), len(ax))
    return float(max(np.max(np.abs(np.diff(V, axis=0))), np.max(np.abs(np.diff(V, axis=1)))) / h)


@dataclass
class SubdomainReport:
    label_plus: int
    label_minus: int
    purity_plus: float
    purity_minus: float
    violations: int
    sep_violation_fraction: float
    inradius_plus: float
    inradius_minus: float


def subdomains(rec, pair, n=1000, seed=0, max_draws=200000):
    """Sample the graph subdomains above/below A +- delta D_Q inside C(Q) and vote their sides."""
    ell, delta = rec.ell, rec.params.delta
    dim = len(rec.normal)
    rng = np.random.default_rng(seed)
    sides = {1: [], -1: []}
    drawn = 0
    while min(len(sides[1]), len(sides[-1])) < n and drawn < max_draws:
        m = 4 * n
        T = rng.uniform(-10 * ell, 10 * ell, size=(m, dim - 1))
        T = T[np.linalg.norm(T, axis=1) <= 10 * ell]
        Z = rng.uniform(-10 * ell, 10 * ell, size=len(T))
        drawn += m
        base = rec.A(T)
        width = delta * rec.D_Q(T)
        for sg, sel in ((1, Z > base + width), (-1, Z < base - width)):
            for t, z in zip(T[sel], Z[sel]):
                if len(sides[sg]) < n:
                    sides[sg].append((t, z))
    if min(len(sides[1]), len(sides[-1])) < n:
        raise DecompositionFailure("a graph subdomain is too thin to sample")
    out = {}
    for sg in (1, -1):
        T = np.array([t for t, _ in sides[sg]])
        Z = np.array([z for _, z in sides[sg]])
        X = rec.lift(T, Z)
        lab = np.asarray(pair.classify(X))
        counts = np.array([np.sum(lab == c) for c in (NEITHER, IN1, IN2)])
        major = int(np.argmax(counts))
        purity = counts[major] / len(lab)
        dist = rec.lattice.sample.tree.query(X)[0]
        D = rec.D_Q(T)
        sep = float(np.mean(dist + rec.lattice.sample.h < 0.5 * delta * D))
        out[sg] = (major, purity, len(lab) - counts[major], sep, _inradius(rec, T, Z, sg))
    (lp, pp, vp, sp, rp), (lm, pm, vm, sm, rm) = out[1], out[-1]
    if lp == NEITHER or lm == NEITHER or lp == lm or min(pp, pm) < 0.99:
        raise DecompositionFailure(f"side vote failed: labels ({lp}, {lm}), purity ({pp:.3f}, {pm:.3f})")
    return SubdomainReport(lp, lm, float(pp), float(pm), int(vp + vm), 0.5 * (sp + sm), rp, rm)


def _inradius(rec, T, Z, sg):
    ax, nodes, D = rec.grid()
    ell = rec.ell
    A = rec.graph()
    surf = np.column_stack([nodes, A + sg * rec.params.delta * D])
    keep = np.linalg.norm(nodes, axis=1) <= 11 * ell
    surf = surf[keep]
    # every point of the piecewise-linear surface lies this close to a node
    h = ax[1] - ax[0]
    tilt = rec.params.slope_c * rec.params.delta + rec.params.delta
    slack = 0.5 * h * np.sqrt(len(rec.frame)) * np.sqrt(1 + tilt * tilt)
    d_surf = cKDTree(surf).query(np.column_stack([T, Z]))[0] - slack
    d_wall = 10 * ell - np.linalg.norm(T, axis=1)
    d_cap = 10 * ell - np.abs(Z)
    return float(np.max(np.minimum(d_surf, np.minimum(d_wall, d_cap))))


@dataclass
class PackReport:
    sigma_Q: float
    sigma_Z: float
    stop_b_mass: float
    beta1_sum: float
    C3: float

    @property
    def rhs_without_beta(self):
        return 2 * self.sigma_Z + 2 * self.stop_b_mass


def packing_report(rec):
    lat = rec.lattice
    s = lat.sample
    jq, q = rec.Q
    m = lat.members(jq, q)
    sig_Q = float(s.weights[m].sum())
    floor = 2 * 2.0 ** -lat.j_max
    z = rec.d_Q(s.points[m]) <= floor
    sig_Z = float(s.weights[m][z].sum())
    stop_b = 0.0
    for (j, p) in rec.descendants_stop():
        if rec.flat.exceeds(j, p):
            stop_b += float(s.weights[lat.members(j, p)].sum())
    bsum = 0.0
    for (j, p) in sorted(rec.tree):
        if lat.ancestor(j, p, jq) != q:
            continue
        x = s.points[lat.centers[j][p]]
        b1 = beta(s, x, rec.params.k1 * 2.0 ** -j, p=1)
        bsum += b1 * b1 * float(s.weights[lat.members(j, p)].sum())
    num = sig_Q - 2 * sig_Z - 2 * stop_b
    if num <= 0:
        C3 = 0.0
    else:
        C3 = num / bsum if bsum > 0 else np.inf
    return PackReport(sig_Q, sig_Z, stop_b, bsum, float(C3))


# ---------------------------------------------------------------------------
# Top


@dataclass
class CoronaForest:
    root: tuple
    top: list  # top[k] = sorted list of cubes in Top_k
    next: dict  # cube -> list of cubes in Next(cube)
    in_b: dict  # cube -> bbeta(k1 Q) > eps
    records: dict  # cube -> TreeRecord, for cubes outside B(eps)
    flat: object = field(repr=False)
    packing: float = 0.0

    def rows(self):
        """(id, bbeta_k1, plane_angle, n_stop, n_tree, sigma_Z, packing_contribution)."""
        lat = self.flat.lattice
        s = lat.sample
        total = float(s.weights[lat.members(*self.root)].sum())
        for k, level in enumerate(self.top):
            for Q in level:
                j, q = Q
                val = self.flat.value(j, q)
                plane = self.flat.plane(j, q)
                ang = float(np.arccos(min(1.0, abs(plane.normal[-1]))))
                sig = float(s.weights[lat.members(j, q)].sum())
                rec = self.records.get(Q)
                if rec is not None:
                    m = lat.members(j, q)
                    zmass = float(s.weights[m][rec.d_Q(s.points[m]) <= 2 * 2.0 ** -lat.j_max].sum())
                    yield (f"{j}:{q}", k, val, ang, len(rec.stop), len(rec.tree), zmass, sig / total)
                else:
                    yield (f"{j}:{q}", k, val, ang, 0, 0, float("nan"), sig / total)


def build_top(lattice, R0, params=CoronaParams(), depth=8, threads=1, flat=None):
    """Top_0 = {R0}; Top_{k+1} = union of Next(Q) for Q in Top_k."""
    jr, r = R0
    if depth > lattice.j_max - jr:
        raise ConfigError(f"depth {depth} exceeds j_max - j(R0) = {lattice.j_max - jr}")
    if flat is None:
        flat = CubeFlatness(lattice, params)
    top = [[(jr, r)]]
    nxt, in_b, records = {}, {}, {}
    max_gen = jr + depth

    def expand(Q):
        j, q = Q
        b = flat.exceeds(j, q)
        if b:
            return Q, True, None, [(j + 1, int(c)) for c in lattice.children(j, q)]
        rec = tree_record(lattice, Q, params, flat, max_gen=max_gen)
        out = []
        for (jp, p) in rec.descendants_stop():
            out.extend((jp + 1, int(c)) for c in lattice.children(jp, p))
        return Q, False, rec, out

    for k in range(depth):
        level = top[-1]
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                results = list(ex.map(expand, level))
        else:
            results = [expand(Q) for Q in level]
        new = []
        for Q, b, rec, out in results:
            in_b[Q] = b
            nxt[Q] = sorted(c for c in out if c[0] <= max_gen)
            if rec is not None:
                records[Q] = rec
            new.extend(nxt[Q])
        if not new:
            break
        top.append(sorted(set(new)))
    for Q in top[-1]:
        if Q not in in_b:
            in_b[Q] = flat.exceeds(*Q)
    s = lattice.sample
    total = float(s.weights[lattice.members(jr, r)].sum())
    packing = sum(float(s.weights[lattice.members(*Q)].sum()) for level in top for Q in level) / total
    return CoronaForest((jr, r), top, nxt, in_b, records, flat, packing)


def cube_at(lattice, x, j):
    """Generation-j cube containing the sample point nearest x."""
    i = int(lattice.sample.tree.query(np.asarray(x, float))[1])
    return (j, int(lattice.label[j][i]))


__all__ = ["CoronaParams", "CubeFlatness", "best_plane", "TreeRecord", "tree_record", "stopping_children",
           "sandwich_check", "graph_approx_check", "graph_slope", "subdomains", "packing_report",
           "CoronaForest", "build_top", "cube_at", "IN1", "IN2"]
