"""David-Semmes style dyadic cubes built from nested nets over a boundary sample."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from .errors import ConfigError


def net_radius(j):
    """Separation of the generation-j net; chains of parents then stay inside B(x_Q, 2^-j)."""
    return 2.0 ** (-j - 1)


def _greedy_extend(points, net, order, rho):
    """Extend `net` (indices) greedily by points of `order` at distance >= rho from it."""
    d = len(points[0])
    keys = {}
    inv = 1.0 / rho

    def key(p):
        return tuple(np.floor(p * inv).astype(np.int64))

    for i in net:
        keys.setdefault(key(points[i]), []).append(i)
    if net:
        dist, _ = cKDTree(points[net]).query(points[order], distance_upper_bound=rho)
        cand = order[dist >= rho]
    else:
        cand = order
    offsets = np.array(np.meshgrid(*[[-1, 0, 1]] * d)).reshape(d, -1).T
    out = list(net)
    rho2 = rho * rho
    for i in cand:
        p = points[i]
        k = np.floor(p * inv).astype(np.int64)
        ok = True
        for off in offsets:
            for q in keys.get(tuple(k + off), ()):
                diff = points[q] - p
                if diff @ diff < rho2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            keys.setdefault(tuple(k), []).append(i)
            out.append(i)
    return out


@dataclass
class DyadicCube:
    j: int
    id: int  # index within generation j
    members: np.ndarray
    center: int  # sample index of x_Q
    x: np.ndarray
    side: float
    mass: float
    parent: int  # index in generation j - 1, -1 at the root
    children: np.ndarray


@dataclass
class DyadicLattice:
    j0: int
    j_max: int
    label: dict  # j -> (N,) cube index of each sample point
    centers: dict  # j -> sample index of x_Q per cube
    parent: dict  # j -> parent cube index in generation j - 1
    sample: object = field(repr=False)
    _members: dict = field(default_factory=dict, repr=False)

    @property
    def generations(self):
        return range(self.j0, self.j_max + 1)

    def count(self, j):
        return len(self.centers[j])

    def side(self, j):
        return 2.0 ** -j

    def members(self, j, q):
        if j not in self._members:
            lab = self.label[j]
            order = np.argsort(lab, kind="stable")
            bounds = np.searchsorted(lab[order], np.arange(self.count(j) + 1))
            self._members[j] = (order, bounds)
        order, bounds = self._members[j]
        return order[bounds[q]:bounds[q + 1]]

    def masses(self, j):
        return np.bincount(self.label[j], weights=self.sample.weights, minlength=self.count(j))

    def children(self, j, q):
        if j >= self.j_max:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.parent[j + 1] == q)

    def cube(self, j, q):
        m = self.members(j, q)
        c = int(self.centers[j][q])
        par = int(self.parent[j][q]) if j > self.j0 else -1
        return DyadicCube(j, q, m, c, self.sample.points[c], 2.0 ** -j,
                          float(self.sample.weights[m].sum()), par, self.children(j, q))

    def cubes(self, j):
        return [self.cube(j, q) for q in range(self.count(j))]

    def ancestor(self, j, q, k):
        """Index of the generation-k ancestor of cube (j, q), k <= j."""
        while j > k:
            q = int(self.parent[j][q])
            j -= 1
        return q

    def rows(self):
        """(id, j, x_Q..., side, mass, parent) rows in generation order."""
        for j in self.generations:
            mass = self.masses(j)
            for q in range(self.count(j)):
                par = int(self.parent[j][q]) if j > self.j0 else -1
                yield (f"{j}:{q}", j, *self.sample.points[self.centers[j][q]], 2.0 ** -j, mass[q],
                       f"{j - 1}:{par}" if par >= 0 else "")


def root_generation(sample):
    """Largest j whose net radius already covers the whole sample, so generation j is one cube."""
    diam = sample.diam
    return int(np.floor(-np.log2(max(diam, 1e-300)))) - 1


def build_lattice(sample, j_max, seed=0):
    if 2.0 ** -j_max < 4 * sample.h:
        raise ConfigError(f"j_max={j_max} too deep for mesh scale h={sample.h}")
    pts = sample.points
    j0 = root_generation(sample)
    if j0 > j_max:
        raise ConfigError("j_max is coarser than the root generation")
    order = np.random.default_rng(seed).permutation(len(pts))
    nets = {}
    net = [int(order[0])]
    nets[j0] = net
    for j in range(j0 + 1, j_max + 1):
        net = _greedy_extend(pts, net, order, net_radius(j))
        nets[j] = net
    # nearest-parent assignment: finest net from the points, then net to net
    label, centers, parent = {}, {}, {}
    for j in range(j0, j_max + 1):
        centers[j] = np.asarray(nets[j], dtype=np.int64)
    label[j_max] = _nearest(pts[centers[j_max]], pts)
    for j in range(j_max, j0, -1):
        parent[j] = _nearest(pts[centers[j - 1]], pts[centers[j]])
        label[j - 1] = parent[j][label[j]]
    return DyadicLattice(j0, j_max, label, centers, parent, sample)


def _nearest(ref, q):
    """Nearest reference index for each query; ties go to the lowest index."""
    tree = cKDTree(ref)
    k = min(4, len(ref))
    d, i = tree.query(q, k=k)
    d = np.atleast_2d(d.T).T if k == 1 else d
    i = np.atleast_2d(i.T).T if k == 1 else i
    if k == 1:
        return i[:, 0].astype(np.int64)
    tie = np.isclose(d, d[:, :1], rtol=0, atol=1e-15)
    cand = np.where(tie, i, np.iinfo(np.int64).max)
    return cand.min(axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# checks


def _diameter(P):
    if len(P) < 2:
        return 0.0
    if len(P) > 2000:
        try:
            P = P[ConvexHull(P, qhull_options="QJ").vertices]
        except QhullError:
            pass
    if len(P) > 4000:
        P = P[np.linspace(0, len(P) - 1, 4000).astype(int)]
    return float(pdist(P).max())


def cube_ball(lattice, j, q, c1=None):
    """(B(Q), B_Q) as (center, radius) pairs; c1=None picks the largest 2^-k ball inside Q."""
    x = lattice.sample.points[lattice.centers[j][q]]
    ell = 2.0 ** -j
    if c1 is None:
        c1 = adaptive_c1(lattice, j, q)
    return (x, c1 * ell), (x, ell)


def adaptive_c1(lattice, j, q, kmax=20):
    x = lattice.sample.points[lattice.centers[j][q]]
    lab = lattice.label[j]
    ell = 2.0 ** -j
    for k in range(kmax + 1):
        c = 2.0 ** -k
        idx = lattice.sample.ball(x, c * ell)
        if np.all(lab[idx] == q):
            return c
    return 0.0


def expanded_cube(lattice, j, q, lam):
    """Indices of sample points within (lam - 1) * l(Q) of Q."""
    m = lattice.members(j, q)
    pts = lattice.sample.points
    x = pts[lattice.centers[j][q]]
    ell = 2.0 ** -j
    cand = lattice.sample.ball(x, ell + (lam - 1) * ell + 1e-12)
    d, _ = cKDTree(pts[m]).query(pts[cand])
    return cand[d <= (lam - 1) * ell]


def collar_fractions(lattice, j, taus):
    """Mass fraction of generation-j cubes lying within tau * 2^-j of another cube."""
    pts, w = lattice.sample.points, lattice.sample.weights
    lab = lattice.label[j]
    ell = 2.0 ** -j
    reach = max(taus) * ell
    dout = np.full(len(pts), np.inf)
    for q in range(lattice.count(j)):
        m = lattice.members(j, q)
        x = pts[lattice.centers[j][q]]
        cand = lattice.sample.ball(x, ell + reach)
        cand = cand[lab[cand] != q]
        if len(cand):
            dout[m] = cKDTree(pts[cand]).query(pts[m], distance_upper_bound=reach)[0]
    total = w.sum()
    return np.array([w[dout <= t * ell].sum() / total for t in taus])


@dataclass
class LatticeReport:
    partition_ok: bool
    nesting_ok: bool
    center_in_cube: bool
    diam_constant: float  # max diam(Q) / l(Q)
    diam_lower: float  # min diam(Q) / l(Q) over cubes with >= 2 points
    separation_constant: float  # min dist(x_Q, sample minus Q) / l(Q)
    mass_ratio: dict  # j -> array of sigma(Q) / l(Q)^n
    mass_envelope: tuple
    mass_fraction_in_envelope: float
    collar_taus: np.ndarray
    collar_fraction: np.ndarray
    collar_exponent: float
    counts: dict


def check_lattice(lattice, sample=None, collar_generations=None):
    sample = lattice.sample if sample is None else sample
    pts = sample.points
    N = len(pts)
    n = sample.n
    part = True
    nest = True
    cin = True
    dmax, dmin, sep = 0.0, np.inf, np.inf
    ratios = {}
    tree = sample.tree
    for j in lattice.generations:
        lab = lattice.label[j]
        part &= lab.shape == (N,) and lab.min() >= 0 and lab.max() < lattice.count(j)
        part &= np.bincount(lab, minlength=lattice.count(j)).sum() == N
        part &= bool(np.all(np.bincount(lab, minlength=lattice.count(j)) > 0))
        if j > lattice.j0:
            nest &= bool(np.array_equal(lattice.parent[j][lab], lattice.label[j - 1]))
        ell = 2.0 ** -j
        cin &= bool(np.all(lab[lattice.centers[j]] == np.arange(lattice.count(j))))
        for q in range(lattice.count(j)):
            m = lattice.members(j, q)
            if len(m) >= 2:
                dq = _diameter(pts[m]) / ell
                dmax = max(dmax, dq)
                dmin = min(dmin, dq)
        # distance from x_Q to the nearest point of another cube
        for q in range(lattice.count(j)):
            c = lattice.centers[j][q]
            k = 16
            while True:
                d, i = tree.query(pts[c], k=min(k, N))
                other = lab[np.atleast_1d(i)] != q
                if other.any():
                    sep = min(sep, float(np.atleast_1d(d)[other][0]) / ell)
                    break
                if k >= N:
                    break
                k *= 4
        ratios[j] = lattice.masses(j) / ell ** n
    lo, hi = sample.adr
    env = (lo / 8 ** n, hi * 2 ** n)
    allr = np.concatenate(list(ratios.values()))
    inside = float(np.mean((allr >= env[0]) & (allr <= env[1]))) if np.all(np.isfinite(env)) else np.nan
    taus = 2.0 ** -np.arange(1, 6)
    gens = collar_generations
    if gens is None:
        gens = [j for j in lattice.generations if lattice.count(j) >= 4]
    if gens:
        fr = np.mean([collar_fractions(lattice, j, taus) for j in gens], axis=0)
        good = fr > 0
        expo = float(np.polyfit(np.log(taus[good]), np.log(fr[good]), 1)[0]) if good.sum() >= 2 else np.nan
    else:
        fr, expo = np.full(len(taus), np.nan), np.nan
    return LatticeReport(bool(part), bool(nest), cin, dmax, dmin if np.isfinite(dmin) else np.nan, sep,
                         ratios, env, inside, taus, fr, expo,
                         {j: lattice.count(j) for j in lattice.generations})
