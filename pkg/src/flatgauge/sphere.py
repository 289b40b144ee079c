"""Quadrature and FEM grids on S^1 / S^2 and spherical traces of a domain pair."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .domains import IN1, IN2, NEITHER
from .errors import ResourceError

BISECT_STEPS = 45


@dataclass(frozen=True, eq=False)
class SphereGrid:
    dim: int
    level: int
    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray  # (E, 2) node pairs
    faces: np.ndarray | None = None  # (F, 3) for S^2
    # per-corner subsample data for straddling cells (S^2 only)
    corner_node: np.ndarray | None = field(default=None, repr=False)
    corner_pts: np.ndarray | None = field(default=None, repr=False)
    corner_w: np.ndarray | None = field(default=None, repr=False)

    @property
    def resolution(self):
        return len(self.nodes)

    @property
    def total(self):
        return 2 * np.pi if self.dim == 1 else 4 * np.pi

    @property
    def spacing(self):
        if self.dim == 1:
            return 2 * np.pi / len(self.nodes)
        e = self.nodes[self.edges[:, 0]] - self.nodes[self.edges[:, 1]]
        return float(np.mean(np.linalg.norm(e, axis=1)))

    @property
    def angles(self):
        return np.arctan2(self.nodes[:, 1], self.nodes[:, 0]) % (2 * np.pi)


_T = (1 + 5 ** 0.5) / 2
_ICO_V = np.array([(-1, _T, 0), (1, _T, 0), (-1, -_T, 0), (1, -_T, 0), (0, -1, _T), (0, 1, _T),
                   (0, -1, -_T), (0, 1, -_T), (_T, 0, -1), (_T, 0, 1), (-_T, 0, -1), (-_T, 0, 1)],
                  dtype=float)
_ICO_F = np.array([(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
                   (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
                   (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)])


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _unique_edges(F):
    e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def icosphere(level):
    V = _normalize(_ICO_V)
    F = _ICO_F.copy()
    for _ in range(level):
        e = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        es = np.sort(e, axis=1)
        uniq, inv = np.unique(es, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        mid = _normalize(V[uniq[:, 0]] + V[uniq[:, 1]])
        base = len(V)
        V = np.vstack([V, mid])
        nF = len(F)
        a, b, c = F[:, 0], F[:, 1], F[:, 2]
        ab, bc, ca = base + inv[:nF], base + inv[nF:2 * nF], base + inv[2 * nF:]
        F = np.vstack([np.column_stack([a, ab, ca]), np.column_stack([ab, b, bc]),
                       np.column_stack([ca, bc, c]), np.column_stack([ab, bc, ca])])
    return V, F


def spherical_triangle_area(a, b, c):
    """Van Oosterom-Strackee solid angle of unit-vector triangles."""
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2 * np.arctan2(num, den)


@lru_cache(maxsize=16)
def build_grid(n, level):
    if n not in (1, 2) or level < 0:
        raise ValueError("n must be 1 or 2 and level >= 0")
    if n == 1:
        N = 2 ** (level + 6)
        if N > 10 ** 7:
            raise ResourceError("grid too large")
        th = (np.arange(N) + 0.5) * 2 * np.pi / N
        nodes = np.column_stack([np.cos(th), np.sin(th)])
        edges = np.column_stack([np.arange(N), (np.arange(N) + 1) % N])
        return SphereGrid(1, level, nodes, np.full(N, 2 * np.pi / N), edges)
    if 10 * 4 ** level + 2 > 10 ** 7:
        raise ResourceError("grid too large")
    V, F = icosphere(level)
    A = spherical_triangle_area(V[F[:, 0]], V[F[:, 1]], V[F[:, 2]])
    w = np.bincount(F.ravel(), weights=np.repeat(A / 3, 3), minlength=len(V))
    # corner quads (node, edge midpoint, centroid, edge midpoint), 4 points each
    # in a rotated-grid pattern: off the diagonal S = T, so mirror-symmetric
    # cells never put a subsample exactly on a symmetry plane
    # weighted by the bilinear Jacobian so each quad keeps a third of its triangle
    cn, cp, cw = [], [], []
    cen = V[F].mean(axis=1)
    S = np.array([0.375, 0.875, 0.625, 0.125])
    Tt = np.array([0.125, 0.375, 0.875, 0.625])
    for c in range(3):
        i, j, k = F[:, c], F[:, (c + 1) % 3], F[:, (c + 2) % 3]
        p0, p1, p3 = V[i], 0.5 * (V[i] + V[j]), 0.5 * (V[i] + V[k])
        q = ((1 - S) * (1 - Tt))[None, :, None] * p0[:, None] + (S * (1 - Tt))[None, :, None] * p1[:, None] \
            + (S * Tt)[None, :, None] * cen[:, None] + ((1 - S) * Tt)[None, :, None] * p3[:, None]
        dS = ((1 - Tt)[None, :, None] * (p1 - p0)[:, None] + Tt[None, :, None] * (cen - p3)[:, None])
        dT = ((1 - S)[None, :, None] * (p3 - p0)[:, None] + S[None, :, None] * (cen - p1)[:, None])
        J = np.linalg.norm(np.cross(dS, dT), axis=2)
        cn.append(i)
        cp.append(_normalize(q))
        cw.append((A / 3)[:, None] * J / J.sum(axis=1, keepdims=True))
    return SphereGrid(2, level, V, w, _unique_edges(F), F,
                      np.concatenate(cn), np.concatenate(cp), np.concatenate(cw))


# ---------------------------------------------------------------------------
# traces


@dataclass(eq=False)
class Trace:
    """Labels of S(x, r) seen through the pair oracle, with straddle refinement."""
    grid: SphereGrid
    labels: np.ndarray
    straddle: np.ndarray
    qp: np.ndarray  # quadrature points (unit vectors)
    qw: np.ndarray
    ql: np.ndarray
    oracle: object = field(repr=False)
    arcs: dict | None = None  # S^1 only: side -> (k, 2) array of [start, end]
    _cross: dict = field(default_factory=dict, repr=False)

    def crossings(self, side):
        """Edges leaving `side`: (inside node, outside node, fraction from inside)."""
        if side in self._cross:
            return self._cross[side]
        g = self.grid
        m = self.labels == side
        e = g.edges
        cut = m[e[:, 0]] != m[e[:, 1]]
        a, b = e[cut, 0], e[cut, 1]
        flip = ~m[a]
        p = np.where(flip, b, a)
        q = np.where(flip, a, b)
        P, Q = g.nodes[p], g.nodes[q]
        lo, hi = np.zeros(len(p)), np.ones(len(p))
        for _ in range(BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            pts = _normalize((1 - mid)[:, None] * P + mid[:, None] * Q)
            ok = self.oracle(pts) == side
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out = (p, q, 0.5 * (lo + hi))
        self._cross[side] = out
        return out


@dataclass(eq=False)
class RegionMask:
    grid: SphereGrid
    member: np.ndarray
    frac: np.ndarray
    straddle: np.ndarray
    side: int = 0
    trace: Trace | None = None

    @classmethod
    def from_nodes(cls, grid, member):
        member = np.asarray(member, dtype=bool)
        return cls(grid, member, member.astype(float), np.zeros_like(member))

    @property
    def empty(self):
        if self.trace is not None and self.trace.arcs is not None:
            return len(self.trace.arcs[self.side]) == 0
        return not np.any(self.frac > 0)

    def arcs(self):
        """Maximal arcs on S^1 as (start, end) angle pairs."""
        if self.grid.dim != 1:
            raise ValueError("arcs only exist on S^1")
        if self.trace is not None and self.trace.arcs is not None:
            return self.trace.arcs[self.side]
        return _node_runs(self.grid, self.member)


def _node_runs(grid, member):
    N = len(member)
    d = 2 * np.pi / N
    if member.all():
        return np.array([[0.0, 2 * np.pi]])
    if not member.any():
        return np.zeros((0, 2))
    start = np.flatnonzero(member & ~np.roll(member, 1))
    out = []
    for s in start:
        k = s
        while member[k % N]:
            k += 1
        th0 = (s + 0.5) * d - d / 2
        out.append([th0, th0 + (k - s) * d])
    return np.array(out)


def _circle_oracle(pair, x, r):
    x = np.asarray(x, float)

    def f(w):
        return pair.classify(x + r * w)
    return f


def _s1_arcs(labels, oracle, N):
    d = 2 * np.pi / N
    th = (np.arange(N) + 0.5) * d
    arcs = {IN1: [], IN2: []}
    trans = np.flatnonzero(labels != np.roll(labels, -1))
    if trans.size == 0:
        if labels[0] != NEITHER:
            arcs[int(labels[0])].append([0.0, 2 * np.pi])
        return {k: np.array(v).reshape(-1, 2) for k, v in arcs.items()}

    A = labels[trans]
    B = labels[(trans + 1) % N]
    a0 = th[trans]

    def pt(t):
        return np.column_stack([np.cos(t), np.sin(t)])

    # right end of the A-run and left end of the B-run inside each cell pair
    lo, hi = a0.copy(), a0 + d
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        ok = oracle(pt(mid)) == A
        lo, hi = np.where(ok, mid, lo), np.where(ok, hi, mid)
    endA = 0.5 * (lo + hi)
    lo, hi = a0 + d, a0.copy()
    for _ in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        ok = oracle(pt(mid)) == B
        lo, hi = np.where(ok, mid, lo), np.where(ok, hi, mid)
    startB = 0.5 * (lo + hi)

    T = len(trans)
    for k in range(T):
        lab = int(B[k])
        if lab == NEITHER:
            continue
        nxt = (k + 1) % T
        s, e = startB[k], endA[nxt]
        if nxt <= k:
            e += 2 * np.pi
        arcs[lab].append([s % (2 * np.pi), s % (2 * np.pi) + (e - s)])
    return {k: np.array(v).reshape(-1, 2) for k, v in arcs.items()}


def trace_region(pair, x, r, grid):
    """Spherical traces V_1, V_2 of S(x, r) as two RegionMasks sharing one Trace."""
    if r <= 0:
        raise ValueError("r must be positive")
    oracle = _circle_oracle(pair, x, r)
    nodes, w = grid.nodes, grid.weights
    labels = oracle(nodes)
    e = grid.edges
    diff = labels[e[:, 0]] != labels[e[:, 1]]
    straddle = np.zeros(len(nodes), dtype=bool)
    straddle[e[diff, 0]] = True
    straddle[e[diff, 1]] = True

    sidx = np.flatnonzero(straddle)
    if grid.dim == 1:
        dth = 2 * np.pi / len(nodes)
        offs = np.array([-3, -1, 1, 3]) * dth / 8
        th = np.arctan2(nodes[sidx, 1], nodes[sidx, 0])[:, None] + offs[None]
        sp = np.stack([np.cos(th), np.sin(th)], axis=-1).reshape(-1, 2)
        sw = np.full(len(sp), dth / 4)
        owner = np.repeat(sidx, 4)
    else:
        sel = straddle[grid.corner_node]
        sp = grid.corner_pts[sel].reshape(-1, 3)
        sw = grid.corner_w[sel].ravel()
        owner = np.repeat(grid.corner_node[sel], 4)
    sl = oracle(sp) if len(sp) else np.zeros(0, dtype=np.int8)

    keep = ~straddle
    qp = np.vstack([nodes[keep], sp])
    qw = np.concatenate([w[keep], sw])
    ql = np.concatenate([labels[keep], sl]).astype(np.int8)

    arcs = _s1_arcs(labels, oracle, len(nodes)) if grid.dim == 1 else None
    tr = Trace(grid, labels, straddle, qp, qw, ql, oracle, arcs)

    masks = []
    for side in (IN1, IN2):
        member = labels == side
        frac = member.astype(float)
        if len(sidx):
            part = np.bincount(owner, weights=sw * (sl == side), minlength=len(nodes))
            frac[sidx] = part[sidx] / w[sidx]
        masks.append(RegionMask(grid, member, np.clip(frac, 0.0, 1.0), straddle, side, tr))
    return masks[0], masks[1]


def region_measure(mask):
    if mask.grid.dim == 1 and mask.trace is not None and mask.trace.arcs is not None:
        a = mask.trace.arcs[mask.side]
        return float(np.sum(a[:, 1] - a[:, 0])) if len(a) else 0.0
    return float(np.sum(mask.frac * mask.grid.weights))


def band_measure(mask1, mask2):
    """Measure of the part of the sphere in neither trace."""
    return mask1.grid.total - region_measure(mask1) - region_measure(mask2)
