"""Flatness coefficients: epsilon_n, the beta family and the diagnostic bounds."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domains import IN1, IN2
from .errors import ConfigError, InsufficientData
from .spectra import a_from_masks
from .sphere import build_grid, icosphere, trace_region

LOG_NODES = 16  # nodes per octave for integrals in dt/t


@dataclass
class HalfSpaceParam:
    anchor: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, float)
        u = np.asarray(self.normal, float)
        self.normal = u / np.linalg.norm(u)


@dataclass
class PlaneParam:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        self.point = np.asarray(self.point, float)
        u = np.asarray(self.normal, float)
        self.normal = u / np.linalg.norm(u)

    @property
    def offset(self):
        return float(self.point @ self.normal)

    def distance(self, pts):
        return np.abs(pts @ self.normal - self.offset)

    def angle_to(self, other):
        c = abs(float(self.normal @ other.normal))
        return float(np.arccos(min(1.0, c)))


# ---------------------------------------------------------------------------
# epsilon_n


def _overlap(arcs, lo):
    """Length of the union of `arcs` inside [lo, lo + pi] for each lo."""
    lo = np.mod(np.asarray(lo, float), 2 * np.pi)
    if len(arcs) == 0:
        return np.zeros_like(lo)
    s, e = arcs[:, 0][None, :, None], arcs[:, 1][None, :, None]
    k = np.array([-1.0, 0.0, 1.0])[None, None, :] * 2 * np.pi
    a, b = lo[:, None, None], lo[:, None, None] + np.pi
    ov = np.clip(np.minimum(e + k, b) - np.maximum(s + k, a), 0.0, None)
    return ov.sum(axis=(1, 2))


def _mismatch_s1(arcs1, arcs2, phi):
    return (np.pi - _overlap(arcs1, phi)) + (np.pi - _overlap(arcs2, phi + np.pi))


def _eps_s1(trace):
    a1, a2 = trace.arcs[IN1], trace.arcs[IN2]
    ends1 = a1.ravel()
    ends2 = a2.ravel()
    cand = np.concatenate([[0.0], ends1, ends1 - np.pi, ends2 - np.pi, ends2])
    f = _mismatch_s1(a1, a2, cand)
    k = int(np.argmin(f))
    phi = cand[k]
    # the half-circle [phi, phi + pi] is H+; its inner normal points to phi + pi/2
    u = np.array([np.cos(phi + np.pi / 2), np.sin(phi + np.pi / 2)])
    return float(max(f[k], 0.0)), u


def _tangent_frame(u):
    a = np.array([1.0, 0, 0]) if abs(u[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(u, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(u, e1)


def _mismatch_s2(trace, D):
    # points on the dividing plane count half to each side
    S = np.sign(trace.qp @ D.T)
    a = trace.qw * (trace.ql != IN1)
    b = trace.qw * (trace.ql != IN2)
    return 0.5 * ((a + b).sum() + (a - b) @ S)


_DIRS = {}


def _directions(level):
    if level not in _DIRS:
        _DIRS[level] = icosphere(level)[0]
    return _DIRS[level]


def _eps_s2(trace, refine, starts=4):
    g = trace.grid
    D = _directions(min(3, g.level))
    f = _mismatch_s2(trace, D)
    order = np.argsort(f, kind="stable")[:starts]
    best_f, best_u = np.inf, None
    step0 = 1.2 * np.sqrt(4 * np.pi / len(D))
    for k in order:
        u, fu, step = D[k].copy(), f[k], step0
        for _ in range(refine):
            improved = True
            while improved:
                e1, e2 = _tangent_frame(u)
                trial = []
                for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)):
                    v = u + step * (a * e1 + b * e2)
                    trial.append(v / np.linalg.norm(v))
                trial = np.array(trial)
                ft = _mismatch_s2(trace, trial)
                j = int(np.argmin(ft))
                improved = ft[j] < fu - 1e-15
                if improved:
                    u, fu = trial[j], ft[j]
            step *= 0.5
        if fu < best_f:
            best_f, best_u = fu, u
    return float(best_f), best_u


def epsilon_from_trace(trace, refine=10):
    if trace.grid.dim == 1:
        return _eps_s1(trace)
    return _eps_s2(trace, refine)


def epsilon_n(pair, x, r, grid=None, refine=10, detail=False):
    """Best half-space mismatch of the traces of S(x, r), in angular units."""
    if grid is None:
        grid = build_grid(pair.ambient_dim - 1, 4)
    if grid.dim != pair.ambient_dim - 1:
        raise ConfigError("grid dimension does not match the pair")
    m1, _ = trace_region(pair, x, r, grid)
    val, u = epsilon_from_trace(m1.trace, refine)
    return (val, u) if detail else val


def hemisphere_mismatch(pair, x, t, H, grid):
    """H^n((S(x,t) cap H+) minus Omega_1) / t^n using the traced quadrature points."""
    m1, _ = trace_region(pair, x, t, grid)
    tr = m1.trace
    s = 0.5 * (1 + np.sign(tr.qp @ H.normal))
    return float(np.sum(tr.qw * s * (tr.ql != IN1)))


def arc_upper_bound(pair, x, t, H, grid=None, n_phi=None, n_alpha=None):
    """Integral over the equator of the meridian-arc length outside Omega_1, per t^2."""
    if pair.ambient_dim != 3:
        raise ConfigError("arc_upper_bound needs ambient dimension 3")
    level = 4 if grid is None else grid.level
    n_phi = n_phi or 2 ** (level + 5)
    n_alpha = n_alpha or 2 ** (level + 3)
    u = H.normal
    e1, e2 = _tangent_frame(u)
    phi = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    al = (np.arange(n_alpha) + 0.5) * (np.pi / 2) / n_alpha
    P, A = np.meshgrid(phi, al, indexing="ij")
    dirs = (np.cos(A) * np.cos(P))[..., None] * e1 + (np.cos(A) * np.sin(P))[..., None] * e2 \
        + np.sin(A)[..., None] * u
    lab = pair.classify(np.asarray(x, float) + t * dirs.reshape(-1, 3))
    out = (lab != IN1).reshape(n_phi, n_alpha)
    return float(out.sum() * (2 * np.pi / n_phi) * (np.pi / 2 / n_alpha))


# ---------------------------------------------------------------------------
# beta numbers


def _ball_points(sample, x, r):
    if r <= 4 * sample.h:
        raise InsufficientData(f"radius {r:g} not above 4h = {4 * sample.h:g}")
    idx = sample.ball(x, r)
    if len(idx) < sample.dim + 1:
        raise InsufficientData(f"{len(idx)} points in B(x, {r:g})")
    return sample.points[idx], sample.weights[idx]


def l2_plane(sample, x, r, centered=True):
    """Least-squares plane of the weighted points in B(x, r) and its residual moment."""
    x = np.asarray(x, float)
    Y, w = _ball_points(sample, x, r)
    c = x if centered else (w @ Y) / w.sum()
    Z = Y - c
    M = (Z * w[:, None]).T @ Z
    vals, vecs = np.linalg.eigh(M)
    return PlaneParam(c, vecs[:, 0]), max(float(vals[0]), 0.0), Y, w


def beta(sample, x, r, p=2, centered=False):
    """beta_{mu,p}(x, r); centered=True restricts to planes through x."""
    if p not in (1, 2):
        raise ConfigError("p must be 1 or 2")
    plane, lam, Y, w = l2_plane(sample, x, r, centered)
    n = sample.n
    if p == 2:
        return float(np.sqrt(lam / r ** (n + 2)))
    return float(np.sum(w * plane.distance(Y)) / r ** (n + 1))


def _plane_probes(plane, x, r, spacing):
    u = plane.normal
    d = float((x - plane.point) @ u)
    if abs(d) >= r:
        return np.zeros((0, len(x)))
    rad = np.sqrt(r * r - d * d)
    foot = x - d * u
    if len(x) == 2:
        e = np.array([-u[1], u[0]])
        k = max(2, int(np.ceil(2 * rad / spacing)))
        t = -rad + (np.arange(k) + 0.5) * 2 * rad / k
        return foot + t[:, None] * e
    e1, e2 = _tangent_frame(u)
    k = max(2, int(np.ceil(2 * rad / spacing)))
    t = -rad + (np.arange(k) + 0.5) * 2 * rad / k
    a, b = np.meshgrid(t, t, indexing="ij")
    keep = a * a + b * b < rad * rad
    return foot + a[keep][:, None] * e1 + b[keep][:, None] * e2


def bbeta_of_plane(sample, x, r, plane, Y=None, max_probes=400):
    """Bilateral sup-distance coefficient of one plane."""
    x = np.asarray(x, float)
    if Y is None:
        Y, _ = _ball_points(sample, x, r)
    t1 = float(np.max(plane.distance(Y))) / r
    per_axis = max_probes if sample.dim == 2 else int(np.sqrt(max_probes))
    spacing = max(sample.h, 2 * r / per_axis)
    Z = _plane_probes(plane, x, r, spacing)
    t2 = float(np.max(sample.tree.query(Z)[0])) / r if len(Z) else 0.0
    return t1 + t2


def _plane_from_params(q, dim):
    if dim == 2:
        u = np.array([np.cos(q[0]), np.sin(q[0])])
        return PlaneParam(q[1] * u, u)
    th, ph = q[0], q[1]
    u = np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    return PlaneParam(q[2] * u, u)


def _params_from_plane(plane):
    u = plane.normal
    if len(u) == 2:
        return np.array([np.arctan2(u[1], u[0]), plane.offset])
    return np.array([np.arccos(np.clip(u[2], -1, 1)), np.arctan2(u[1], u[0]), plane.offset])


def bbeta(sample, x, r, multistarts=8, detail=False, max_points=3000, seed=0):
    """Bilateral beta: multistart compass search over (normal, offset)."""
    x = np.asarray(x, float)
    seed_plane, _, Y, _ = l2_plane(sample, x, r, centered=False)
    if len(Y) > max_points:
        Y = Y[:: int(np.ceil(len(Y) / max_points))]
    dim = sample.dim

    def f(q):
        return bbeta_of_plane(sample, x, r, _plane_from_params(q, dim), Y)

    q0 = _params_from_plane(seed_plane)
    rng = np.random.default_rng(seed)
    starts = [q0]
    for _ in range(max(0, multistarts - 1)):
        q = q0.copy()
        q[:-1] += rng.normal(scale=0.15, size=len(q) - 1)
        q[-1] += rng.normal(scale=0.1 * r)
        starts.append(q)
    best_val, best_q = np.inf, q0
    for q in starts:
        val = f(q)
        steps = np.array([0.1] * (len(q) - 1) + [0.05 * r])
        while np.max(steps[:-1]) > 1e-4:
            moved = False
            for i in range(len(q)):
                for sgn in (1.0, -1.0):
                    qq = q.copy()
                    qq[i] += sgn * steps[i]
                    v = f(qq)
                    if v < val - 1e-12:
                        q, val, moved = qq, v, True
                        break
            if not moved:
                steps *= 0.5
        if val < best_val:
            best_val, best_q = val, q
    plane = _plane_from_params(best_q, dim)
    return (best_val, plane) if detail else best_val


# ---------------------------------------------------------------------------
# diagnostic bounds


def log_octave_nodes(r):
    """Midpoint nodes in log t on [r/2, r] and the common weight (sums to ln 2)."""
    k = np.arange(LOG_NODES)
    return r * 2.0 ** (-(k + 0.5) / LOG_NODES), np.log(2) / LOG_NODES


@dataclass
class BoundReport:
    lhs: float
    rhs: float

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs > 0 else np.inf


def epsilon_beta_bound_check(pair, sample, x, r, grid=None, s_factor=1.5):
    """Octave integral of eps^2 dt/t on [r/2, r] against the centred beta at 1.5 r."""
    t, wt = log_octave_nodes(r)
    lhs = sum(epsilon_n(pair, x, tk, grid) ** 2 for tk in t) * wt
    rhs = beta(sample, x, s_factor * r, p=2, centered=True) ** 2
    return BoundReport(float(lhs), float(rhs))


def averaging_check(sample, x0, R, r):
    """Sum of centred beta^2 at scale r over B(x0,R) vs plain beta^2 at 2r over B(x0,2R)."""
    i1 = sample.ball(x0, R)
    i2 = sample.ball(x0, 2 * R)
    lhs = sum(sample.weights[i] * beta(sample, sample.points[i], r, 2, True) ** 2 for i in i1)
    rhs = sum(sample.weights[i] * beta(sample, sample.points[i], 2 * r, 2, False) ** 2 for i in i2)
    return BoundReport(float(lhs), float(rhs))


# ---------------------------------------------------------------------------
# coefficient tables

COEFFS = ("eps_n", "a", "beta2c_sq", "beta2_sq", "bbeta")


@dataclass
class CoefficientTable:
    centers: np.ndarray  # sample indices
    points: np.ndarray  # centre coordinates
    R: float
    scales: np.ndarray  # r_j = R 2^-j
    values: dict  # name -> (len(centers), len(scales)) array, nan when not computed
    flags: np.ndarray  # (len(centers), len(scales)) of '|'-joined strings
    weights: np.ndarray = field(default=None)

    def column(self, name):
        return self.values[name]

    def lookup(self, idx):
        pos = np.searchsorted(self.centers, idx)
        ok = (pos < len(self.centers)) & (self.centers[np.minimum(pos, len(self.centers) - 1)] == idx)
        return pos, ok


def _row(pair, sample, grid, point, scales, which):
    out = {k: np.full(len(scales), np.nan) for k in COEFFS}
    flags = []
    for j, r in enumerate(scales):
        fl = []
        if "eps_n" in which or "a" in which:
            m1, m2 = trace_region(pair, point, r, grid)
            if "eps_n" in which:
                out["eps_n"][j] = epsilon_from_trace(m1.trace)[0]
            if "a" in which:
                rec = a_from_masks(m1, m2)
                out["a"][j] = rec.value
                fl.extend(rec.flags)
        for name, fn in (("beta2c_sq", lambda: beta(sample, point, r, 2, True) ** 2),
                         ("beta2_sq", lambda: beta(sample, point, r, 2, False) ** 2),
                         ("bbeta", lambda: bbeta(sample, point, r))):
            if name in which:
                try:
                    out[name][j] = fn()
                except InsufficientData:
                    fl.append("insufficient_data")
        flags.append("|".join(sorted(set(fl))))
    return out, flags


def build_table(pair, sample, centers, R, m, grid=None, which=("eps_n", "a"), threads=1):
    """Fill (center, scale) -> coefficients for scales R 2^-j, j = 0..m."""
    which = tuple(which)
    for k in which:
        if k not in COEFFS:
            raise ConfigError(f"unknown coefficient {k}")
    if grid is None:
        grid = build_grid(pair.ambient_dim - 1, 4)
    centers = np.asarray(sorted(set(int(c) for c in centers)), dtype=np.int64)
    scales = R * 2.0 ** -np.arange(m + 1)
    pts = sample.points[centers]
    rows = [None] * len(centers)

    def job(i):
        rows[i] = _row(pair, sample, grid, pts[i], scales, which)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(job, range(len(centers))))
    else:
        for i in range(len(centers)):
            job(i)
    values = {k: np.array([rw[0][k] for rw in rows]).reshape(len(centers), len(scales)) for k in COEFFS}
    flags = np.array([rw[1] for rw in rows], dtype=object).reshape(len(centers), len(scales))
    return CoefficientTable(centers, pts, float(R), scales, values, flags, sample.weights[centers])
