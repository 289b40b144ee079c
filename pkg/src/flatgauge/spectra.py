"""First Dirichlet eigenvalues of spherical regions and the coefficient a(x, r)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .domains import IN1, IN2
from .errors import NumericalError
from .sphere import build_grid, trace_region

FH_SLACK = 5e-3  # negative Friedland-Hayman deficits beyond this are flagged


@dataclass
class CharacteristicConstant:
    lambda1: float
    alpha: float
    component_count: int = 0
    empty: bool = False
    iterations: int = 0
    residual: float = 0.0

    @classmethod
    def empty_region(cls):
        return cls(np.inf, np.inf, 0, True)


def characteristic_constant(lam, n):
    """Positive root alpha of lam = alpha (n - 1 + alpha)."""
    if lam < 0:
        raise ValueError("eigenvalue must be nonnegative")
    if np.isinf(lam):
        return np.inf
    return 0.5 * (-(n - 1) + np.sqrt((n - 1) ** 2 + 4 * lam))


# ---------------------------------------------------------------------------
# S^1


def lambda1_arcs(mask):
    arcs = mask.arcs()
    if len(arcs) == 0:
        return CharacteristicConstant.empty_region()
    lengths = arcs[:, 1] - arcs[:, 0]
    tmax = float(lengths.max())
    if tmax >= 2 * np.pi - 1e-12:
        return CharacteristicConstant(0.0, 0.0, 1)
    alpha = np.pi / tmax
    return CharacteristicConstant(alpha * alpha, alpha, len(arcs))


# ---------------------------------------------------------------------------
# S^2 finite elements


def assemble(coords, faces):
    """Cotangent stiffness and lumped (barycentric) mass on a flat triangle mesh."""
    N = len(coords)
    P = coords[faces]
    rows, cols, vals = [], [], []
    for c in range(3):
        i, j = faces[:, (c + 1) % 3], faces[:, (c + 2) % 3]
        a = P[:, (c + 1) % 3] - P[:, c]
        b = P[:, (c + 2) % 3] - P[:, c]
        cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
        w = 0.5 * cot
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-w, -w, w, w]
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N)).tocsr()
    area = 0.5 * np.linalg.norm(np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]), axis=1)
    M = np.bincount(faces.ravel(), weights=np.repeat(area / 3, 3), minlength=N)
    return K, M


def _snap(mask):
    """Move boundary-adjacent nodes onto oracle crossings of the region boundary.

    Returns node coordinates and the unknown (free) node set. Masks without an
    oracle fall back to plain node exclusion.
    """
    g = mask.grid
    coords = g.nodes.copy()
    free = mask.member & ~mask.straddle if mask.trace is None else mask.member.copy()
    if mask.trace is None:
        return coords, free
    p, q, s = mask.trace.crossings(mask.side)
    if len(p) == 0:
        return coords, free
    L = np.linalg.norm(g.nodes[p] - g.nodes[q], axis=1)
    # candidate moves: inside node p travels s*L, outside node q travels (1-s)*L
    nodes = np.concatenate([p, q])
    dist = np.concatenate([s * L, (1 - s) * L])
    frac = np.concatenate([s, s])
    edge = np.concatenate([np.arange(len(p))] * 2)
    designated = np.zeros(len(coords), dtype=bool)
    designated[np.where(s * L <= (1 - s) * L, p, q)] = True
    order = np.lexsort((edge, dist, nodes))
    first = np.ones(len(order), dtype=bool)
    first[1:] = nodes[order][1:] != nodes[order][:-1]
    best = order[first]
    tgt_node = nodes[best]
    keep = designated[tgt_node]
    tgt_node, best = tgt_node[keep], best[keep]
    e = edge[best]
    t = frac[best][:, None]
    new = (1 - t) * g.nodes[p[e]] + t * g.nodes[q[e]]
    coords[tgt_node] = new / np.linalg.norm(new, axis=1, keepdims=True)
    free[tgt_node] = False
    return coords, free


def _pcg(A, B, X0, dinv, rtol, maxiter):
    """Jacobi-preconditioned CG run independently on each column of B."""
    X = X0.copy()
    R = B - A @ X
    bn = np.linalg.norm(B, axis=0)
    bn[bn == 0] = 1.0
    Z = dinv[:, None] * R
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)
    for it in range(maxiter):
        if np.all(np.linalg.norm(R, axis=0) <= rtol * bn):
            return X, it
        AP = A @ P
        pap = np.einsum("ij,ij->j", P, AP)
        alpha = np.where(pap > 0, rz / np.where(pap > 0, pap, 1.0), 0.0)
        X += alpha * P
        R -= alpha * AP
        Z = dinv[:, None] * R
        rz_new = np.einsum("ij,ij->j", R, Z)
        beta = np.where(rz > 0, rz_new / np.where(rz > 0, rz, 1.0), 0.0)
        P = Z + beta * P
        rz = rz_new
    return X, maxiter


def smallest_eigenpair(K, M, tol=1e-7, max_outer=500, block=3, seed=0, inner="lu"):
    """Block inverse iteration for K v = lambda M v.

    K symmetric positive definite (sparse), M positive diagonal (1-d array).
    Inner solves use a sparse LU factorization (``inner="lu"``) or
    Jacobi-preconditioned CG (``inner="cg"``).
    The stopping test is on the M^-1-norm residual of the lowest Ritz pair, so
    the eigenvalue itself is accurate to roughly tol**2.
    Returns (lambda, vector, iterations, residual).
    """
    m = K.shape[0]
    if m <= 3 * block + 2:
        w, V = scipy.linalg.eigh(K.toarray(), np.diag(M))
        return float(w[0]), V[:, 0], 0, 0.0
    b = min(block, m)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, b))
    X[:, 0] = 1.0
    dinv = 1.0 / K.diagonal()
    lu = splu(K.tocsc()) if inner == "lu" else None
    theta = np.ones(b)
    res = np.inf
    for it in range(1, max_outer + 1):
        if lu is not None:
            Y = lu.solve(M[:, None] * X)
        else:
            Y, _ = _pcg(K, M[:, None] * X, X / theta, dinv, 1e-10, 20 * m)
        A = Y.T @ (K @ Y)
        B = Y.T @ (M[:, None] * Y)
        A, B = 0.5 * (A + A.T), 0.5 * (B + B.T)
        theta, C = scipy.linalg.eigh(A, B)
        X = Y @ C
        x = X[:, 0]
        r = K @ x - theta[0] * (M * x)
        res = np.linalg.norm(r / np.sqrt(M)) / (theta[0] * np.sqrt(x @ (M * x)))
        if res < tol:
            return float(theta[0]), x, it, float(res)
    raise NumericalError(f"inverse iteration did not converge (residual {res:.2e})")


def lambda1_fem(grid, mask, tol=1e-7, inner="lu"):
    if grid.dim != 2:
        raise ValueError("lambda1_fem needs an S^2 grid")
    coords, free = _snap(mask)
    if free.sum() < 10:
        return CharacteristicConstant.empty_region()
    F = grid.faces
    used = free[F].any(axis=1)
    K, M = assemble(coords, F[used])
    idx = np.flatnonzero(free)
    Kf = K[idx][:, idx].tocsr()
    Mf = M[idx]
    lam, _, its, res = smallest_eigenpair(Kf, Mf, tol=tol, inner=inner)
    ncomp = connected_components(Kf, directed=False)[0]
    return CharacteristicConstant(lam, characteristic_constant(lam, 2), int(ncomp), False, its, res)


def lambda1(mask):
    return lambda1_arcs(mask) if mask.grid.dim == 1 else lambda1_fem(mask.grid, mask)


# ---------------------------------------------------------------------------
# cap oracle


def _shoot(lam, theta0):
    d = 1e-6
    y0 = [1 - lam * d * d / 4, -lam * d / 2]

    def rhs(t, y):
        return [y[1], -np.cos(t) / np.sin(t) * y[1] - lam * y[0]]

    sol = solve_ivp(rhs, (d, theta0), y0, method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


def cap_lambda1_oracle(theta0, floor=1e-9):
    """Smallest Dirichlet eigenvalue of the geodesic cap of radius theta0 on S^2."""
    if not 0 < theta0 <= np.pi:
        raise ValueError("theta0 must lie in (0, pi)")
    if theta0 >= np.pi - 1e-10:
        return floor
    t_end = theta0
    lo, hi = floor, floor
    if _shoot(lo, t_end) <= 0:
        raise NumericalError("bracket floor already past the first root")
    hi = 1e-3
    while _shoot(hi, t_end) > 0:
        lo, hi = hi, hi * 1.2
        if hi > 1e8:
            raise NumericalError("no sign change found")
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if _shoot(mid, t_end) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# a(x, r)


@dataclass
class ACoefficient:
    value: float
    alpha1: float
    alpha2: float
    deficit: float
    flags: tuple = ()


def alpha_pair(m1, m2):
    return lambda1(m1), lambda1(m2)


def a_from_masks(m1, m2):
    flags = []
    if m1.empty:
        flags.append("empty_trace_1")
    if m2.empty:
        flags.append("empty_trace_2")
    if flags:
        return ACoefficient(1.0, np.inf, np.inf, np.inf, tuple(flags))
    c1, c2 = alpha_pair(m1, m2)
    if c1.empty:
        flags.append("empty_trace_1")
    if c2.empty:
        flags.append("empty_trace_2")
    if flags:
        return ACoefficient(1.0, c1.alpha, c2.alpha, np.inf, tuple(flags))
    deficit = c1.alpha + c2.alpha - 2.0
    if deficit < -FH_SLACK:
        flags.append("fh_violation")
    return ACoefficient(float(min(1.0, max(0.0, deficit))), c1.alpha, c2.alpha, deficit, tuple(flags))


def a_coefficient(pair, x, r, grid=None, detail=False):
    """min{1, alpha_1 + alpha_2 - 2} for the traces of S(x, r)."""
    if grid is None:
        grid = build_grid(pair.ambient_dim - 1, 4)
    m1, m2 = trace_region(pair, x, r, grid)
    rec = a_from_masks(m1, m2)
    return rec if detail else rec.value


__all__ = ["CharacteristicConstant", "characteristic_constant", "lambda1_arcs", "lambda1_fem",
           "cap_lambda1_oracle", "a_coefficient", "a_from_masks", "IN1", "IN2"]
