"""The Alt-Caffarelli-Friedman functional J(x, r) for analytic subharmonic pairs."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .domains import IN1, IN2, make_builtin
from .errors import ConfigError, FieldError
from .spectra import a_from_masks
from .sphere import build_grid, trace_region


@dataclass(frozen=True)
class SubharmonicPairField:
    """Two nonnegative subharmonic functions, u_i supported on side i of `pair`."""
    pair: object
    u: tuple  # (u1, u2): (N, d) -> (N,)
    grad: tuple  # (g1, g2): (N, d) -> (N, d)
    anchor: np.ndarray
    validity: float = np.inf
    tag: str = ""
    scale: float = 1.0
    zero: tuple = (False, False)  # u_i identically zero

    def value(self, i, pts):
        if self.zero[i]:
            return np.zeros(len(pts))
        return self.scale * self.u[i](pts)

    def gradient(self, i, pts):
        if self.zero[i]:
            return np.zeros_like(pts)
        return self.scale * self.grad[i](pts)

    def scaled(self, c):
        return replace(self, scale=self.scale * c)

    def without(self, i):
        z = list(self.zero)
        z[i] = True
        return replace(self, zero=tuple(z), tag=self.tag + f"-u{i + 1}zero")


def halfspace_field(dim=2):
    pair = make_builtin({"kind": "halfspace", "dim": dim})

    def g(sign):
        def grad(p):
            out = np.zeros_like(p)
            out[:, -1] = np.where(sign * p[:, -1] > 0, sign, 0.0)
            return out
        return grad

    return SubharmonicPairField(pair, (lambda p: np.maximum(p[:, -1], 0), lambda p: np.maximum(-p[:, -1], 0)),
                                (g(1.0), g(-1.0)), np.zeros(dim), np.inf, "halfspace")


def _sector_mode(a, theta, c):
    """u = t^al sin(al psi) + c t^(3 al) sin(3 al psi) on the sector psi in (0, theta)."""
    al = np.pi / theta

    def parts(p):
        t = np.hypot(p[:, 0], p[:, 1])
        psi = np.mod(np.arctan2(p[:, 1], p[:, 0]) - a, 2 * np.pi)
        on = (psi > 0) & (psi < theta) & (t > 0)
        return t, psi, on

    def u(p):
        t, psi, on = parts(p)
        val = t ** al * np.sin(al * psi) + c * t ** (3 * al) * np.sin(3 * al * psi)
        return np.where(on, val, 0.0)

    def grad(p):
        t, psi, on = parts(p)
        ts = np.where(t > 0, t, 1.0)
        dt = al * ts ** (al - 1) * np.sin(al * psi) + 3 * al * c * ts ** (3 * al - 1) * np.sin(3 * al * psi)
        dphi = al * ts ** (al - 1) * np.cos(al * psi) + 3 * al * c * ts ** (3 * al - 1) * np.cos(3 * al * psi)
        phi = np.arctan2(p[:, 1], p[:, 0])
        gx = dt * np.cos(phi) - dphi * np.sin(phi)
        gy = dt * np.sin(phi) + dphi * np.cos(phi)
        return np.where(on[:, None], np.column_stack([gx, gy]), 0.0)

    return u, grad


def sector_field(a1, b1, a2, b2, c=0.0):
    """Homogeneous harmonic modes on two planar sectors, with an optional 3rd-mode wobble on u1.

    Positivity of u1 needs c * t^(2 al) < 1, which sets the validity radius.
    """
    pair = make_builtin({"kind": "sector", "a1": a1, "b1": b1, "a2": a2, "b2": b2})
    u1, g1 = _sector_mode(a1, b1 - a1, c)
    u2, g2 = _sector_mode(a2, b2 - a2, 0.0)
    al = np.pi / (b1 - a1)
    valid = np.inf if c == 0 else (1.0 / abs(c)) ** (1 / (2 * al))
    return SubharmonicPairField(pair, (u1, u2), (g1, g2), np.zeros(2), valid, "sector" if c == 0 else "wobbled")


def cone_field(gamma):
    f = sector_field(gamma, np.pi - gamma, np.pi + gamma, 2 * np.pi - gamma)
    return replace(f, pair=make_builtin({"kind": "cone", "gamma": gamma}), tag="cone")


def cone_J_exact(gamma, r):
    al = np.pi / (np.pi - 2 * gamma)
    return np.pi ** 2 / 4 * r ** (4 * al - 4)


# ---------------------------------------------------------------------------
# quadrature


def _gauss(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _grad_sq(fld, i, pts):
    g = fld.gradient(i, pts)
    s = np.einsum("ij,ij->i", g, g)
    if not np.all(np.isfinite(s)):
        raise FieldError("non-finite gradient")
    return s


def _sphere_integral(fld, i, x, t, grid, n_ang):
    """Integral over the unit sphere of |grad u_i|^2 (x + t w) on the support trace."""
    side = IN1 if i == 0 else IN2
    if fld.zero[i]:
        return 0.0
    m1, m2 = trace_region(fld.pair, x, t, grid)
    tr = m1.trace
    if grid.dim == 1:
        total = 0.0
        for s, e in tr.arcs[side]:
            th, w = _gauss(n_ang, s, e)
            pts = x + t * np.column_stack([np.cos(th), np.sin(th)])
            total += float(w @ _grad_sq(fld, i, pts))
        return total
    keep = tr.ql == side
    return float(tr.qw[keep] @ _grad_sq(fld, i, x + t * tr.qp[keep]))


def weighted_energy(fld, i, x, r, quad_level=2, power=1, grid=None):
    """Integral over B(x, r) of |grad u_i|^2 |y - x|^(power - n), by polar quadrature.

    power = 1 gives the ACF weight |y - x|^(1 - n); power = n gives the plain energy.
    """
    x = np.asarray(x, float)
    d = fld.pair.ambient_dim
    if grid is None:
        grid = build_grid(d - 1, quad_level + 2)
    n_rad = 8 * 2 ** quad_level
    n_ang = 8 * 2 ** quad_level
    ts, ws = _gauss(n_rad, 0.0, r)
    vals = np.array([_sphere_integral(fld, i, x, t, grid, n_ang) for t in ts])
    return float(np.sum(ws * ts ** power * vals))


def acf_factors(fld, x, r, quad_level=2, grid=None):
    if r >= fld.validity:
        raise ConfigError(f"r = {r} beyond field validity {fld.validity}")
    return tuple(weighted_energy(fld, i, x, r, quad_level, 1, grid) / r ** 2 for i in (0, 1))


def acf_J(fld, x, r, quad_level=2, grid=None):
    f1, f2 = acf_factors(fld, x, r, quad_level, grid)
    return f1 * f2


# ---------------------------------------------------------------------------
# checks


@dataclass
class ACFProfile:
    r: np.ndarray
    J: np.ndarray
    dlogJ: np.ndarray  # nan at the two ends
    alpha_sum: np.ndarray  # alpha_1 + alpha_2 - 2 per shell
    slack: np.ndarray
    violations: int = 0
    flags: list = field(default_factory=list)

    @property
    def min_slack(self):
        return float(np.nanmin(self.slack))

    def rows(self):
        for k in range(len(self.r)):
            yield (self.r[k], self.J[k], self.dlogJ[k], self.alpha_sum[k], self.slack[k])


def acf_monotonicity_check(fld, x=None, r_range=(0.1, 1.0), steps=21, grid=None, quad_level=2):
    """Compare the log-derivative of J with (2/r)(alpha_1 + alpha_2 - 2) on a log grid."""
    x = fld.anchor if x is None else np.asarray(x, float)
    lo, hi = r_range
    if not 0 < lo < hi:
        raise ConfigError("need 0 < r_min < r_max")
    d = fld.pair.ambient_dim
    if grid is None:
        grid = build_grid(d - 1, quad_level + 2)
    r = np.geomspace(lo, hi, steps)
    J = np.array([acf_J(fld, x, t, quad_level, grid) for t in r])
    flags = []
    if np.any(J <= 0):
        flags.append("degenerate")
    q = np.log(r[1] / r[0])
    dlog = np.full(steps, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        lj = np.log(J)
    dlog[1:-1] = (lj[2:] - lj[:-2]) / (2 * q) / r[1:-1]
    asum = np.array([a_from_masks(*trace_region(fld.pair, x, t, grid)).deficit for t in r])
    rhs = 2 / r * asum
    slack = dlog - rhs
    tol = 0.05 * np.abs(rhs) + 1e-3
    viol = int(np.sum(slack[1:-1] < -tol[1:-1]))
    return ACFProfile(r, J, dlog, asum, slack, viol, flags)


@dataclass
class AuxReport:
    r: float
    lhs: tuple
    rhs: tuple
    degenerate: bool

    @property
    def ratio(self):
        return max(l / h if h > 0 else (0.0 if l == 0 else np.inf) for l, h in zip(self.lhs, self.rhs))


def acf_aux_bound_check(fld, x, r, quad_level=2):
    """Each ACF factor at radius r against r^-(n+1) times the energy of u_i on B(x, 2r)."""
    if 2 * r >= fld.validity:
        raise ConfigError("2r beyond field validity")
    x = np.asarray(x, float)
    n = fld.pair.ambient_dim - 1
    lhs = acf_factors(fld, x, r, quad_level)
    rhs = tuple(weighted_energy(fld, i, x, 2 * r, quad_level, n) / r ** (n + 1) for i in (0, 1))
    return AuxReport(r, lhs, rhs, any(v == 0 for v in lhs))
