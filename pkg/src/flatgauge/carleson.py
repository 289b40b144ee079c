"""Carleson sums of eps_n^2 and a, the bounded/diverging verdict, and the corkscrew locator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import build_table, epsilon_n, log_octave_nodes
from .domains import IN1, IN2, NEITHER, sample_boundary
from .errors import ConfigError
from .sphere import build_grid

POW = {"eps_n": 2, "a": 1}
SLOPE_THRESHOLD = 0.05  # per generation; about 3x the half-space noise floor
LN2 = np.log(2.0)


@dataclass
class CarlesonReport:
    center: np.ndarray
    radius: float
    coeff: str
    depth: int
    increments: np.ndarray  # generation j = 0..m
    S: np.ndarray  # cumulative sums
    slope: float = np.nan
    verdict: str = ""

    @property
    def total(self):
        return float(self.S[-1])

    def rows(self):
        for j in range(self.depth + 1):
            yield (j, self.increments[j], self.S[j], self.verdict, self.slope)


def carleson_sum(table, B, coeff="eps_n", pow=None, mass=None):
    """(1/r(B)^n) sum_x w_x sum_j c(x, r(B) 2^-j)^pow ln 2 over table centres in B.

    With `mass` given, centre weights are rescaled to total `mass`, so a
    subsampled table still integrates against the full sigma(B).
    """
    x0, r = np.asarray(B[0], float), float(B[1])
    if coeff not in table.values:
        raise ConfigError(f"unknown coefficient {coeff}")
    pow = POW.get(coeff, 1) if pow is None else pow
    if not np.isclose(table.R, r, rtol=1e-12):
        raise ConfigError(f"table top scale {table.R} does not match r(B) = {r}")
    inside = np.linalg.norm(table.points - x0, axis=1) < r
    if not inside.any():
        raise ConfigError("no table centre inside B")
    vals = table.values[coeff][inside]
    if np.isnan(vals).any():
        raise ConfigError(f"coverage gap: {coeff} missing at {int(np.isnan(vals).sum())} (centre, scale) cells")
    w = table.weights[inside]
    if mass is not None:
        w = w * (mass / w.sum())
    n = table.points.shape[1] - 1
    inc = (w @ vals ** pow) * LN2 / r ** n
    S = np.cumsum(inc)
    return CarlesonReport(x0, r, coeff, len(inc) - 1, inc, S)


def verdict(report, last=4):
    """Least-squares slope of S(j) over the last `last` generations (last + 1 points)."""
    m = report.depth
    if m < 6:
        raise ConfigError("verdict needs depth >= 6")
    j = np.arange(m - last, m + 1)
    slope = float(np.polyfit(j, report.S[j], 1)[0])
    report.slope = slope
    report.verdict = "bounded" if slope <= SLOPE_THRESHOLD else "diverging"
    return report


# ---------------------------------------------------------------------------
# catalog balls


def default_ball(pair):
    """A boundary ball per built-in kind: (anchor point, radius)."""
    k = pair.kind
    if k == "disk":
        return np.eye(pair.ambient_dim)[-1] * pair.params.get("radius", 1.0), 0.5
    if k == "square":
        return np.full(2, pair.params.get("half", 1.0)), 0.5
    if k == "strip":
        return np.zeros(2), 8 * pair.params["w"]
    if k == "cantor":
        return np.zeros(2), 0.5
    return np.zeros(pair.ambient_dim), 0.5


@dataclass
class VerdictConfig:
    depth: int = 10
    h: float = 1e-3
    centers: int = 256
    grid_level: int = 4
    seed: int = 0
    threads: int = 1
    ball: tuple = None  # (anchor, radius); None -> default_ball
    pow: dict = None  # coefficient -> exponent; None -> POW


@dataclass
class VerdictResult:
    kind: str
    reports: dict  # coeff -> CarlesonReport
    table: object = field(repr=False, default=None)

    @property
    def verdicts(self):
        return {k: r.verdict for k, r in self.reports.items()}

    @property
    def diverging(self):
        return any(v == "diverging" for v in self.verdicts.values())


def strong_geometric_verdict(pair, config=VerdictConfig(), sample=None):
    anchor, R = config.ball if config.ball is not None else default_ball(pair)
    if sample is None:
        sample = sample_boundary(pair, config.h, seed=config.seed)
    x0 = sample.points[int(sample.tree.query(np.asarray(anchor, float))[1])]
    idx = sample.ball(x0, R)
    if len(idx) > config.centers:
        idx = idx[np.linspace(0, len(idx) - 1, config.centers).round().astype(int)]
    grid = build_grid(pair.ambient_dim - 1, config.grid_level)
    table = build_table(pair, sample, idx, R, config.depth, grid, ("eps_n", "a"), config.threads)
    mass = sample.mass(x0, R)
    pw = {**POW, **(config.pow or {})}
    reports = {c: verdict(carleson_sum(table, (x0, R), c, pow=pw[c], mass=mass)) for c in ("eps_n", "a")}
    return VerdictResult(pair.kind, reports, table)


@dataclass
class ConsistencyReport:
    C: float
    violations: int
    rows: int


def eps_a_consistency(table, slack=1e-2):
    """One global C with eps_n^2 <= C a + slack over every filled table cell."""
    e2 = table.values["eps_n"] ** 2
    a = table.values["a"]
    ok = np.isfinite(e2) & np.isfinite(a)
    e2, a = e2[ok], a[ok]
    need = e2 - slack
    pos = a > 0
    C = float(np.max(need[pos] / a[pos], initial=0.0))
    viol = int(np.sum(need[~pos] > 0))
    return ConsistencyReport(max(C, 0.0), viol, int(ok.sum()))


# ---------------------------------------------------------------------------
# corkscrew locator


@dataclass
class CorkscrewCertificate:
    side: int
    found: bool
    center: np.ndarray = None
    radius: float = np.nan
    x: np.ndarray = None
    K: int = -1
    delta: float = np.nan
    tau: float = np.nan
    purity: float = np.nan
    scale_ok: bool = True
    reason: str = ""

    def row(self):
        c = self.center if self.center is not None else np.full(len(self.x), np.nan)
        return (self.side, int(self.found), self.K, *c, self.radius, self.purity, int(self.scale_ok), self.reason)


def _annulus(rng, x, r0, r1, n):
    d = len(x)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    u = rng.uniform(size=n)
    rad = (r0 ** d + u * (r1 ** d - r0 ** d)) ** (1.0 / d)
    return x + rad[:, None] * g


def _ball_uniform(rng, c, s, n):
    return _annulus(rng, c, 0.0, s, n)


def octave_eps_sum(pair, x, R, K, grid=None):
    """Integral of eps_n(x, t)^2 dt/t over [2^-K-1 R, 2^-K R]."""
    t, wt = log_octave_nodes(R * 2.0 ** -K)
    return float(sum(epsilon_n(pair, x, tk, grid) ** 2 for tk in t) * wt)


def corkscrew_locate(pair, sample, x0, R, delta=0.1, tau=1 / 20, table=None, K=None, grid=None,
                     trials=4000, probes=1000, seed=0, k_extra=12):
    """Two corkscrew balls, one per side, inside B(x0, R).

    The Vitali covering step is replaced by a direct distance test: candidate
    centres closer than s to the boundary sample are discarded.
    """
    if not (0 < delta <= 0.1 and 0 < tau <= 0.1):
        raise ConfigError("delta and tau must lie in (0, 1/10]")
    x0 = np.asarray(x0, float)
    if grid is None:
        grid = build_grid(pair.ambient_dim - 1, 4)
    if table is None:
        idx = sample.ball(x0, R)
        if len(idx) > 64:
            idx = idx[np.linspace(0, len(idx) - 1, 64).round().astype(int)]
        table = build_table(pair, sample, idx, R, 10, grid, ("eps_n",))
    inside = np.linalg.norm(table.points - x0, axis=1) < R
    if not inside.any():
        raise ConfigError("eps table has no centre inside B(x0, R)")
    sums = (table.values["eps_n"][inside] ** 2).sum(axis=1) * LN2
    x = table.points[inside][int(np.argmin(sums))]
    k0 = int(np.ceil(np.log2(1.0 / delta)))
    scale_ok = True
    if K is None:
        K = next((k for k in range(k0, k0 + k_extra) if octave_eps_sum(pair, x, R, k, grid) <= delta), None)
        if K is None:
            K, scale_ok = k0, False
    s = tau * 2.0 ** (-K - 1) * R
    rng = np.random.default_rng([seed, K])
    pts = _annulus(rng, x, 2.0 ** (-K - 1) * R, 2.0 ** -K * R, trials)
    dist = sample.tree.query(pts)[0]
    pts, dist = pts[dist >= s + sample.h], dist[dist >= s + sample.h]
    lab = np.asarray(pair.classify(pts)) if len(pts) else np.zeros(0, dtype=int)
    out = []
    for side in (IN1, IN2):
        cand = np.flatnonzero(lab == side)
        cert = CorkscrewCertificate(side, False, None, s, x, K, delta, tau, np.nan, scale_ok,
                                    "no surviving point on this side")
        for c in cand[np.argsort(-dist[cand], kind="stable")][:20]:
            probe = _ball_uniform(np.random.default_rng([seed, K, side, int(c)]), pts[c], s, probes)
            purity = float(np.mean(np.asarray(pair.classify(probe)) == side))
            if purity == 1.0:
                cert = CorkscrewCertificate(side, True, pts[c], s, x, K, delta, tau, 1.0, scale_ok, "")
                break
            cert.reason = "no candidate ball is pure"
        out.append(cert)
    return tuple(out)


@dataclass
class MassBalance:
    fractions: np.ndarray  # (In1, In2, Neither)
    sigma: np.ndarray
    trials: int


def mass_balance_check(pair, x, K, R, trials=100000, seed=0, chunk=10000):
    """Monte Carlo volume fractions of the two sides and the gap in A(x, 2^-K-1 R, 2^-K R)."""
    x = np.asarray(x, float)
    counts = np.zeros(3)
    done = 0
    k = 0
    while done < trials:
        n = min(chunk, trials - done)
        rng = np.random.default_rng([seed, k])  # one stream per chunk
        lab = np.asarray(pair.classify(_annulus(rng, x, 2.0 ** (-K - 1) * R, 2.0 ** -K * R, n)))
        counts += [np.sum(lab == IN1), np.sum(lab == IN2), np.sum(lab == NEITHER)]
        done += n
        k += 1
    p = counts / trials
    return MassBalance(p, np.sqrt(p * (1 - p) / trials), trials)
