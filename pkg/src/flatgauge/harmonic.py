"""Walk-on-spheres harmonic measure, density ratios and the log-ratio bounds built on them."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .domains import NEITHER
from .errors import ConfigError, StatisticalFailure
from .spectra import a_coefficient
from .sphere import build_grid

CHUNK = 4096
CENSOR_LIMIT = 1e-3
CALIBRATION_FACTOR = 2.0  # safety factor on calibrated constants


@dataclass
class WosConfig:
    eps_stop: float
    walks: int = 100_000
    max_steps: int = 5000
    seed: int = 0
    threads: int = 1
    truncation: tuple = None  # (center, radius); None -> default_truncation
    c1: float = 0.1  # pole clearance, as a fraction of the sample diameter

    def validate(self, sample):
        if self.eps_stop < 2 * sample.h:
            raise ConfigError(f"eps_stop={self.eps_stop} below 2h={2 * sample.h}")
        if self.walks < 1000:
            raise ConfigError("walk count must be >= 1000")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be positive")


def default_truncation(pair, sample):
    """Ball outside which the side is cut off.

    Pairs with a ``width`` parameter are sampled only on |tangent| <= width/2,
    so the cut sits there; closed boundaries get a ball well past the sample.
    """
    lo, hi = sample.points.min(0), sample.points.max(0)
    c = 0.5 * (lo + hi)
    if "width" in pair.params:
        return c, 0.5 * float(pair.params["width"])
    return c, max(pair.diam, 2 * sample.diam)


@dataclass
class HitCounts:
    side: int
    pole: np.ndarray
    counts: np.ndarray  # per sample cell
    outer: int  # walks ending on the truncation sphere
    censored: int
    walks: int
    truncation: tuple
    mean_steps: float
    sample: object = field(repr=False, default=None)

    @property
    def total(self):
        return self.walks - self.censored

    @property
    def censored_fraction(self):
        return self.censored / self.walks

    def hits_in(self, x, r):
        return int(self.counts[self.sample.ball(np.asarray(x, float), r)].sum())

    def rows(self):
        for i, p in enumerate(self.sample.points):
            yield (i, *p, self.sample.weights[i], int(self.counts[i]))


def _walk_chunk(pair, side, pole, sample, cfg, n, key, trunc):
    rng = np.random.default_rng(key)
    d = pair.ambient_dim
    tree, h = sample.tree, sample.h
    c, L = trunc
    pos = np.tile(pole, (n, 1))
    counts = np.zeros(len(sample.points), dtype=np.int64)
    outer = censored = 0
    steps = 0
    active = np.arange(n)
    for _ in range(cfg.max_steps):
        if not len(active):
            break
        p = pos[active]
        dist, near = tree.query(p)
        r_in = dist - h
        r_out = L - np.linalg.norm(p - c, axis=1)
        hit_in = r_in <= cfg.eps_stop
        hit_out = ~hit_in & (r_out <= cfg.eps_stop)
        np.add.at(counts, near[hit_in], 1)
        outer += int(hit_out.sum())
        go = ~(hit_in | hit_out)
        active = active[go]
        if not len(active):
            break
        step = np.minimum(r_in[go], r_out[go])
        u = rng.standard_normal((len(active), d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        pos[active] += step[:, None] * u
        steps += len(active)
        # a jump across an unsampled piece of boundary lands on the wrong side
        crossed = pair.classify(pos[active]) != side
        censored += int(crossed.sum())
        active = active[~crossed]
    censored += len(active)
    return counts, outer, censored, steps


def wos_harmonic_measure(pair, side, pole, sample, config):
    """Exit distribution from `pole` over the sample cells (nearest-point Voronoi cells)."""
    config.validate(sample)
    pole = np.asarray(pole, float)
    if pair.classify(pole) != side:
        raise ConfigError("pole is not inside the chosen side")
    clearance = float(sample.tree.query(pole)[0])
    if clearance < config.c1 * sample.diam:
        raise ConfigError(f"pole clearance {clearance:.3g} below c1 * diam = {config.c1 * sample.diam:.3g}")
    trunc = config.truncation if config.truncation is not None else default_truncation(pair, sample)
    trunc = (np.asarray(trunc[0], float), float(trunc[1]))
    if np.linalg.norm(pole - trunc[0]) >= trunc[1]:
        raise ConfigError("pole lies outside the truncation ball")
    sizes = [min(CHUNK, config.walks - s) for s in range(0, config.walks, CHUNK)]

    def job(k):
        return _walk_chunk(pair, side, pole, sample, config, sizes[k], [config.seed, k], trunc)

    with ThreadPoolExecutor(max(1, config.threads)) as ex:
        parts = list(ex.map(job, range(len(sizes))))
    counts = np.zeros(len(sample.points), dtype=np.int64)
    outer = censored = steps = 0
    for c_, o, z, s in parts:  # fixed chunk order
        counts += c_
        outer += o
        censored += z
        steps += s
    res = HitCounts(side, pole, counts, outer, censored, config.walks, trunc, steps / config.walks, sample)
    if res.censored_fraction >= CENSOR_LIMIT:
        raise StatisticalFailure(f"censored fraction {res.censored_fraction:.2e} >= {CENSOR_LIMIT}")
    return res


# ---------------------------------------------------------------------------
# density ratios


def clopper_pearson(k, N, level=0.95):
    a = 1 - level
    lo = stats.beta.ppf(a / 2, k, N - k + 1) if k > 0 else 0.0
    hi = stats.beta.ppf(1 - a / 2, k + 1, N - k) if k < N else 1.0
    return float(lo), float(hi)


@dataclass
class DensityRatio:
    x: np.ndarray
    r: float
    theta: float
    lo: float
    hi: float
    hits: int
    total: int

    @property
    def undefined(self):
        return self.hits == 0


def density_ratio(counts, x, r, level=0.95):
    """omega(B(x, r)) / r^n with a Clopper-Pearson interval."""
    if r <= 0:
        raise ConfigError("radius must be positive")
    n = counts.sample.n
    k = counts.hits_in(x, r)
    lo, hi = clopper_pearson(k, counts.total, level)
    s = r ** n
    return DensityRatio(np.asarray(x, float), r, k / counts.total / s, lo / s, hi / s, k, counts.total)


@dataclass
class DensityRatioProfile:
    x: np.ndarray
    radii: np.ndarray
    ratios: list

    @property
    def theta(self):
        return np.array([d.theta for d in self.ratios])

    def rows(self):
        for d in self.ratios:
            yield (*self.x, d.r, d.theta, d.lo, d.hi)


def density_profile(counts, x, radii, level=0.95):
    radii = np.asarray(radii, float)
    return DensityRatioProfile(np.asarray(x, float), radii, [density_ratio(counts, x, r, level) for r in radii])


def cell_histogram(counts, labels, nbins):
    """Hits and sample mass per group of cells; `labels` maps each cell to a bin."""
    hits = np.bincount(labels, weights=counts.counts, minlength=nbins)
    mass = np.bincount(labels, weights=counts.sample.weights, minlength=nbins)
    return hits, mass


def uniformity_test(counts, labels, nbins):
    """Chi-square of bin hits against hits proportional to bin mass; returns (stat, p)."""
    hits, mass = cell_histogram(counts, labels, nbins)
    expected = mass / mass.sum() * hits.sum()
    res = stats.chisquare(hits, expected)
    return float(res.statistic), float(res.pvalue)


# ---------------------------------------------------------------------------
# log-ratio bounds


@dataclass
class LogRatioReport:
    value: float  # sum_x w_x log(theta(x, r) / theta(x, rho(x))) / r^n
    ci: float  # half-width, Clopper-Pearson ends combined
    value_doubled: float
    ci_doubled: float
    rel_change: float
    rho: np.ndarray
    centers: np.ndarray
    undefined: int
    rho_floor: float


def _rho(rule, r, m, floor):
    kind = rule[0]
    if kind == "fraction":
        rho = np.full(m, r * 2.0 ** -int(rule[1]))
    elif kind == "random":
        rng = np.random.default_rng(int(rule[1]))
        rho = np.exp(rng.uniform(np.log(floor), np.log(r), m))
    else:
        raise ConfigError(f"unknown rho rule {kind}")
    return np.maximum(rho, floor)


def _log_sum(counts, pts, w, r, rho, n):
    val = lo = hi = 0.0
    bad = 0
    for x, wx, rx in zip(pts, w, rho):
        a, b = density_ratio(counts, x, r), density_ratio(counts, x, rx)
        if a.undefined or b.undefined:
            bad += 1
            continue
        val += wx * np.log(a.theta / b.theta)
        lo += wx * np.log(a.lo / b.hi)
        hi += wx * np.log(a.hi / b.lo)
    if bad:
        return np.nan, np.nan, bad
    return val / r ** n, max(val - lo, hi - val) / r ** n, 0


def log_ratio_integral_check(pair, side, pole, sample, B, rho_rule, config, centers=64, counts=None):
    if not pair.chord_arc:
        raise ConfigError(f"{pair.kind} is not a chord-arc built-in")
    x0, r = np.asarray(B[0], float), float(B[1])
    idx = sample.ball(x0, r)
    if not len(idx):
        raise ConfigError("no sample point in B")
    mass = sample.weights[idx].sum()
    if len(idx) > centers:
        idx = idx[np.linspace(0, len(idx) - 1, centers).round().astype(int)]
    w = sample.weights[idx] * (mass / sample.weights[idx].sum())
    floor = 8 * config.eps_stop
    rho = _rho(rho_rule, r, len(idx), floor)
    pts = sample.points[idx]
    n = sample.n
    if counts is None:
        counts = wos_harmonic_measure(pair, side, pole, sample, config)
    big = WosConfig(**{**config.__dict__, "walks": 2 * config.walks})
    counts2 = wos_harmonic_measure(pair, side, pole, sample, big)
    v1, c1, bad1 = _log_sum(counts, pts, w, r, rho, n)
    v2, c2, bad2 = _log_sum(counts2, pts, w, r, rho, n)
    rel = abs(v2 - v1) / max(abs(v2), 1e-300)
    return LogRatioReport(v1, c1, v2, c2, rel, rho, pts, bad1 + bad2, floor)


@dataclass
class AcfLogReport:
    x: np.ndarray
    rho: float
    r: float
    lhs: float  # sum over shells of (alpha_1 + alpha_2 - 2) ln 2
    logs: float  # log(theta_1(r)/theta_1(rho)) + log(theta_2(r)/theta_2(rho))
    logs_lo: float
    logs_hi: float
    shells: np.ndarray

    def margin(self, C):
        return self.lhs - C * self.logs - C

    def row(self, C=np.nan):
        return (*self.x, self.rho, self.r, self.lhs, self.logs, self.logs_lo, self.logs_hi, self.margin(C))


def acf_log_bound_check(pair, x, rho, r, hits1, hits2, grid=None):
    if not pair.chord_arc:
        raise ConfigError(f"{pair.kind} is not chord-arc at every scale")
    x = np.asarray(x, float)
    sample = hits1.sample
    delta_x = float(sample.tree.query(x)[0])
    if pair.classify(x) != NEITHER and delta_x > sample.h:
        raise ConfigError("x must lie on the boundary")
    reach = min(np.linalg.norm(x - hits1.pole), np.linalg.norm(x - hits2.pole)) / 4
    if not (2 * delta_x <= rho <= r <= reach):
        raise ConfigError(f"need 2 delta_x <= rho <= r <= {reach:.4g}")
    if grid is None:
        grid = build_grid(pair.ambient_dim - 1, 4)
    K = max(1, int(round(np.log2(r / rho))))
    t = r * 2.0 ** -(np.arange(K) + 0.5)
    shells = np.array([a_coefficient(pair, x, tk, grid, detail=True).deficit for tk in t])
    lhs = float(np.sum(shells) * np.log(2.0))
    logs = lo = hi = 0.0
    for hc in (hits1, hits2):
        a, b = density_ratio(hc, x, r), density_ratio(hc, x, rho)
        if a.undefined or b.undefined:
            raise StatisticalFailure("zero hits in a density-ratio ball; raise the walk count or rho")
        logs += np.log(a.theta / b.theta)
        lo += np.log(a.lo / b.hi)
        hi += np.log(a.hi / b.lo)
    return AcfLogReport(x, rho, r, lhs, float(logs), float(lo), float(hi), shells)


@dataclass
class Calibration:
    C: float
    violations: int
    checked: int


def calibrate_log_bound(reports, fit=0.5, factor=CALIBRATION_FACTOR):
    """C = factor * max LHS/(logs + 1) over the first `fit` share, then hold-out violations beyond the CI."""
    m = max(1, int(round(fit * len(reports))))
    C = 0.0
    for rep in reports[:m]:
        den = rep.logs + 1
        if den <= 0:
            if rep.lhs > 0:
                return Calibration(np.inf, 0, len(reports) - m)
            continue
        C = max(C, rep.lhs / den)
    C *= factor
    viol = sum(rep.lhs > C * (rep.logs_hi + 1) for rep in reports[m:])
    return Calibration(C, int(viol), len(reports) - m)


@dataclass
class DoublingReport:
    C: float
    ratios: np.ndarray
    n: int


def doubling_check(counts, xs, radii):
    """theta(x, 2r) / theta(x, r) over probes; C is the smallest constant with ratio in [2^-n / C, C]."""
    n = counts.sample.n
    ratios = []
    for x, r in zip(xs, radii):
        a, b = density_ratio(counts, x, 2 * r), density_ratio(counts, x, r)
        if b.undefined:
            raise StatisticalFailure("zero hits in a doubling probe")
        ratios.append(a.theta / b.theta)
    ratios = np.array(ratios)
    C = float(max(ratios.max(), 2.0 ** -n / ratios.min()))
    return DoublingReport(C, ratios, n)
