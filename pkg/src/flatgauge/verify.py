"""The acceptance suite behind ``flatgauge verify-all``.

Each check returns a :class:`Criterion` with CSV tables. Timings are kept out
of the tables so two runs with the same seed give byte-identical files.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import acf, carleson, coefficients, corona, harmonic, lattice, spectra
from .artifacts import Table
from .domains import CATALOG_SEVEN, IN1, IN2, make_builtin, sample_boundary
from .sphere import RegionMask, build_grid, trace_region

CALIBRATION_FACTOR = harmonic.CALIBRATION_FACTOR


@dataclass
class Criterion:
    id: int
    name: str
    passed: bool
    detail: str
    tables: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.id:2d} {self.name}: {self.detail}"


@dataclass
class Context:
    seed: int = 0
    threads: int = 1


def _timed(fn):
    def run(ctx):
        t0 = time.perf_counter()
        c = fn(ctx)
        c.seconds = time.perf_counter() - t0
        return c
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def calibrate(ratios, fit=0.5, factor=CALIBRATION_FACTOR):
    """C = factor * max over the first share; returns (C, hold-out violations, hold-out count)."""
    ratios = np.asarray(ratios, float)
    m = int(round(fit * len(ratios)))
    C = factor * float(np.max(ratios[:m]))
    return C, int(np.sum(ratios[m:] > C)), len(ratios) - m


# ---------------------------------------------------------------------------
# 1-5: quadrature, null tests, spectra


@_timed
def c01_quadrature(ctx):
    t = Table("quadrature", ("n", "level", "nodes", "sum", "target", "abs_err"))
    t0 = time.perf_counter()
    ok = True
    for level in range(6):
        g = build_grid(1, level)
        s = float(g.weights.sum())
        t.add(1, level, len(g.nodes), s, 2 * np.pi, abs(s - 2 * np.pi))
        ok &= abs(s - 2 * np.pi) <= 1e-12
    g = build_grid(2, 5)
    s = float(g.weights.sum())
    t.add(2, 5, len(g.nodes), s, 4 * np.pi, abs(s - 4 * np.pi))
    ok &= abs(s - 4 * np.pi) <= 1e-3 * 4 * np.pi
    fast = time.perf_counter() - t0 < 1.0
    return Criterion(1, "sphere quadrature", bool(ok and fast),
                     f"S1 levels 0-5 within 1e-12, S2 level 5 rel err {abs(s - 4 * np.pi) / (4 * np.pi):.2e}"
                     + ("" if fast else "; runtime over 1 s"), {"c01_quadrature": t})


def _flat_table(pair, h, grid, ctx, centers=20, R=0.5, m=7):
    s = sample_boundary(pair, h, seed=ctx.seed)
    idx = s.ball(np.zeros(pair.ambient_dim), R)
    idx = idx[np.linspace(0, len(idx) - 1, centers).round().astype(int)]
    return coefficients.build_table(pair, s, idx, R, m, grid, ("eps_n", "a"), ctx.threads)


@_timed
def c02_flat_null(ctx):
    t = Table("flat_null", ("dim", "center", "j", "r", "eps_n", "a"))
    t0 = time.perf_counter()
    out = {}
    for dim, h, grid in ((2, 1e-3, build_grid(1, 3)), (3, 0.02, build_grid(2, 5))):
        tab = _flat_table(make_builtin({"kind": "halfspace", "dim": dim}), h, grid, ctx)
        e, a = tab.values["eps_n"], tab.values["a"]
        for i in range(len(tab.centers)):
            for j, r in enumerate(tab.scales):
                t.add(dim, int(tab.centers[i]), j, r, e[i, j], a[i, j])
        out[dim] = (float(np.max(e)), float(np.max(a)), e.shape)
    secs = time.perf_counter() - t0
    ok = (out[2][0] <= 5e-3 and out[2][1] <= 1e-6 and out[3][0] <= 5e-3 and out[3][1] <= 2e-2
          and out[2][2] == (20, 8) and out[3][2] == (20, 8) and secs < 120)
    return Criterion(2, "flat null test", bool(ok),
                     f"S1 max eps {out[2][0]:.2e} max a {out[2][1]:.2e}; "
                     f"S2 max eps {out[3][0]:.2e} max a {out[3][1]:.2e}" + ("" if secs < 120 else "; over 2 min"),
                     {"c02_flat_null": t})


def cone_eps_oracle(gamma, n_dir=2000, m=20000):
    """Dense sweep of half-plane directions against a fine angle grid."""
    th = (np.arange(m) + 0.5) * 2 * np.pi / m
    in1 = np.sin(th) > np.abs(np.cos(th)) * np.tan(gamma)
    in2 = np.sin(th) < -np.abs(np.cos(th)) * np.tan(gamma)
    best = np.inf
    for p in np.arange(n_dir) * 2 * np.pi / n_dir:
        up = np.sin(th - p) > 0
        best = min(best, (np.sum(up & ~in1) + np.sum(~up & ~in2)) * 2 * np.pi / m)
    return best


@_timed
def c03_cone(ctx):
    t = Table("cone", ("gamma", "r", "eps_n", "eps_expected", "eps_oracle", "a", "a_expected"))
    g = build_grid(1, 3)
    ok = True
    worst_e = worst_a = 0.0
    for gamma in (0.1, 0.2):
        pair = make_builtin({"kind": "cone", "gamma": gamma})
        oracle = cone_eps_oracle(gamma)
        a_exp = min(1.0, 2 * np.pi / (np.pi - 2 * gamma) - 2)
        for r in (0.1, 0.5, 1.0):
            e = coefficients.epsilon_n(pair, np.zeros(2), r, g)
            a = spectra.a_coefficient(pair, np.zeros(2), r, g)
            t.add(gamma, r, e, 4 * gamma, oracle, a, a_exp)
            worst_e = max(worst_e, abs(e - 4 * gamma) / (4 * gamma))
            worst_a = max(worst_a, abs(a - a_exp))
            ok &= abs(e - 4 * gamma) <= 0.02 * 4 * gamma and abs(a - a_exp) <= 1e-6
            ok &= e <= oracle + 2e-3
        ok &= abs(oracle - 4 * gamma) <= 2e-3
    return Criterion(3, "cone pair coefficients", bool(ok),
                     f"eps rel err {worst_e:.2e}, a abs err {worst_a:.2e}", {"c03_cone": t})


def _hemisphere_lambda(level):
    p = make_builtin({"kind": "halfspace", "dim": 3})
    m1, _ = trace_region(p, np.zeros(3), 1.0, build_grid(2, level))
    return spectra.lambda1_fem(m1.grid, m1)


@_timed
def c04_spectra(ctx):
    t = Table("spectra", ("case", "level", "lambda1", "expected", "rel_err", "solve_s_ok"))
    ok = True
    errs = []
    for level in range(3, 7):
        t0 = time.perf_counter()
        c = _hemisphere_lambda(level)
        fast = time.perf_counter() - t0 < 60
        errs.append(abs(c.lambda1 - 2.0))
        t.add("hemisphere", level, c.lambda1, 2.0, errs[-1] / 2, int(fast))
        ok &= fast
    ok &= errs[2] <= 0.04
    red = [a / b for a, b in zip(errs, errs[1:])]
    ok &= min(red) >= 3
    cap_err = 0.0
    for theta0 in (np.pi / 3, 2 * np.pi / 3):
        u = np.array([0.3, -0.2, 1.0])
        p = make_builtin({"kind": "caps", "u1": u, "u2": -u, "rho1": theta0,
                          "rho2": min(0.3, np.pi - theta0 - 0.1)})
        t0 = time.perf_counter()
        m1, _ = trace_region(p, np.zeros(3), 1.0, build_grid(2, 5))
        lam = spectra.lambda1_fem(m1.grid, m1).lambda1
        fast = time.perf_counter() - t0 < 60
        ref = spectra.cap_lambda1_oracle(theta0)
        cap_err = max(cap_err, abs(lam - ref) / ref)
        t.add(f"cap {theta0:.6f}", 5, lam, ref, abs(lam - ref) / ref, int(fast))
        ok &= fast and abs(lam - ref) <= 0.02 * ref
    return Criterion(4, "spectra", bool(ok),
                     f"hemisphere level 5 rel err {errs[2] / 2:.2e}, min error reduction {min(red):.2f}, "
                     f"cap rel err {cap_err:.2e}", {"c04_spectra": t})


def quadric_field(grid, seed):
    """Random linear plus quadratic function on the sphere nodes, used to carve masks."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(3)
    B = rng.standard_normal((3, 3))
    X = grid.nodes
    return X @ a + 0.7 * np.einsum("ij,jk,ik->i", X, B + B.T, X)


@_timed
def c05_eigen_monotone(ctx):
    g = build_grid(2, 3)
    t = Table("eigen_monotone", ("test", "case", "lambda_big_or_alpha1", "lambda_small_or_alpha2", "value"))
    worst = np.inf
    used = 0
    for k in range(100):
        f = quadric_field(g, ctx.seed * 100_000 + k)
        t1, t2 = np.quantile(f, [0.3, 0.6])
        big = spectra.lambda1_fem(g, RegionMask.from_nodes(g, f > t1))
        small = spectra.lambda1_fem(g, RegionMask.from_nodes(g, f > t2))
        if big.empty or small.empty:
            continue
        used += 1
        worst = min(worst, small.lambda1 - big.lambda1)
        t.add("nested", k, big.lambda1, small.lambda1, small.lambda1 - big.lambda1)
    viol = sum(1 for r in t.rows if r[4] < -1e-10)
    deficits = []
    for k in range(200):
        f = quadric_field(g, ctx.seed * 100_000 + 1000 + k)
        q = np.random.default_rng(ctx.seed * 100_000 + k).uniform(0.1, 0.5)
        lo, hi = np.quantile(f, [q, q + 0.05])
        rec = spectra.a_from_masks(RegionMask.from_nodes(g, f > hi), RegionMask.from_nodes(g, f < lo))
        deficits.append(rec.deficit)
        t.add("disjoint", k, rec.alpha1, rec.alpha2, rec.deficit)
    ok = viol == 0 and used >= 90 and min(deficits) >= -spectra.FH_SLACK
    return Criterion(5, "eigenvalue monotonicity", bool(ok),
                     f"{viol} nested violations over {used} pairs (worst gap {worst:.3e}); "
                     f"min Friedland-Hayman deficit {min(deficits):.3e} over 200", {"c05_eigen_monotone": t})


# ---------------------------------------------------------------------------
# 6-8: coefficient inequalities and ACF


def near_halfspace_sectors(seed, count, spread=0.2):
    """Sector pairs whose four edges sit within `spread` of a rotated pair of half-planes."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        e = rng.uniform(0, spread, 4)
        u = rng.uniform(0, 2 * np.pi)
        out.append(make_builtin({"kind": "sector", "a1": u + e[0], "b1": u + np.pi - e[1],
                                 "a2": u + np.pi + e[2], "b2": u + 2 * np.pi - e[3]}))
    return out


@_timed
def c06_eps_vs_a(ctx):
    g = build_grid(1, 3)
    t = Table("eps_vs_a", ("case", "a1", "b1", "a2", "b2", "eps_n", "a", "ratio"))
    ratios = []
    for k, pair in enumerate(near_halfspace_sectors([ctx.seed, 6], 100)):
        e = coefficients.epsilon_n(pair, np.zeros(2), 1.0, g)
        a = spectra.a_coefficient(pair, np.zeros(2), 1.0, g)
        ratio = e * e / a if a > 0 else (0.0 if e == 0 else np.inf)
        ratios.append(ratio)
        p = pair.params
        t.add(k, p["a1"], p["b1"], p["a2"], p["b2"], e, a, ratio)
    C, viol, n = calibrate(ratios)
    return Criterion(6, "eps^2 <= C a", bool(viol == 0 and np.isfinite(C)),
                     f"C = {C:.4g} from 50 configs, {viol} violations on {n} fresh configs", {"c06_eps_vs_a": t})


@_timed
def c07_eps_beta(ctx):
    pair = make_builtin({"kind": "graph", "slope": 0.3})
    s = sample_boundary(pair, 2e-3, seed=ctx.seed)
    g = build_grid(1, 3)
    rng = np.random.default_rng([ctx.seed, 7])
    inner = np.flatnonzero(np.abs(s.points[:, 0]) <= 0.5)
    t = Table("eps_beta", ("case", "x", "y", "r", "lhs", "rhs", "ratio"))
    ratios = []
    for k in range(100):
        x = s.points[inner[rng.integers(len(inner))]]
        r = float(np.exp(rng.uniform(np.log(0.05), np.log(0.3))))
        rep = coefficients.epsilon_beta_bound_check(pair, s, x, r, g)
        ratios.append(rep.ratio)
        t.add(k, x[0], x[1], r, rep.lhs, rep.rhs, rep.ratio)
    C, viol, n = calibrate(ratios)
    return Criterion(7, "eps octave integral vs centred beta", bool(viol == 0 and np.isfinite(C)),
                     f"C = {C:.4g} from 50 cases, {viol} violations on {n}", {"c07_eps_beta": t})


@_timed
def c08_acf(ctx):
    t = Table("acf", ("field", "r", "J", "dlogJ", "alpha_sum", "slack"))
    half = acf.acf_monotonicity_check(acf.halfspace_field(), r_range=(0.1, 1.0), steps=11)
    for row in half.rows():
        t.add("halfspace", *row)
    J0 = np.pi ** 2 / 4
    ok_half = np.all(np.abs(half.J - J0) <= 5e-3 * J0) and half.J.max() / half.J.min() - 1 <= 5e-3
    cone = acf.acf_monotonicity_check(acf.cone_field(0.2), r_range=(0.1, 1.0), steps=15)
    for row in cone.rows():
        t.add("cone 0.2", *row)
    rhs = 2 / cone.r * cone.alpha_sum
    rel = np.abs(cone.slack[1:-1]) / np.abs(rhs[1:-1])
    exact = acf.cone_J_exact(0.2, cone.r)
    J_err = float(np.max(np.abs(cone.J / exact - 1)))
    ok_cone = np.all(rel <= 0.01) and J_err <= 1e-2
    f = acf.cone_field(0.15)
    base = acf.acf_J(f, np.zeros(2), 0.6, quad_level=0)
    hom = max(abs(acf.acf_J(f.scaled(c), np.zeros(2), 0.6, quad_level=0) / (c ** 4 * base) - 1)
              for c in (0.01, 0.5, 3.0, 100.0))
    for c in (0.01, 0.5, 3.0, 100.0):
        t.add(f"scaled {c}", 0.6, acf.acf_J(f.scaled(c), np.zeros(2), 0.6, quad_level=0), np.nan, np.nan,
              c ** 4 * base)
    ok = bool(ok_half and ok_cone and hom <= 1e-10)
    return Criterion(8, "ACF functional", ok,
                     f"half-space max rel dev {np.max(np.abs(half.J - J0)) / J0:.2e}; cone max rel slack "
                     f"{rel.max():.2e}, J vs closed form {J_err:.1e}; homogeneity rel err {hom:.1e}", {"c08_acf": t})


# ---------------------------------------------------------------------------
# 9-10: lattice and corona


@_timed
def c09_lattice(ctx):
    t = Table("lattice_axioms", ("domain", "points", "partition", "nesting", "center_in_cube", "diam_constant",
                                 "in_envelope"))
    ok = True
    cases = (("disk", {"kind": "disk"}, 2 * np.pi / 1e4, 7, True),
             ("cantor", {"kind": "cantor", "gen": 6}, 4.0 ** -6, 10, False),
             ("square", {"kind": "square"}, 8 / 1e4, 7, True),
             ("graph", {"kind": "graph", "slope": 0.3}, 5e-4, 7, True))
    for name, desc, h, jm, ur in cases:
        s = sample_boundary(make_builtin(desc), h, seed=ctx.seed)
        lat = lattice.build_lattice(s, jm, seed=ctx.seed)
        rep = lattice.check_lattice(lat, collar_generations=[])
        t.add(name, len(s.points), int(rep.partition_ok), int(rep.nesting_ok), int(rep.center_in_cube),
              rep.diam_constant, rep.mass_fraction_in_envelope)
        ok &= rep.partition_ok and rep.nesting_ok
        if ur:
            ok &= rep.mass_fraction_in_envelope >= 0.95
    env = [r[6] for r in t.rows if r[0] != "cantor"]
    return Criterion(9, "lattice axioms", bool(ok),
                     f"partition and nesting exact on {len(cases)} samples; min envelope fraction on UR "
                     f"{min(env):.3f}", {"c09_lattice": t})


def circle_packing(ctx):
    h = 2.0 ** -19 / 4
    pair = make_builtin({"kind": "disk"})
    s = sample_boundary(pair, h, seed=ctx.seed, window=((0.0, 1.0), 0.02))
    lat = lattice.build_lattice(s, 19, seed=ctx.seed)
    R0 = corona.cube_at(lat, [0.0, 1.0], 11)
    return corona.build_top(lat, R0, corona.CoronaParams(), depth=8, threads=ctx.threads)


@_timed
def c10_corona(ctx):
    tables = {}
    F = circle_packing(ctx)
    t = Table("corona_circle", ("cube", "k", "bbeta_k1", "angle", "n_stop", "n_tree", "sigma_Z", "mass_fraction"))
    for row in F.rows():
        t.add(*row)
    tables["c10_corona_circle"] = t
    ok_pack = F.packing <= 5
    pair = make_builtin({"kind": "cantor", "gen": 4})
    s = sample_boundary(pair, 4.0 ** -4 / 16, seed=ctx.seed)
    lat = lattice.build_lattice(s, 8, seed=ctx.seed)
    C = corona.build_top(lat, (lat.j0, 0), depth=6, threads=ctx.threads)
    counts = [len(level) for level in C.top]
    full = [lat.count(j) for j in range(lat.j0, lat.j0 + 7)]
    tc = Table("corona_cantor", ("k", "top_count", "generation_count"))
    for k, (a, b) in enumerate(zip(counts, full)):
        tc.add(k, a, b)
    tables["c10_corona_cantor"] = tc
    ok_cantor = counts == full
    ts = Table("corona_subdomains", ("domain", "label_plus", "label_minus", "purity_plus", "purity_minus",
                                     "violations", "sep_violation_fraction", "inradius_plus", "inradius_minus"))
    viol = 0
    reps = [("circle", corona.subdomains(F.records[F.root], make_builtin({"kind": "disk"}), seed=ctx.seed))]
    for name, desc, x in (("line", {"kind": "halfspace", "width": 4.0}, [0.0, 0.0]),
                          ("graph 0.05", {"kind": "graph", "slope": 0.05, "width": 4.0}, [0.0, 0.0]),
                          ("graph 0.3", {"kind": "graph", "slope": 0.3, "width": 4.0}, [0.0, 0.0]),
                          ("square", {"kind": "square"}, [1.0, 0.0])):
        p = make_builtin(desc)
        sp = sample_boundary(p, 2e-4 if name != "line" else 1e-4, seed=ctx.seed)
        lt = lattice.build_lattice(sp, 10, seed=ctx.seed)
        rec = corona.tree_record(lt, corona.cube_at(lt, x, 5))
        reps.append((name, corona.subdomains(rec, p, seed=ctx.seed)))
    for name, rep in reps:
        viol += rep.violations
        ts.add(name, rep.label_plus, rep.label_minus, rep.purity_plus, rep.purity_minus, rep.violations,
               rep.sep_violation_fraction, rep.inradius_plus, rep.inradius_minus)
    tables["c10_corona_subdomains"] = ts
    ok = bool(ok_pack and ok_cantor and viol == 0)
    return Criterion(10, "corona packing", ok,
                     f"circle packing ratio {F.packing:.4f} at depth 8; Cantor Top counts {counts} "
                     f"{'match' if ok_cantor else 'differ from'} generations; {viol} purity violations on {len(reps)} UR trees", tables)


# ---------------------------------------------------------------------------
# 11-13: Carleson, corkscrews, harmonic measure

EXPECTED_CLASS = {"halfspace": "bounded", "disk": "bounded", "graph": "bounded", "square": "bounded",
                  "cone": "diverging", "strip": "diverging", "cantor": "diverging"}
STRIP_W = 1 / 16
SQUARE_C = 2.0  # recorded bound for the log-ratio sum on the square, balls of radius 0.5


@_timed
def c11_carleson(ctx):
    t0 = time.perf_counter()
    t = Table("carleson", ("domain", "coeff", "j", "increment", "S", "slope", "verdict", "expected"))
    cfg = carleson.VerdictConfig(seed=ctx.seed, threads=ctx.threads)
    results = {}
    for kind in CATALOG_SEVEN:
        pair = make_builtin({"kind": kind, "w": STRIP_W} if kind == "strip" else {"kind": kind})
        res = carleson.strong_geometric_verdict(pair, cfg)
        results[kind] = res
        for c, rep in res.reports.items():
            for j, inc, S, _, _ in rep.rows():
                t.add(kind, c, j, inc, S, rep.slope, rep.verdict, EXPECTED_CLASS[kind])
    mis = [k for k, r in results.items() if ("diverging" if r.diverging else "bounded") != EXPECTED_CLASS[k]]
    ok = not mis
    for kind in ("disk", "graph"):
        ok &= all(r.slope < 0.05 for r in results[kind].reports.values())
    # strip increments below w against pi^2 ln2 sigma(B)/r and ln2 sigma(B)/r
    strip = results["strip"].reports
    pair = make_builtin({"kind": "strip", "w": STRIP_W})
    s = sample_boundary(pair, cfg.h, seed=cfg.seed)
    x0, R = strip["eps_n"].center, strip["eps_n"].radius
    frac = s.mass(x0, R) / R
    sub = [j for j in range(strip["eps_n"].depth + 1) if R * 2.0 ** -j < STRIP_W]
    err_e = float(np.max(np.abs(strip["eps_n"].increments[sub] / (np.pi ** 2 * np.log(2) * frac) - 1)))
    err_a = float(np.max(np.abs(strip["a"].increments[sub] / (np.log(2) * frac) - 1)))
    strip_err = max(err_e, err_a)
    ok &= strip_err <= 0.1
    cantor_a = results["cantor"].reports["a"]
    ok &= cantor_a.verdict == "diverging" and cantor_a.slope >= 0.3 * np.log(2)
    ok &= time.perf_counter() - t0 < 600
    return Criterion(11, "Carleson dichotomy", bool(ok),
                     f"{len(mis)} misclassifications; strip increment max rel err {strip_err:.3f}; "
                     f"Cantor a slope {cantor_a.slope:.4f}", {"c11_carleson": t})


@_timed
def c12_corkscrew(ctx):
    t = Table("corkscrew", ("domain", "forced_K", "side", "found", "K", "cx", "cy", "radius", "expected_radius",
                            "purity", "scale_ok", "reason"))
    R, delta, tau = 0.5, 0.1, 1 / 20
    k0 = int(np.ceil(np.log2(1 / delta)))
    ok = True

    def record(kind, forced, certs):
        for c in certs:
            cx, cy = c.center if c.center is not None else (np.nan, np.nan)
            t.add(kind, forced, c.side, int(c.found), c.K, cx, cy, c.radius, tau * 2.0 ** (-c.K - 1) * R,
                  c.purity, int(c.scale_ok), c.reason)

    for kind in ("halfspace", "graph", "cantor"):
        pair = make_builtin({"kind": kind})
        s = sample_boundary(pair, 1e-3, seed=ctx.seed)
        x0 = s.points[int(s.tree.query([0.0, 0.0])[1])]
        certs = carleson.corkscrew_locate(pair, s, x0, R, delta, tau, seed=ctx.seed)
        record(kind, "", certs)
        if kind == "cantor":
            ok &= not certs[1].found and not certs[0].scale_ok
            for K in range(4, 9):
                forced = carleson.corkscrew_locate(pair, s, x0, R, delta, tau, K=K, seed=ctx.seed)
                record(kind, K, forced)
                ok &= not forced[1].found and bool(forced[1].reason)
                ok &= forced[1].radius == tau * 2.0 ** (-K - 1) * R
        else:
            for c, side in zip(certs, (IN1, IN2)):
                ok &= c.found and c.purity == 1.0 and c.K >= k0 and c.radius == tau * 2.0 ** (-c.K - 1) * R
                ok &= c.found and int(pair.classify(c.center)) == side
    return Criterion(12, "corkscrew locator", bool(ok),
                     "half-space and graph: pure balls on both sides at the certified radius; "
                     "Cantor: second side empty for K = 4..8" if ok else "see c12_corkscrew.csv",
                     {"c12_corkscrew": t})


def poisson_arc(rho, a, b):
    """Harmonic measure of the arc (a, b) of the unit circle from the pole (rho, 0)."""
    F = lambda t: np.arctan((1 + rho) / (1 - rho) * np.tan(t / 2)) / np.pi
    return float(F(b) - F(a))


@_timed
def c13_wos(ctx):
    t0 = time.perf_counter()
    tables = {}
    H = 1e-3
    cfg = harmonic.WosConfig(eps_stop=2 * H, walks=100_000, seed=ctx.seed, threads=ctx.threads)
    disk = make_builtin({"kind": "disk"})
    sd = sample_boundary(disk, H, seed=ctx.seed)
    th = np.arctan2(sd.points[:, 1], sd.points[:, 0])
    center = harmonic.wos_harmonic_measure(disk, IN1, [0, 0], sd, cfg)
    lab = np.minimum(((th % (2 * np.pi)) / (2 * np.pi) * 64).astype(int), 63)
    chi2, p = harmonic.uniformity_test(center, lab, 64)
    hits, mass = harmonic.cell_histogram(center, lab, 64)
    tw = Table("wos_arcs", ("bin", "hits", "mass"))
    for k in range(64):
        tw.add(k, int(hits[k]), mass[k])
    tables["c13_wos_arcs"] = tw
    off = harmonic.wos_harmonic_measure(disk, IN1, [0.5, 0], sd, cfg)
    sel = np.abs(th) < np.pi / 8
    half = np.pi / len(th)
    ex = poisson_arc(0.5, th[sel].min() - half, th[sel].max() + half)
    pr = off.counts[sel].sum() / off.total
    z = (pr - ex) / np.sqrt(ex * (1 - ex) / off.total)
    sq = make_builtin({"kind": "square"})
    ss = sample_boundary(sq, H, seed=ctx.seed)
    hs = harmonic.wos_harmonic_measure(sq, IN1, [0, 0], ss, cfg)
    tl = Table("wos_log_ratio", ("domain", "bx", "by", "r", "value", "ci", "value_doubled", "rel_change"))
    ok52 = True
    vals = []
    for B in (((1.0, 0.0), 0.5), ((1.0, 1.0), 0.5)):
        rep = harmonic.log_ratio_integral_check(sq, IN1, [0, 0], ss, B, ("fraction", 4), cfg, counts=hs)
        tl.add("square", B[0][0], B[0][1], B[1], rep.value, rep.ci, rep.value_doubled, rep.rel_change)
        ok52 &= rep.undefined == 0 and rep.rel_change <= 0.1
        vals.append(rep.value)
    tables["c13_wos_log_ratio"] = tl
    outside = harmonic.wos_harmonic_measure(disk, IN2, [0, -2.5], sd, cfg)
    ta = Table("wos_acf_log", ("x", "y", "rho", "r", "lhs", "logs", "logs_lo", "logs_hi", "margin"))
    reps = []
    for ang in np.linspace(0, 2 * np.pi, 20, endpoint=False):
        x = sd.points[int(sd.tree.query([np.cos(ang), np.sin(ang)])[1])]
        reps.append(harmonic.acf_log_bound_check(disk, x, 0.025, 0.2, center, outside))
    cal = harmonic.calibrate_log_bound(reps)
    for rep in reps:
        ta.add(*rep.row(cal.C))
    tables["c13_wos_acf_log"] = ta
    secs = time.perf_counter() - t0
    ok = p > 0.01 and abs(z) <= 3 and ok52 and max(vals) <= SQUARE_C and np.isfinite(cal.C) and cal.violations == 0 and secs < 300
    for hc in (center, off, hs, outside):
        ok &= hc.censored_fraction < 1e-3
    return Criterion(13, "walk on spheres", bool(ok),
                     f"chi2 p = {p:.3f}; Poisson z = {z:+.2f}; square log-ratio values {vals[0]:.3f}, {vals[1]:.3f}"
                     f" (recorded C = {SQUARE_C}); log bound C = {cal.C:.3g}, {cal.violations} violations"
                     + ("" if secs < 300 else "; over 5 min"), tables)


CHECKS = (c01_quadrature, c02_flat_null, c03_cone, c04_spectra, c05_eigen_monotone, c06_eps_vs_a,
          c07_eps_beta, c08_acf, c09_lattice, c10_corona, c11_carleson, c12_corkscrew, c13_wos)


def run_all(ctx, only=None, log=None):
    out = []
    for chk in CHECKS:
        if only is not None and int(chk.__name__[1:3]) not in only:
            continue
        c = chk(ctx)
        out.append(c)
        if log is not None:
            log(f"{c.line()}  ({c.seconds:.1f} s)")
    return out


def summary_table(results, digest=None):
    t = Table("acceptance", ("id", "name", "passed", "detail"))
    for c in results:
        t.add(c.id, c.name, int(c.passed), c.detail)
    if digest is not None:
        t.add(14, "determinism", "", f"sha256 of the other artifacts {digest}")
    return t
