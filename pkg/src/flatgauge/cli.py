"""Command-line entry point: ``flatgauge <command> [--config PATH] [--seed N] [--out DIR] [--threads N]``.

Every command collects its tables in memory and writes them only once the
computation has finished, so a failed run leaves no partial CSVs.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import acf, carleson, coefficients, config, corona, harmonic, lattice, spectra, verify
from .artifacts import Table, render, write_tables
from .domains import CATALOG_SEVEN, make_builtin, sample_boundary
from .errors import ConfigError, FlatgaugeError, VerificationFailure
from .sphere import build_grid

# descriptors for the kinds that have no usable defaults
CATALOG_EXTRA = (
    {"kind": "bump"},
    {"kind": "sector", "a1": 0.1, "b1": 3.0, "a2": 3.3, "b2": 6.1},
    {"kind": "caps", "u1": [0.0, 0.0, 1.0], "u2": [0.0, 0.0, -1.0], "rho1": 1.2, "rho2": 1.2},
)


def _grid(pair, cfg):
    d = pair.ambient_dim
    return build_grid(d - 1, cfg.grid.level_s1 if d == 2 else cfg.grid.level_s2)


def _sample(pair, cfg, seed):
    return sample_boundary(pair, cfg.sample.h, seed=seed, window=cfg.sample.window)


def _anchor(sample, anchor, pair):
    if anchor is None:
        anchor = pair.bbox.mean(axis=0)
    return sample.points[int(sample.tree.query(np.asarray(anchor, float))[1])]


def cmd_domains(cfg, pair, seed, threads):
    t = Table("domains", ("kind", "dim", "chord_arc", "sampler", "params"))
    descs = [{"kind": k} for k in CATALOG_SEVEN] + list(CATALOG_EXTRA)
    for d in descs:
        p = make_builtin(d)
        t.add(p.kind, p.ambient_dim, int(p.chord_arc), int(p._sampler is not None),
              json.dumps(p.params, sort_keys=True))
    s = _sample(pair, cfg, seed)
    ts = Table("sample", ("i", *("x", "y", "z")[:pair.ambient_dim], "weight"))
    for i, (x, w) in enumerate(zip(s.points, s.weights)):
        ts.add(i, *x, w)
    ta = Table("adr", ("kind", "h", "points", "total_mass", "adr_lo", "adr_hi"))
    ta.add(pair.kind, s.h, len(s.points), s.total_mass, *s.adr)
    return {"domains": t, "sample": ts, "adr": ta}


def cmd_coeff(cfg, pair, seed, threads):
    c = cfg.coeff
    s = _sample(pair, cfg, seed)
    x0 = _anchor(s, c.anchor, pair)
    idx = s.ball(x0, c.R)
    if len(idx) > c.centers:
        idx = idx[np.linspace(0, len(idx) - 1, c.centers).round().astype(int)]
    tab = coefficients.build_table(pair, s, idx, c.R, c.depth, _grid(pair, cfg), c.which, threads)
    axes = ("x", "y", "z")[:pair.ambient_dim]
    t = Table("coeff", ("center", *axes, "weight", "j", "r", *c.which, "flags"))
    for i, ci in enumerate(tab.centers):
        for j, r in enumerate(tab.scales):
            t.add(int(ci), *tab.points[i], tab.weights[i], j, r, *(tab.values[k][i, j] for k in c.which),
                  tab.flags[i, j])
    return {"coeff": t}


def cmd_spectra(cfg, pair, seed, threads):
    c = cfg.coeff
    x = np.zeros(pair.ambient_dim) if c.anchor is None else np.asarray(c.anchor, float)
    g = _grid(pair, cfg)
    t = Table("spectra", ("j", "r", "alpha1", "alpha2", "deficit", "a", "eps_n", "flags"))
    for j in range(c.depth + 1):
        r = c.R * 2.0 ** -j
        rec = spectra.a_coefficient(pair, x, r, g, detail=True)
        t.add(j, r, rec.alpha1, rec.alpha2, rec.deficit, rec.value, coefficients.epsilon_n(pair, x, r, g),
              "|".join(rec.flags))
    return {"spectra": t}


def cmd_acf(cfg, pair, seed, threads):
    a = cfg.acf
    fld = acf.halfspace_field() if a.field == "halfspace" else acf.cone_field(a.gamma)
    prof = acf.acf_monotonicity_check(fld, r_range=(a.r_min, a.r_max), steps=a.steps, quad_level=a.quad_level)
    t = Table("acf", ("r", "J", "dlogJ", "alpha_sum", "slack"))
    for row in prof.rows():
        t.add(*row)
    return {"acf": t}


def cmd_lattice(cfg, pair, seed, threads):
    s = _sample(pair, cfg, seed)
    lat = lattice.build_lattice(s, cfg.lattice.j_max, seed=seed)
    axes = ("x", "y", "z")[:pair.ambient_dim]
    t = Table("lattice", ("cube", "j", *axes, "side", "mass", "parent"))
    for row in lat.rows():
        t.add(*row)
    rep = lattice.check_lattice(lat, collar_generations=[])
    tr = Table("lattice_report", ("partition", "nesting", "center_in_cube", "diam_constant", "diam_lower",
                                  "separation_constant", "envelope_lo", "envelope_hi", "in_envelope"))
    tr.add(int(rep.partition_ok), int(rep.nesting_ok), int(rep.center_in_cube), rep.diam_constant, rep.diam_lower,
           rep.separation_constant, *rep.mass_envelope, rep.mass_fraction_in_envelope)
    return {"lattice": t, "lattice_report": tr}


def cmd_corona(cfg, pair, seed, threads):
    k = cfg.corona
    s = _sample(pair, cfg, seed)
    lat = lattice.build_lattice(s, cfg.lattice.j_max, seed=seed)
    params = corona.CoronaParams(k.k1, k.eps, k.delta)
    F = corona.build_top(lat, corona.cube_at(lat, k.root, k.root_gen), params, depth=k.depth, threads=threads)
    t = Table("corona", ("cube", "k", "bbeta_k1", "angle", "n_stop", "n_tree", "sigma_Z", "mass_fraction"))
    for row in F.rows():
        t.add(*row)
    tp = Table("corona_packing", ("root", "levels", "packing"))
    tp.add(f"{F.root[0]}:{F.root[1]}", len(F.top), F.packing)
    return {"corona": t, "corona_packing": tp}


def cmd_carleson(cfg, pair, seed, threads):
    b = cfg.carleson
    vc = carleson.VerdictConfig(depth=b.depth, h=cfg.sample.h, centers=b.centers, grid_level=b.grid_level,
                                seed=seed, threads=threads, ball=b.ball, pow={"eps_n": b.pow_eps_n, "a": b.pow_a})
    res = carleson.strong_geometric_verdict(pair, vc)
    t = Table("carleson", ("coeff", "j", "increment", "S", "verdict", "slope"))
    for c, rep in res.reports.items():
        for row in rep.rows():
            t.add(c, *row)
    return {"carleson": t}


def default_pole(pair, sample, side, trunc):
    """Grid point on `side` inside the truncation ball that is farthest from the sample."""
    lo, hi = pair.bbox
    n = 33 if pair.ambient_dim == 2 else 11
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, pair.ambient_dim)
    c, R = trunc
    pts = pts[(pair.classify(pts) == side) & (np.linalg.norm(pts - c, axis=1) < 0.9 * R)]
    if len(pts) == 0:
        raise ConfigError(f"no grid point on side {side}; set wos.pole")
    return pts[int(np.argmax(sample.tree.query(pts)[0]))]


def cmd_wos(cfg, pair, seed, threads):
    w = cfg.wos
    s = _sample(pair, cfg, seed)
    wc = harmonic.WosConfig(eps_stop=w.eps_stop, walks=w.walks, max_steps=w.max_steps, seed=seed, threads=threads)
    pole = w.pole
    if pole is None:
        pole = default_pole(pair, s, w.side, harmonic.default_truncation(pair, s))
    hc = harmonic.wos_harmonic_measure(pair, w.side, pole, s, wc)
    axes = ("x", "y", "z")[:pair.ambient_dim]
    t = Table("wos_hits", ("i", *axes, "weight", "hits"))
    for row in hc.rows():
        t.add(*row)
    ts = Table("wos_summary", ("side", *(f"pole_{a}" for a in axes), "walks", "completed", "outer", "censored",
                               "mean_steps"))
    ts.add(w.side, *np.asarray(pole, float), hc.walks, hc.total, hc.outer, hc.censored, hc.mean_steps)
    prof = harmonic.density_profile(hc, _anchor(s, w.probe, pair), w.radii)
    tp = Table("wos_density", (*axes, "r", "theta", "lo", "hi"))
    for row in prof.rows():
        tp.add(*row)
    return {"wos_hits": t, "wos_summary": ts, "wos_density": tp}


COMMANDS = {
    "domains": cmd_domains,
    "coeff": cmd_coeff,
    "spectra": cmd_spectra,
    "acf": cmd_acf,
    "lattice": cmd_lattice,
    "corona": cmd_corona,
    "carleson": cmd_carleson,
    "wos": cmd_wos,
}


def digest(tables):
    h = hashlib.sha256()
    for name in sorted(tables):
        h.update(name.encode())
        h.update(render(tables[name]).encode())
    return h.hexdigest()


def verify_all(seed, threads, log=print):
    results = verify.run_all(verify.Context(seed, threads), log=log)
    tables = {}
    for c in results:
        tables.update(c.tables)
    tables["acceptance"] = verify.summary_table(results, digest(tables))
    return results, tables


def build_parser():
    ap = argparse.ArgumentParser(prog="flatgauge", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=[*COMMANDS, "verify-all"])
    ap.add_argument("--config", help="INI run configuration")
    ap.add_argument("--seed", type=int, help="overrides run.seed")
    ap.add_argument("--out", help="output directory (overrides run.out)")
    ap.add_argument("--threads", type=int, help="worker threads (else FLATGAUGE_THREADS, else run.threads)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config.load(args.config) if args.config else config.RunConfig()
        if args.seed is not None:
            cfg.run.seed = args.seed
        if args.out is not None:
            cfg.run.out = args.out
        cfg.validate(args.command)
        threads = config.resolve_threads(args.threads, cfg)
        seed = cfg.run.seed
        if args.command == "verify-all":
            results, tables = verify_all(seed, threads)
            write_tables(cfg.run.out, tables)
            failed = [c.id for c in results if not c.passed]
            if failed:
                raise VerificationFailure(f"criteria {failed} failed")
            print(f"all {len(results)} criteria passed; tables in {cfg.run.out}")
            return 0
        pair = make_builtin(cfg.domain)
        tables = COMMANDS[args.command](cfg, pair, seed, threads)
        for path in write_tables(cfg.run.out, tables):
            print(path)
        return 0
    except FlatgaugeError as exc:
        print(f"flatgauge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
