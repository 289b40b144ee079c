"""Carleson sums of eps_n^2 and a over ten dyadic generations, for the seven catalog pairs.

Bounded sums flatten out; diverging ones keep a constant increment per generation.
Takes about a minute.
"""
from flatgauge.carleson import VerdictConfig, strong_geometric_verdict
from flatgauge.domains import CATALOG_SEVEN, make_builtin

cfg = VerdictConfig()
print(f"{'pair':10s} {'S eps^2':>9s} {'slope':>8s} {'verdict':>10s}   {'S a':>9s} {'slope':>8s} {'verdict':>10s}")
for kind in CATALOG_SEVEN:
    pair = make_builtin({"kind": kind, "w": 1 / 16} if kind == "strip" else {"kind": kind})
    res = strong_geometric_verdict(pair, cfg)
    e, a = res.reports["eps_n"], res.reports["a"]
    print(f"{kind:10s} {e.total:9.4f} {e.slope:8.4f} {e.verdict:>10s}   {a.total:9.4f} {a.slope:8.4f} {a.verdict:>10s}")

strip = strong_geometric_verdict(make_builtin({"kind": "strip", "w": 1 / 16}), cfg).reports["eps_n"]
print()
print("strip increments by generation (constant once r <= w):")
for j, inc, S, _, _ in strip.rows():
    print(f"  j = {j:2d}  r = {strip.radius * 2.0 ** -j:.5f}  increment {inc:8.4f}  S {S:9.4f}")
