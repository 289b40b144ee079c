"""Walk on spheres in the unit disk: harmonic measure from an off-centre pole against the Poisson kernel."""
import numpy as np

from flatgauge.domains import IN1, make_builtin, sample_boundary
from flatgauge.harmonic import WosConfig, density_ratio, wos_harmonic_measure

rho = 0.5
disk = make_builtin({"kind": "disk"})
s = sample_boundary(disk, 1e-3)
hc = wos_harmonic_measure(disk, IN1, [rho, 0.0], s, WosConfig(eps_stop=2e-3, walks=100_000))
print(f"{hc.walks} walks, {hc.censored} censored, mean {hc.mean_steps:.1f} steps")

th = np.arctan2(s.points[:, 1], s.points[:, 0])
F = lambda t: np.arctan((1 + rho) / (1 - rho) * np.tan(t / 2)) / np.pi
edges = np.linspace(-np.pi, np.pi, 9)
print("arc                 estimate  exact     z")
for a, b in zip(edges, edges[1:]):
    sel = (th >= a) & (th < b)
    p = hc.counts[sel].sum() / hc.total
    # tan(t/2) blows up at +-pi, so stop just short of it
    ex = F(min(b, np.pi - 1e-12)) - F(max(a, -np.pi + 1e-12))
    z = (p - ex) / np.sqrt(ex * (1 - ex) / hc.total)
    print(f"[{a:+.3f}, {b:+.3f}]  {p:.5f}   {ex:.5f}  {z:+.2f}")

print()
print("theta = omega(B(x, r)) / r at x = (1, 0); for small r it tends to 2 P(0) = (1+rho)/(1-rho)/pi")
for r in (0.02, 0.05, 0.1):
    d = density_ratio(hc, [1.0, 0.0], r)
    print(f"r = {r:.2f}   {d.theta:.4f}  [{d.lo:.4f}, {d.hi:.4f}]   limit {(1 + rho) / (1 - rho) / np.pi:.4f}")
