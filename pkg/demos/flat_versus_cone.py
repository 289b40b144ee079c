"""Flat half-plane against a cone: eps_n and a at the vertex, and the ACF functional along r."""
import numpy as np

from flatgauge.acf import acf_J, cone_field, cone_J_exact, halfspace_field
from flatgauge.coefficients import epsilon_n
from flatgauge.domains import make_builtin
from flatgauge.spectra import a_coefficient
from flatgauge.sphere import build_grid

g = build_grid(1, 3)
x = np.zeros(2)

print("pair        gamma   eps_n     4*gamma   a         arc formula")
print(f"halfspace   -       {epsilon_n(make_builtin({'kind': 'halfspace'}), x, 1.0, g):.6f}  -         "
      f"{a_coefficient(make_builtin({'kind': 'halfspace'}), x, 1.0, g):.6f}")
for gamma in (0.05, 0.1, 0.2, 0.3):
    cone = make_builtin({"kind": "cone", "gamma": gamma})
    e = epsilon_n(cone, x, 1.0, g)
    a = a_coefficient(cone, x, 1.0, g)
    print(f"cone        {gamma:.2f}    {e:.6f}  {4 * gamma:.6f}  {a:.6f}  {min(1, 2 * np.pi / (np.pi - 2 * gamma) - 2):.6f}")

# eps_n is linear in the opening defect while a grows the same way, so eps^2 / a -> 0 near flat
print()
print("ACF functional J(r); flat for the half-plane, a power of r for the cone")
hf, cf = halfspace_field(), cone_field(0.2)
for r in (0.1, 0.3, 1.0):
    print(f"r = {r:4.2f}   half-plane {acf_J(hf, x, r):.6f} (pi^2/4 = {np.pi ** 2 / 4:.6f})   "
          f"cone {acf_J(cf, x, r):.6f} (exact {cone_J_exact(0.2, r):.6f})")
