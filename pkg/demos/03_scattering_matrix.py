"""Leading-order scattering matrix entries for the inverse-square potential.

For a fixed pair of directions the connecting geodesics are found once and
the entry is assembled at several frequencies.  In two dimensions the modulus
grows like lambda^(1/2), so doubling lambda multiplies it by sqrt(2).
"""

import numpy as np

from conicscat import assemble_smatrix, build_manifold, find_connecting_geodesics

m = build_manifold("inverse-square", 2, c=1.0)
y_in, y_out = [1.0, 0.0], [0.0, 1.0]
geos = find_connecting_geodesics(y_in, y_out, m, 1.0)
print(f"{len(geos)} connecting geodesic(s)")
prev = None
for lam in (10.0, 20.0, 40.0, 80.0):
    e = assemble_smatrix(lam, y_in, y_out, m, geodesics=geos)
    ratio = "" if prev is None else f"  ratio {abs(e.value) / prev:.12f}"
    print(f"lambda={lam:5.1f}  S={e.value:.6e}{ratio}")
    prev = abs(e.value)
print("sqrt(2) =", np.sqrt(2.0))
